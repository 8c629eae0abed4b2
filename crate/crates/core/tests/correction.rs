mod common;

use common::*;
use darcy_bvc::assembly::Discretization;
use darcy_bvc::correction::{taylor_increment, taylor_trace, TaylorConfig};
use darcy_bvc::element::LocalField;
use darcy_bvc::geometry::Domain;
use darcy_bvc::mesh::mesh_at_level;
use darcy_bvc::Vec2;

fn disc(domain: Domain, level: usize, k: usize) -> Discretization {
    Discretization::new(domain.clone(), mesh_at_level(&domain, level).unwrap(), k).unwrap()
}

#[test]
fn taylor_sum_is_exact_for_low_degree_fields() {
    let mut rng = rng(21);
    for domain in [Domain::disk(), Domain::ring()] {
        for k in 1..=3 {
            let d = disc(domain.clone(), 1, k);
            for g in &d.boundary {
                let field = d.velocity_field(g.owner, &random_vec(&mut rng, d.dofs.n_u));
                for m in k..=k + 2 {
                    let t = taylor_trace(&field, g, &TaylorConfig::taylor_sum(m));
                    for (q, v) in t.iter().enumerate() {
                        let exact = field.eval(g.projected(q));
                        assert!((v - exact).norm() <= 1e-12 * exact.norm().max(1.0));
                    }
                }
            }
        }
    }
}

#[test]
fn lower_orders_differ_on_curved_edges() {
    let d = disc(Domain::disk(), 1, 2);
    let g = &d.boundary[0];
    let field = LocalField::new(&d.velocity, d.maps[g.owner], &unit(d.velocity.dim(), 0));
    let full = taylor_trace(&field, g, &TaylorConfig::taylor_sum(2));
    let cut = taylor_trace(&field, g, &TaylorConfig::taylor_sum(0));
    let gap = full.iter().zip(&cut).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap > 1e-8);
}

/// `(h, ratio)` with ratio `‖h_K^{-1/2} T_1^m v_h·ñ‖_{0,Γ_h} / ‖v_h‖_{0,K_b}`
/// (`K_b` the boundary triangles), maximized over the given fields.
fn increment_ratio(level: usize, k: usize, m: usize, fields: &dyn Fn(&Discretization) -> Vec<Vec<f64>>) -> (f64, f64) {
    let d = disc(Domain::disk(), level, k);
    let rule = darcy_bvc::quadrature::triangle_quadrature(2 * k + 2);
    let mut worst: f64 = 0.0;
    for v in fields(&d) {
        let (mut edge, mut cell) = (0.0, 0.0);
        for g in &d.boundary {
            let field = d.velocity_field(g.owner, &v);
            let inc = taylor_increment(&field, g, m);
            edge += (0..g.len()).map(|q| g.weights[q] / g.h_k * inc[q].dot(&g.n_gamma(q)).powi(2)).sum::<f64>();
            let map = d.maps[g.owner];
            cell += rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * map.det.abs() * field.eval(map.to_physical(*p)).norm_squared())
                .sum::<f64>();
        }
        worst = worst.max((edge / cell).sqrt());
    }
    (d.mesh.stats().h, worst)
}

fn slope(r: &[(f64, f64)]) -> f64 {
    let (a, b) = (r[r.len() - 2], r[r.len() - 1]);
    (a.1 / b.1).ln() / (a.0 / b.0).ln()
}

const PAIRS: [(usize, usize); 5] = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 3)];

#[test]
fn increment_is_bounded_for_random_fields() {
    for (k, m) in PAIRS {
        let random = |d: &Discretization| {
            let mut rng = rng(d.mesh.level as u64);
            (0..10).map(|_| random_vec(&mut rng, d.dofs.n_u)).collect()
        };
        let r: Vec<_> = (2..=5).map(|l| increment_ratio(l, k, m, &random)).collect();
        let (lo, hi) = r.iter().fold((f64::MAX, 0.0f64), |(lo, hi), x| (lo.min(x.1), hi.max(x.1)));
        assert!(hi < 5.0 && hi / lo < 2.0, "k={k} m={m}: {r:?}");
    }
}

#[test]
fn increment_decays_like_h_for_smooth_fields() {
    for (k, m) in PAIRS {
        let smooth = |d: &Discretization| {
            vec![darcy_bvc::assembly::interpolate_velocity(d, |x: Vec2| {
                Vec2::new(x.y.cos() + x.x * x.x, (x.x - x.y).sin())
            })]
        };
        let r: Vec<_> = (2..=5).map(|l| increment_ratio(l, k, m, &smooth)).collect();
        let s = slope(&r);
        assert!((s - 1.0).abs() <= 0.3, "k={k} m={m}: slope {s}, {r:?}");
    }
}

#[test]
fn fast_path_matches_series() {
    let mut rng = rng(99);
    for k in 1..=3 {
        let d = disc(Domain::disk(), 3, k);
        let fast = TaylorConfig::new(k, k).unwrap();
        assert!(fast.fast_path);
        let series = TaylorConfig::taylor_sum(k);
        for g in &d.boundary {
            let field = d.velocity_field(g.owner, &random_vec(&mut rng, d.dofs.n_u));
            let a = taylor_trace(&field, g, &fast);
            let b = taylor_trace(&field, g, &series);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300));
            }
        }
    }
}

#[test]
fn example_one_data_vanishes_on_the_circle() {
    use darcy_bvc::analysis::{case_circle, ManufacturedCase};
    use darcy_bvc::correction::pullback_neumann;
    let case = case_circle();
    let d = disc(Domain::disk(), 2, 1);
    for g in &d.boundary {
        for v in pullback_neumann(|x, n| case.g_n(x, n), g) {
            assert!(v.abs() < 1e-13);
        }
    }
}
