//! Independent oracles shared by the integration tests. They evaluate the
//! forms directly from physical fields by quadrature instead of going through
//! the assembled matrices.
#![allow(dead_code)]

use darcy_bvc::assembly::Discretization;
use darcy_bvc::correction::{taylor_trace, TaylorConfig};
use darcy_bvc::quadrature::triangle_quadrature;
use darcy_bvc::Vec2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Physical pressure value on triangle `t`.
pub fn pressure_at(disc: &Discretization, t: usize, p: &[f64], x: Vec2) -> f64 {
    disc.pressure.eval(disc.local_pressure(t, p), disc.maps[t].to_reference(x))
}

/// `a_h(w, v)` by quadrature of physical fields; `m = None` omits the
/// boundary term. Taylor traces use the derivative series.
pub fn a_form(disc: &Discretization, w: &[f64], v: &[f64], m: Option<usize>) -> f64 {
    let all: Vec<usize> = (0..disc.maps.len()).collect();
    a_form_on(disc, w, v, m, &all)
}

/// [`a_form`] restricted to the triangles `elements` (and their boundary edges).
pub fn a_form_on(disc: &Discretization, w: &[f64], v: &[f64], m: Option<usize>, elements: &[usize]) -> f64 {
    let rule = triangle_quadrature(2 * disc.k + 4);
    let mut acc = 0.0;
    for &t in elements {
        let map = &disc.maps[t];
        let fw = disc.velocity_field(t, w);
        let fv = disc.velocity_field(t, v);
        for (p, wq) in rule.points.iter().zip(&rule.weights) {
            let x = map.to_physical(*p);
            acc += wq * map.det.abs() * (fw.eval(x).dot(&fv.eval(x)) + fw.div(x) * fv.div(x));
        }
    }
    if let Some(m) = m {
        let config = TaylorConfig::taylor_sum(m);
        for g in disc.boundary.iter().filter(|g| elements.contains(&g.owner)) {
            let tw = taylor_trace(&disc.velocity_field(g.owner, w), g, &config);
            let tv = taylor_trace(&disc.velocity_field(g.owner, v), g, &config);
            for q in 0..g.len() {
                let n = g.n_gamma(q);
                acc += g.weights[q] / g.h_k * tw[q].dot(&n) * tv[q].dot(&n);
            }
        }
    }
    acc
}

/// `‖v‖²_{0,h}`.
pub fn mesh_norm_sq(disc: &Discretization, v: &[f64], m: Option<usize>) -> f64 {
    a_form(disc, v, v, m)
}

/// `-(div v, q)` and, with `boundary`, `+ Σ_e ⟨v·n_h, q⟩_e`.
pub fn b_form(disc: &Discretization, v: &[f64], q: &[f64], boundary: bool) -> f64 {
    let all: Vec<usize> = (0..disc.maps.len()).collect();
    b_form_on(disc, v, q, boundary, &all)
}

pub fn b_form_on(disc: &Discretization, v: &[f64], q: &[f64], boundary: bool, elements: &[usize]) -> f64 {
    let rule = triangle_quadrature(2 * disc.k + 4);
    let mut acc = 0.0;
    for &t in elements {
        let map = &disc.maps[t];
        let fv = disc.velocity_field(t, v);
        for (p, wq) in rule.points.iter().zip(&rule.weights) {
            let x = map.to_physical(*p);
            acc -= wq * map.det.abs() * fv.div(x) * pressure_at(disc, t, q, x);
        }
    }
    if boundary {
        for g in disc.boundary.iter().filter(|g| elements.contains(&g.owner)) {
            let fv = disc.velocity_field(g.owner, v);
            for q_ in 0..g.len() {
                let x = g.nodes[q_];
                acc += g.weights[q_] * fv.eval(x).dot(&g.n_h) * pressure_at(disc, g.owner, q, x);
            }
        }
    }
    acc
}

/// `Σ_e ∫_e v·n_h`.
pub fn boundary_flux(disc: &Discretization, v: &[f64]) -> f64 {
    disc.boundary
        .iter()
        .map(|g| {
            let fv = disc.velocity_field(g.owner, v);
            (0..g.len()).map(|q| g.weights[q] * fv.eval(g.nodes[q]).dot(&g.n_h)).sum::<f64>()
        })
        .sum()
}

/// `∫_{Ω_h} q`.
pub fn pressure_integral(disc: &Discretization, q: &[f64]) -> f64 {
    let rule = triangle_quadrature(2 * disc.k + 2);
    let mut acc = 0.0;
    for (t, map) in disc.maps.iter().enumerate() {
        for (p, wq) in rule.points.iter().zip(&rule.weights) {
            acc += wq * map.det.abs() * pressure_at(disc, t, q, map.to_physical(*p));
        }
    }
    acc
}

/// Matrix-free application of the corrected-mode operator to `[u, p, λ]`,
/// one test function at a time.
pub fn matrix_free_apply(disc: &Discretization, x: &[f64], m: usize) -> Vec<f64> {
    let (nu, np) = (disc.dofs.n_u, disc.dofs.n_p);
    let (u, rest) = x.split_at(nu);
    let (p, lam) = rest.split_at(np);
    let area = disc.area();
    let flux = boundary_flux(disc, u);
    let mut support = vec![Vec::new(); nu];
    for (t, l2g) in disc.local_dofs.iter().enumerate() {
        for &(g, _) in l2g {
            support[g].push(t);
        }
    }
    let mut y = Vec::with_capacity(nu + np + 1);
    for (i, elements) in support.iter().enumerate() {
        let v = unit(nu, i);
        y.push(a_form_on(disc, u, &v, Some(m), elements) + b_form_on(disc, &v, p, true, elements));
    }
    for a in 0..np {
        let q = unit(np, a);
        let t = a / disc.dofs.pressure_dofs;
        let integral = pressure_integral(disc, &q);
        y.push(b_form_on(disc, u, &q, false, &[t]) + flux * integral / area + lam[0] * integral);
    }
    y.push(pressure_integral(disc, p));
    y
}

/// Random smooth field `(a₁ sin(b₁·x + c₁), a₂ cos(b₂·x + c₂))` together with
/// its divergence.
#[derive(Clone, Copy, Debug)]
pub struct SmoothField {
    a: [f64; 2],
    b: [Vec2; 2],
    c: [f64; 2],
}

impl SmoothField {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut r = || rng.random_range(-2.0..2.0);
        Self {
            a: [r(), r()],
            b: [Vec2::new(r(), r()), Vec2::new(r(), r())],
            c: [r(), r()],
        }
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        Vec2::new(
            self.a[0] * (self.b[0].dot(&x) + self.c[0]).sin(),
            self.a[1] * (self.b[1].dot(&x) + self.c[1]).cos(),
        )
    }

    pub fn div(&self, x: Vec2) -> f64 {
        self.a[0] * self.b[0].x * (self.b[0].dot(&x) + self.c[0]).cos()
            - self.a[1] * self.b[1].y * (self.b[1].dot(&x) + self.c[1]).sin()
    }
}

/// `(‖div I_K v − Π div v‖_{0,K}, ‖div v‖_{0,K})` on triangle `t`.
pub fn commuting_defect(
    disc: &Discretization,
    t: usize,
    v: impl Fn(Vec2) -> Vec2,
    div_v: impl Fn(Vec2) -> f64,
) -> (f64, f64) {
    use darcy_bvc::element::{interpolate_bdm, project_pressure, LocalField};
    let map = disc.maps[t];
    let coeffs = interpolate_bdm(&disc.velocity, &map, &v, 24);
    let field = LocalField::new(&disc.velocity, map, &coeffs);
    let rule = triangle_quadrature(24);
    let lhs = project_pressure(&disc.pressure, &map, |x| field.div(x), &rule);
    let rhs = project_pressure(&disc.pressure, &map, &div_v, &rule);
    // the mapped pressure basis has mass matrix |det J| I
    let jac = map.det.abs();
    let diff = (lhs.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * jac).sqrt();
    let size = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| w * jac * div_v(map.to_physical(*p)).powi(2))
        .sum::<f64>()
        .sqrt();
    (diff, size)
}
