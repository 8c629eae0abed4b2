//! Boundary value correction: per-edge trace geometry and the Taylor
//! normal-extension operator
//!
//! ```text
//! (T^m v)(x_h) = Σ_{j=0}^{m} δ_h(x_h)^j / j! · ∂_ν^j v(x_h)
//! ```
//!
//! evaluated at quadrature nodes of each straight boundary edge. For a
//! polynomial field of degree at most `m` the sum is exact, so `T^m v(x_h)`
//! equals `v(x_h + δ_h ν_h)`: the fast path evaluates the local polynomial at
//! the projected point directly. This is the sense in which `T^k v_h = v_h`
//! for discrete BDM_k fields: the identity holds on the polynomial extension
//! of `v_h` evaluated on the curved boundary, not pointwise on the mesh edge.

use crate::element::{AffineMap, BdmElement, LocalField};
use crate::error::{Error, Result};
use crate::geometry::{Domain, ProjectionData, Vec2};
use crate::mesh::Mesh;
use crate::quadrature::EdgeRule;

/// Geometric data at the quadrature nodes of one boundary edge.
#[derive(Clone, Debug)]
pub struct EdgeTraceGeometry {
    pub edge: usize,
    pub component: usize,
    /// The unique triangle containing the edge.
    pub owner: usize,
    /// Local index of the edge in `owner`.
    pub local_edge: usize,
    /// Edge parameter of each node on `[-1, 1]`, oriented along the global edge.
    pub params: Vec<f64>,
    /// Physical quadrature nodes on the edge.
    pub nodes: Vec<Vec2>,
    /// Physical weights (including the `|e|/2` length factor).
    pub weights: Vec<f64>,
    /// Projection data (`δ_h`, `ν_h`, `ñ`) per node.
    pub projections: Vec<ProjectionData>,
    /// Outward unit normal of the straight edge.
    pub n_h: Vec2,
    /// Diameter of the owning triangle.
    pub h_k: f64,
    pub length: f64,
}

impl EdgeTraceGeometry {
    pub fn delta(&self, q: usize) -> f64 {
        self.projections[q].delta
    }

    pub fn nu(&self, q: usize) -> Vec2 {
        self.projections[q].nu
    }

    pub fn n_gamma(&self, q: usize) -> Vec2 {
        self.projections[q].n_gamma
    }

    pub fn projected(&self, q: usize) -> Vec2 {
        self.projections[q].x
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Builds the trace geometry of boundary edge `boundary_index` (an index into
/// `mesh.boundary_edges`).
pub fn edge_trace_geometry(mesh: &Mesh, domain: &Domain, boundary_index: usize, rule: &EdgeRule) -> Result<EdgeTraceGeometry> {
    let be = mesh.boundary_edges[boundary_index];
    let edge = &mesh.edges[be.edge];
    let (owner, local_edge) = mesh.boundary_owner(be.edge);
    let a = mesh.vertices[edge.vertices[0]];
    let b = mesh.vertices[edge.vertices[1]];
    let length = (b - a).norm();
    let curve = domain.curve(be.component);
    let mut nodes = Vec::with_capacity(rule.len());
    let mut weights = Vec::with_capacity(rule.len());
    let mut projections = Vec::with_capacity(rule.len());
    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
        let x_h = (a + b) * 0.5 + (b - a) * (0.5 * t);
        projections.push(curve.closest_point(x_h)?);
        nodes.push(x_h);
        weights.push(w * 0.5 * length);
    }
    Ok(EdgeTraceGeometry {
        edge: be.edge,
        component: be.component,
        owner,
        local_edge,
        params: rule.points.clone(),
        nodes,
        weights,
        projections,
        n_h: edge.normal,
        h_k: mesh.triangle_diameter(owner),
        length,
    })
}

/// Trace geometry of every boundary edge, in `mesh.boundary_edges` order.
pub fn boundary_trace_geometry(mesh: &Mesh, domain: &Domain, rule: &EdgeRule) -> Result<Vec<EdgeTraceGeometry>> {
    (0..mesh.boundary_edges.len())
        .map(|i| edge_trace_geometry(mesh, domain, i, rule))
        .collect()
}

/// Taylor order and evaluation strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaylorConfig {
    pub m: usize,
    /// Evaluate at the projected point instead of summing derivatives.
    /// Valid when `m` is at least the polynomial degree of the field.
    pub fast_path: bool,
}

impl TaylorConfig {
    /// Configuration for BDM_k fields; requires `m <= k` and enables the
    /// fast path when `m == k`.
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m > k {
            return Err(Error::Config(format!("Taylor order m = {m} exceeds k = {k}")));
        }
        Ok(Self { m, fast_path: m >= k })
    }

    /// Always sums the derivative series.
    pub fn taylor_sum(m: usize) -> Self {
        Self { m, fast_path: false }
    }
}

fn inv_factorial(j: usize) -> f64 {
    1.0 / (1..=j).map(|i| i as f64).product::<f64>()
}

/// `T^m v` at every node of `geom`.
pub fn taylor_trace(field: &LocalField, geom: &EdgeTraceGeometry, config: &TaylorConfig) -> Vec<Vec2> {
    (0..geom.len())
        .map(|q| {
            if config.fast_path {
                field.eval(geom.projected(q))
            } else {
                taylor_sum(field, geom.nodes[q], geom.delta(q), geom.nu(q), 0, config.m)
            }
        })
        .collect()
}

/// `T_1^m v = T^m v − v` at every node (always by the derivative series).
pub fn taylor_increment(field: &LocalField, geom: &EdgeTraceGeometry, m: usize) -> Vec<Vec2> {
    (0..geom.len())
        .map(|q| taylor_sum(field, geom.nodes[q], geom.delta(q), geom.nu(q), 1, m))
        .collect()
}

fn taylor_sum(field: &LocalField, x_h: Vec2, delta: f64, nu: Vec2, first: usize, m: usize) -> Vec2 {
    let mut acc = Vec2::zeros();
    for j in first..=m {
        if j > 0 && delta == 0.0 {
            break;
        }
        acc += field.directional_derivative(x_h, nu, j) * (delta.powi(j as i32) * inv_factorial(j));
    }
    acc
}

/// Taylor sum for an analytic field given its directional derivatives:
/// `directional(x, nu, j)` returns `∂_ν^j v(x)`.
pub fn taylor_trace_analytic(
    directional: impl Fn(Vec2, Vec2, usize) -> Vec2,
    geom: &EdgeTraceGeometry,
    m: usize,
) -> Vec<Vec2> {
    (0..geom.len())
        .map(|q| {
            let (x_h, delta, nu) = (geom.nodes[q], geom.delta(q), geom.nu(q));
            let mut acc = directional(x_h, nu, 0);
            for j in 1..=m {
                if delta == 0.0 {
                    break;
                }
                acc += directional(x_h, nu, j) * (delta.powi(j as i32) * inv_factorial(j));
            }
            acc
        })
        .collect()
}

/// `(T^m φ_i)(x_q)·ñ(x_q)` for every local basis function `i` of the owning
/// triangle (rows) and node `q` (columns), before orientation signs.
pub fn basis_normal_traces(element: &BdmElement, map: &AffineMap, geom: &EdgeTraceGeometry, config: &TaylorConfig) -> Vec<Vec<f64>> {
    let n = element.dim();
    let mut unit = vec![0.0; n];
    (0..n)
        .map(|i| {
            unit[i] = 1.0;
            let field = LocalField::new(element, *map, &unit);
            unit[i] = 0.0;
            taylor_trace(&field, geom, config)
                .iter()
                .enumerate()
                .map(|(q, v)| v.dot(&geom.n_gamma(q)))
                .collect()
        })
        .collect()
}

/// Pulls Neumann data back from the curve: `g̃_N(x_h) = g_N(ρ_h(x_h))`.
/// `g_n(x, n)` evaluates the data at a curve point `x` with outward normal `n`.
pub fn pullback_neumann(g_n: impl Fn(Vec2, Vec2) -> f64, geom: &EdgeTraceGeometry) -> Vec<f64> {
    geom.projections.iter().map(|p| g_n(p.x, p.n_gamma)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::interpolate_bdm;
    use crate::mesh::{coarse_mesh, mesh_at_level};
    use crate::quadrature::edge_quadrature;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn owner_map(mesh: &Mesh, t: usize) -> AffineMap {
        AffineMap::from_vertices(mesh.triangles[t].map(|v| mesh.vertices[v])).unwrap()
    }

    #[test]
    fn flat_edges_have_no_offset() {
        let d = Domain::square();
        let m = mesh_at_level(&d, 1).unwrap();
        let g = boundary_trace_geometry(&m, &d, &edge_quadrature(4)).unwrap();
        for e in &g {
            for q in 0..e.len() {
                assert_eq!(e.delta(q), 0.0);
                assert!((e.n_gamma(q) - e.n_h).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn chord_midpoint_sagitta() {
        // disk fan chords subtend half-angle 30°
        let d = Domain::disk();
        let m = coarse_mesh(&d).unwrap();
        let g = edge_trace_geometry(&m, &d, 0, &edge_quadrature(3)).unwrap();
        let alpha = std::f64::consts::PI / 6.0;
        assert!((g.delta(1) - (1.0 - alpha.cos())).abs() < 1e-15);
        // nodes approaching endpoints
        let fine = edge_trace_geometry(&m, &d, 0, &edge_quadrature(20)).unwrap();
        assert!(fine.delta(0) < 0.05 * fine.delta(10));
    }

    #[test]
    fn taylor_trace_of_constant_and_order_zero() {
        let d = Domain::disk();
        let m = mesh_at_level(&d, 1).unwrap();
        let geom = boundary_trace_geometry(&m, &d, &edge_quadrature(4)).unwrap();
        let e = BdmElement::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in &geom {
            let map = owner_map(&m, g.owner);
            let c = interpolate_bdm(&e, &map, |_| Vec2::new(0.3, -1.2), 6);
            let f = LocalField::new(&e, map, &c);
            for m_ord in 0..=2 {
                for v in taylor_trace(&f, g, &TaylorConfig::taylor_sum(m_ord)) {
                    assert!((v - Vec2::new(0.3, -1.2)).norm() < 1e-12);
                }
            }
            let coeffs: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = LocalField::new(&e, map, &coeffs);
            let t0 = taylor_trace(&f, g, &TaylorConfig::taylor_sum(0));
            for (q, v) in t0.iter().enumerate() {
                assert_eq!(*v, f.eval(g.nodes[q]));
            }
        }
    }

    #[test]
    fn fast_path_matches_taylor_sum() {
        let d = Domain::disk();
        let m = mesh_at_level(&d, 2).unwrap();
        let geom = boundary_trace_geometry(&m, &d, &edge_quadrature(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = BdmElement::new(2).unwrap();
        for g in &geom {
            let map = owner_map(&m, g.owner);
            let coeffs: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = LocalField::new(&e, map, &coeffs);
            let fast = taylor_trace(&f, g, &TaylorConfig::new(2, 2).unwrap());
            let slow = taylor_trace(&f, g, &TaylorConfig::taylor_sum(2));
            let scale = fast.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn m_above_k_rejected() {
        assert!(TaylorConfig::new(3, 2).is_err());
        assert!(TaylorConfig::new(2, 2).unwrap().fast_path);
        assert!(!TaylorConfig::new(1, 2).unwrap().fast_path);
    }

    #[test]
    fn neumann_pullback() {
        let d = Domain::disk();
        let m = coarse_mesh(&d).unwrap();
        let g = edge_trace_geometry(&m, &d, 0, &edge_quadrature(3)).unwrap();
        assert!(pullback_neumann(|_, _| 2.5, &g).iter().all(|&v| v == 2.5));
        let vals = pullback_neumann(|x, n| x.dot(&n), &g);
        assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }
}
