//! Reference bases, the BDM_k velocity element, the discontinuous P_{k-1}
//! pressure element, the contravariant Piola map, and the local
//! interpolation/projection operators.
//!
//! Reference triangle vertices are `(0,0), (1,0), (0,1)`. Local edge `i` is
//! the edge opposite vertex `i`, traversed from vertex `i+1` to vertex `i+2`
//! (indices mod 3); its parameter `t` runs over `[-1, 1]` in that direction.
//!
//! Local BDM degrees of freedom, in order:
//!
//! 1. per edge `i`, `j = 0..=k`: `∫_e v·n L_j(t) ds` with `n` the outward
//!    unit normal and `L_j` the Legendre polynomial;
//! 2. `∫_K v·∇ψ` for `ψ` in an orthonormal basis of `P_{k-1}` without the constant;
//! 3. `∫_K v·curl(b_K ψ)` for `ψ` in `P_{k-2}`, `b_K = λ₁λ₂λ₃`,
//!    `curl φ = (∂_y φ, -∂_x φ)`.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::poly::{dim_pk, exponents, vec_poly_div, vec_poly_eval, Poly2, VecPoly};
use crate::quadrature::{edge_quadrature, legendre, triangle_quadrature, EdgeRule, TriangleRule};

pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Endpoints of reference edge `i` in traversal order.
pub fn reference_edge(i: usize) -> ([f64; 2], [f64; 2]) {
    (REF_VERTICES[(i + 1) % 3], REF_VERTICES[(i + 2) % 3])
}

/// L²-orthonormal basis of `P_k` on the reference triangle, ordered by total degree.
#[derive(Clone, Debug)]
pub struct TriangleBasis {
    pub degree: usize,
    pub polys: Vec<Poly2>,
}

impl TriangleBasis {
    pub fn new(degree: usize) -> Self {
        let monos: Vec<(usize, usize)> = exponents(degree).collect();
        let n = monos.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let (a1, b1) = monos[i];
            let (a2, b2) = monos[j];
            crate::poly::reference_monomial_integral(a1 + a2, b1 + b2)
        });
        // rows of L^{-1} give the orthonormal combinations (Gram-Schmidt in
        // degree order); a second pass removes the loss of orthogonality from
        // the ill-conditioned monomial Gram matrix
        let lower_inverse = |g: DMatrix<f64>| {
            let g = (&g + g.transpose()) * 0.5;
            g.cholesky()
                .expect("Gram matrix is positive definite")
                .l()
                .try_inverse()
                .expect("Cholesky factor is invertible")
        };
        let first = lower_inverse(gram.clone());
        let second = lower_inverse(&first * &gram * first.transpose());
        let linv = second * first;
        let polys = (0..n)
            .map(|i| {
                let terms: Vec<(usize, usize, f64)> = (0..=i).map(|j| (monos[j].0, monos[j].1, linv[(i, j)])).collect();
                let mut p = Poly2::from_terms(&terms);
                if p.degree() < degree {
                    p = &p + &Poly2::zero(degree);
                }
                p
            })
            .collect();
        Self { degree, polys }
    }

    pub fn dim(&self) -> usize {
        self.polys.len()
    }

    /// Gram matrix computed with the given rule.
    pub fn gram(&self, rule: &TriangleRule) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let vals: Vec<f64> = self.polys.iter().map(|q| q.eval(p[0], p[1])).collect();
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * vals[i] * vals[j];
                }
            }
        }
        g
    }
}

/// Legendre polynomials on the reference edge `[-1, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, j: usize, t: f64) -> f64 {
        legendre(j, t).0
    }
}

/// Affine map `x = origin + J x̂` of the reference triangle onto a physical one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub origin: Vec2,
    pub jac: Matrix2<f64>,
    pub inv: Matrix2<f64>,
    pub det: f64,
}

impl AffineMap {
    pub fn from_vertices(v: [Vec2; 3]) -> Result<Self> {
        let jac = Matrix2::new(v[1].x - v[0].x, v[2].x - v[0].x, v[1].y - v[0].y, v[2].y - v[0].y);
        let det = jac.determinant();
        let scale = jac.norm_squared();
        if !(det.abs() > 1e-14 * scale) {
            return Err(Error::DegenerateTriangle(usize::MAX, det));
        }
        let inv = Matrix2::new(jac[(1, 1)], -jac[(0, 1)], -jac[(1, 0)], jac[(0, 0)]) / det;
        Ok(Self {
            origin: v[0],
            jac,
            inv,
            det,
        })
    }

    pub fn to_physical(&self, xh: [f64; 2]) -> Vec2 {
        self.origin + self.jac * Vec2::new(xh[0], xh[1])
    }

    pub fn to_reference(&self, x: Vec2) -> [f64; 2] {
        let r = self.inv * (x - self.origin);
        [r.x, r.y]
    }

    /// Contravariant Piola transform of a reference vector.
    pub fn piola(&self, vh: [f64; 2]) -> Vec2 {
        self.jac * Vec2::new(vh[0], vh[1]) / self.det
    }

    pub fn inverse_piola(&self, v: Vec2) -> [f64; 2] {
        let r = self.inv * v * self.det;
        [r.x, r.y]
    }

    /// Physical gradient of a scalar given its reference gradient.
    pub fn gradient(&self, gh: [f64; 2]) -> Vec2 {
        self.inv.transpose() * Vec2::new(gh[0], gh[1])
    }

    /// Reference direction corresponding to the physical direction `d`.
    pub fn reference_direction(&self, d: Vec2) -> [f64; 2] {
        let r = self.inv * d;
        [r.x, r.y]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }
}

/// Physical field obtained from a reference field by the Piola transform.
pub fn piola_map<'a>(map: &'a AffineMap, ref_field: impl Fn([f64; 2]) -> [f64; 2] + 'a) -> impl Fn(Vec2) -> Vec2 + 'a {
    move |x| map.piola(ref_field(map.to_reference(x)))
}

/// Reference field obtained from a physical field by the inverse Piola transform.
pub fn inverse_piola_map<'a>(map: &'a AffineMap, field: impl Fn(Vec2) -> Vec2 + 'a) -> impl Fn([f64; 2]) -> [f64; 2] + 'a {
    move |xh| map.inverse_piola(field(map.to_physical(xh)))
}

/// The BDM_k reference element with its dual basis.
#[derive(Clone, Debug)]
pub struct BdmElement {
    pub degree: usize,
    /// Reference basis dual to the DOF functionals.
    pub basis: Vec<VecPoly>,
    /// Divergences of the reference basis.
    pub basis_div: Vec<Poly2>,
    /// `P_{k-1}` basis used by the gradient DOFs (entry 0 is the excluded constant).
    pub grad_space: TriangleBasis,
    /// `P_{k-2}` basis used by the curl-bubble DOFs (absent for k = 1).
    pub curl_space: Option<TriangleBasis>,
    /// 2-norm condition number of the DOF matrix on the orthonormal spanning set.
    pub dof_condition: f64,
    edge_rule: EdgeRule,
    tri_rule: TriangleRule,
}

/// `b̂ = λ₁λ₂λ₃ = (1 - x - y) x y` on the reference triangle.
pub fn reference_bubble() -> Poly2 {
    Poly2::from_terms(&[(1, 1, 1.0), (2, 1, -1.0), (1, 2, -1.0)])
}

fn curl(p: &Poly2) -> VecPoly {
    [p.dy(), &p.dx() * -1.0]
}

impl BdmElement {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("BDM requires k >= 1".into()));
        }
        let k = degree;
        let scalar = TriangleBasis::new(k);
        let grad_space = TriangleBasis::new(k - 1);
        let curl_space = (k >= 2).then(|| TriangleBasis::new(k - 2));
        let edge_rule = edge_quadrature(k + 2);
        let tri_rule = triangle_quadrature(2 * k + 2);
        let mut element = Self {
            degree,
            basis: Vec::new(),
            basis_div: Vec::new(),
            grad_space,
            curl_space,
            dof_condition: 0.0,
            edge_rule,
            tri_rule,
        };
        let spanning: Vec<VecPoly> = scalar
            .polys
            .iter()
            .flat_map(|p| [[p.clone(), Poly2::zero(k)], [Poly2::zero(k), p.clone()]])
            .collect();
        let n = element.dim();
        debug_assert_eq!(spanning.len(), n);
        let mut dofs = DMatrix::zeros(n, n);
        for (j, s) in spanning.iter().enumerate() {
            let col = element.reference_dofs(|xh| vec_poly_eval(s, xh[0], xh[1]));
            for i in 0..n {
                dofs[(i, j)] = col[i];
            }
        }
        let sv = dofs.clone().singular_values();
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if !(smin > 1e-12 * smax) {
            return Err(Error::SingularDofMatrix(k));
        }
        element.dof_condition = smax / smin;
        let coeffs = dofs.try_inverse().ok_or(Error::SingularDofMatrix(k))?;
        element.basis = (0..n)
            .map(|j| {
                let mut v = [Poly2::zero(k), Poly2::zero(k)];
                for (i, s) in spanning.iter().enumerate() {
                    let c = coeffs[(i, j)];
                    v[0] = &v[0] + &(&s[0] * c);
                    v[1] = &v[1] + &(&s[1] * c);
                }
                v
            })
            .collect();
        element.basis_div = element.basis.iter().map(vec_poly_div).collect();
        Ok(element)
    }

    /// `(k+1)(k+2)`.
    pub fn dim(&self) -> usize {
        (self.degree + 1) * (self.degree + 2)
    }

    pub fn edge_dofs_per_edge(&self) -> usize {
        self.degree + 1
    }

    pub fn n_grad_dofs(&self) -> usize {
        self.grad_space.dim() - 1
    }

    pub fn n_curl_dofs(&self) -> usize {
        self.curl_space.as_ref().map_or(0, |b| b.dim())
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.n_grad_dofs() + self.n_curl_dofs()
    }

    /// Local index of moment `j` on local edge `i`.
    pub fn edge_dof(&self, i: usize, j: usize) -> usize {
        i * (self.degree + 1) + j
    }

    /// Applies the reference DOF functionals to a reference vector field.
    pub fn reference_dofs(&self, v: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let k = self.degree;
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..3 {
            let (a, b) = reference_edge(i);
            let t = [b[0] - a[0], b[1] - a[1]];
            let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
            let n = [t[1] / len, -t[0] / len];
            for j in 0..=k {
                let mut s = 0.0;
                for (&tq, &wq) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                    let p = [
                        0.5 * (a[0] + b[0]) + 0.5 * tq * t[0],
                        0.5 * (a[1] + b[1]) + 0.5 * tq * t[1],
                    ];
                    let val = v(p);
                    s += wq * 0.5 * len * (val[0] * n[0] + val[1] * n[1]) * legendre(j, tq).0;
                }
                out.push(s);
            }
        }
        let vals: Vec<[f64; 2]> = self.tri_rule.points.iter().map(|&p| v(p)).collect();
        for psi in &self.grad_space.polys[1..] {
            let (gx, gy) = (psi.dx(), psi.dy());
            out.push(
                self.tri_rule
                    .points
                    .iter()
                    .zip(&self.tri_rule.weights)
                    .zip(&vals)
                    .map(|((p, w), val)| w * (val[0] * gx.eval(p[0], p[1]) + val[1] * gy.eval(p[0], p[1])))
                    .sum(),
            );
        }
        if let Some(cs) = &self.curl_space {
            let bubble = reference_bubble();
            for psi in &cs.polys {
                let c = curl(&(&bubble * psi));
                out.push(
                    self.tri_rule
                        .points
                        .iter()
                        .zip(&self.tri_rule.weights)
                        .zip(&vals)
                        .map(|((p, w), val)| w * (val[0] * c[0].eval(p[0], p[1]) + val[1] * c[1].eval(p[0], p[1])))
                        .sum(),
                );
            }
        }
        out
    }

    /// Applies the physical DOF functionals on the triangle `map(K̂)` to a
    /// physical field. Edge normals are the outward normals of the triangle.
    pub fn physical_dofs(&self, map: &AffineMap, v: impl Fn(Vec2) -> Vec2, edge_rule: &EdgeRule, tri_rule: &TriangleRule) -> Vec<f64> {
        let k = self.degree;
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..3 {
            let (ah, bh) = reference_edge(i);
            let a = map.to_physical(ah);
            let b = map.to_physical(bh);
            let t = b - a;
            let len = t.norm();
            let mut n = Vec2::new(t.y, -t.x) / len;
            if map.det < 0.0 {
                n = -n;
            }
            let vals: Vec<f64> = edge_rule
                .points
                .iter()
                .map(|&tq| v((a + b) * 0.5 + t * (0.5 * tq)).dot(&n))
                .collect();
            for j in 0..=k {
                out.push(
                    edge_rule
                        .points
                        .iter()
                        .zip(&edge_rule.weights)
                        .zip(&vals)
                        .map(|((&tq, &wq), val)| wq * 0.5 * len * val * legendre(j, tq).0)
                        .sum(),
                );
            }
        }
        let jw = map.det.abs();
        let vals: Vec<Vec2> = tri_rule.points.iter().map(|&p| v(map.to_physical(p))).collect();
        for psi in &self.grad_space.polys[1..] {
            let (gx, gy) = (psi.dx(), psi.dy());
            out.push(
                tri_rule
                    .points
                    .iter()
                    .zip(&tri_rule.weights)
                    .zip(&vals)
                    .map(|((p, w), val)| w * jw * val.dot(&map.gradient([gx.eval(p[0], p[1]), gy.eval(p[0], p[1])])))
                    .sum(),
            );
        }
        if let Some(cs) = &self.curl_space {
            let bubble = reference_bubble();
            for psi in &cs.polys {
                let phi = &bubble * psi;
                let (gx, gy) = (phi.dx(), phi.dy());
                out.push(
                    tri_rule
                        .points
                        .iter()
                        .zip(&tri_rule.weights)
                        .zip(&vals)
                        .map(|((p, w), val)| {
                            let g = map.gradient([gx.eval(p[0], p[1]), gy.eval(p[0], p[1])]);
                            w * jw * (val.x * g.y - val.y * g.x)
                        })
                        .sum(),
                );
            }
        }
        out
    }

    /// Reference vector field `Σ c_i φ̂_i`.
    pub fn combine(&self, coeffs: &[f64]) -> VecPoly {
        let k = self.degree;
        let mut v = [Poly2::zero(k), Poly2::zero(k)];
        for (c, phi) in coeffs.iter().zip(&self.basis) {
            if *c != 0.0 {
                v[0] = &v[0] + &(&phi[0] * *c);
                v[1] = &v[1] + &(&phi[1] * *c);
            }
        }
        v
    }
}

/// Discontinuous `P_{k-1}` pressure element.
#[derive(Clone, Debug)]
pub struct PressureElement {
    pub basis: TriangleBasis,
}

impl PressureElement {
    pub fn new(velocity_degree: usize) -> Result<Self> {
        if velocity_degree == 0 {
            return Err(Error::Config("pressure element requires k >= 1".into()));
        }
        Ok(Self {
            basis: TriangleBasis::new(velocity_degree - 1),
        })
    }

    /// `k(k+1)/2`.
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn eval(&self, coeffs: &[f64], xh: [f64; 2]) -> f64 {
        coeffs.iter().zip(&self.basis.polys).map(|(c, p)| c * p.eval(xh[0], xh[1])).sum()
    }
}

/// Physical field of a local BDM coefficient vector on one triangle.
#[derive(Clone, Debug)]
pub struct LocalField {
    pub map: AffineMap,
    pub reference: VecPoly,
}

/// Highest derivative order served by [`LocalField::derivatives`].
pub const MAX_DERIVATIVE_ORDER: usize = 8;

impl LocalField {
    pub fn new(element: &BdmElement, map: AffineMap, coeffs: &[f64]) -> Self {
        Self {
            map,
            reference: element.combine(coeffs),
        }
    }

    /// Value at a physical point (the polynomial extends outside the triangle).
    pub fn eval(&self, x: Vec2) -> Vec2 {
        let xh = self.map.to_reference(x);
        self.map.piola(vec_poly_eval(&self.reference, xh[0], xh[1]))
    }

    pub fn div(&self, x: Vec2) -> f64 {
        let xh = self.map.to_reference(x);
        vec_poly_div(&self.reference).eval(xh[0], xh[1]) / self.map.det
    }

    /// `∂_d^j v(x)` for a physical direction `d`.
    pub fn directional_derivative(&self, x: Vec2, d: Vec2, order: usize) -> Vec2 {
        let dh = self.map.reference_direction(d);
        let mut p = self.reference.clone();
        for _ in 0..order {
            p = [p[0].directional(dh), p[1].directional(dh)];
        }
        let xh = self.map.to_reference(x);
        self.map.piola(vec_poly_eval(&p, xh[0], xh[1]))
    }

    /// All physical partials up to `max_order`: `out[n][b] = ∂x^(n-b) ∂y^b v(x)`.
    pub fn derivatives(&self, x: Vec2, max_order: usize) -> Result<Vec<Vec<Vec2>>> {
        if max_order > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                requested: max_order,
                available: MAX_DERIVATIVE_ORDER,
            });
        }
        let ex = self.map.reference_direction(Vec2::new(1.0, 0.0));
        let ey = self.map.reference_direction(Vec2::new(0.0, 1.0));
        let xh = self.map.to_reference(x);
        let mut out = Vec::with_capacity(max_order + 1);
        // rows[b] holds ∂x^(n-b) ∂y^b of the reference field at order n
        let mut rows: Vec<VecPoly> = vec![self.reference.clone()];
        for n in 0..=max_order {
            out.push(
                rows.iter()
                    .map(|p| self.map.piola(vec_poly_eval(p, xh[0], xh[1])))
                    .collect(),
            );
            if n == max_order {
                break;
            }
            let mut next: Vec<VecPoly> = rows
                .iter()
                .map(|p| [p[0].directional(ex), p[1].directional(ex)])
                .collect();
            let last = rows.last().expect("nonempty");
            next.push([last[0].directional(ey), last[1].directional(ey)]);
            rows = next;
        }
        Ok(out)
    }
}

/// Local BDM interpolant `I_K v`: coefficients in the local basis mapped to
/// the physical triangle. Reproduces every field of the local BDM space.
pub fn interpolate_bdm(element: &BdmElement, map: &AffineMap, v: impl Fn(Vec2) -> Vec2, quad_degree: usize) -> Vec<f64> {
    let edge_rule = edge_quadrature(quad_degree.div_ceil(2) + 1);
    let tri_rule = triangle_quadrature(quad_degree);
    let n = element.dim();
    let rhs = element.physical_dofs(map, &v, &edge_rule, &tri_rule);
    // edge and gradient functionals are Piola-invariant; only the curl-bubble
    // rows couple, so solve the small local system
    let mut dmat = DMatrix::zeros(n, n);
    for j in 0..n {
        let phi = &element.basis[j];
        let col = element.physical_dofs(
            map,
            |x| {
                let xh = map.to_reference(x);
                map.piola(vec_poly_eval(phi, xh[0], xh[1]))
            },
            &edge_rule,
            &tri_rule,
        );
        for i in 0..n {
            dmat[(i, j)] = col[i];
        }
    }
    let sol = dmat
        .lu()
        .solve(&DVector::from_vec(rhs))
        .expect("physical DOF matrix of a nondegenerate triangle is invertible");
    sol.iter().copied().collect()
}

/// L²(K) projection onto `P_{k-1}(K)`, in the mapped orthonormal reference basis.
pub fn project_pressure(element: &PressureElement, map: &AffineMap, q: impl Fn(Vec2) -> f64, rule: &TriangleRule) -> Vec<f64> {
    // the mapped basis has mass matrix |det J| I
    let vals: Vec<f64> = rule.points.iter().map(|&p| q(map.to_physical(p))).collect();
    element
        .basis
        .polys
        .iter()
        .map(|psi| {
            rule.points
                .iter()
                .zip(&rule.weights)
                .zip(&vals)
                .map(|((p, w), v)| w * v * psi.eval(p[0], p[1]))
                .sum()
        })
        .collect()
}

/// Number of pressure unknowns per triangle for velocity degree `k`.
pub fn pressure_dim(k: usize) -> usize {
    dim_pk(k - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_triangle(rng: &mut ChaCha8Rng) -> AffineMap {
        loop {
            let v = [0, 1, 2].map(|_| Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            if let Ok(m) = AffineMap::from_vertices(v) {
                if m.det > 0.1 {
                    return m;
                }
            }
        }
    }

    #[test]
    fn orthonormal_triangle_basis() {
        for k in 0..=5 {
            let b = TriangleBasis::new(k);
            assert_eq!(b.dim(), (k + 1) * (k + 2) / 2);
            let g = b.gram(&triangle_quadrature(2 * k));
            let err = (g - DMatrix::identity(b.dim(), b.dim())).abs().max();
            // monomial evaluation cancels more at higher degree
            let tol = if k <= 3 { 1e-12 } else { 1e-10 };
            assert!(err < tol, "k={k} err={err:e}");
        }
    }

    #[test]
    fn legendre_edge_basis_is_orthogonal() {
        let eb = EdgeBasis { degree: 4 };
        let r = edge_quadrature(6);
        for i in 0..eb.dim() {
            for j in 0..eb.dim() {
                let s: f64 = r.points.iter().zip(&r.weights).map(|(t, w)| w * eb.eval(i, *t) * eb.eval(j, *t)).sum();
                let expect = if i == j { 2.0 / (2 * i + 1) as f64 } else { 0.0 };
                assert!((s - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bdm_dimensions_and_duality() {
        for (k, dim) in [(1, 6), (2, 12), (3, 20)] {
            let e = BdmElement::new(k).unwrap();
            assert_eq!(e.dim(), dim);
            assert_eq!(e.basis.len(), dim);
            assert_eq!(3 * (k + 1) + e.n_interior_dofs(), dim);
            for (j, phi) in e.basis.iter().enumerate() {
                let col = e.reference_dofs(|xh| vec_poly_eval(phi, xh[0], xh[1]));
                for (i, v) in col.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-11, "k={k} i={i} j={j} v={v}");
                }
            }
        }
        let e1 = BdmElement::new(1).unwrap();
        assert_eq!(e1.n_interior_dofs(), 0);
    }

    #[test]
    fn k_zero_rejected() {
        assert!(BdmElement::new(0).is_err());
    }

    #[test]
    fn identity_piola_is_identity() {
        let m = AffineMap::from_vertices([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let f = piola_map(&m, |xh| [xh[0] * xh[1], 2.0 - xh[0]]);
        let v = f(Vec2::new(0.3, 0.2));
        assert_eq!(v, Vec2::new(0.06, 1.7));
        let back = inverse_piola_map(&m, |x| Vec2::new(x.y, x.x));
        assert_eq!(back([0.25, 0.5]), [0.5, 0.25]);
    }

    #[test]
    fn piola_divergence_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = BdmElement::new(2).unwrap();
        for _ in 0..10 {
            let map = random_triangle(&mut rng);
            let coeffs: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let field = LocalField::new(&e, map, &coeffs);
            let xh = [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)];
            let x = map.to_physical(xh);
            let div_ref = vec_poly_div(&field.reference).eval(xh[0], xh[1]);
            assert!((field.div(x) * map.det - div_ref).abs() < 1e-12);
        }
    }

    #[test]
    fn piola_preserves_edge_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = BdmElement::new(3).unwrap();
        let map = random_triangle(&mut rng);
        let coeffs: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let field = LocalField::new(&e, map, &coeffs);
        let phys = e.physical_dofs(&map, |x| field.eval(x), &edge_quadrature(6), &triangle_quadrature(8));
        let refd = e.reference_dofs(|xh| vec_poly_eval(&field.reference, xh[0], xh[1]));
        for i in 0..3 * (e.degree + 1) {
            assert!((phys[i] - refd[i]).abs() < 1e-12, "dof {i}");
            assert!((phys[i] - coeffs[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolation_reproduces_constants_and_pk() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=3 {
            let e = BdmElement::new(k).unwrap();
            let map = random_triangle(&mut rng);
            let c = interpolate_bdm(&e, &map, |_| Vec2::new(1.0, 2.0), 2 * k + 2);
            let f = LocalField::new(&e, map, &c);
            for _ in 0..10 {
                let x = map.to_physical([rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)]);
                assert!((f.eval(x) - Vec2::new(1.0, 2.0)).norm() < 1e-12);
            }
            // random P_k^2 field given in physical coordinates
            let terms: Vec<(usize, usize, f64)> = exponents(k).map(|(a, b)| (a, b, rng.random_range(-1.0..1.0))).collect();
            let terms2: Vec<(usize, usize, f64)> = exponents(k).map(|(a, b)| (a, b, rng.random_range(-1.0..1.0))).collect();
            let (p, q) = (Poly2::from_terms(&terms), Poly2::from_terms(&terms2));
            let v = |x: Vec2| Vec2::new(p.eval(x.x, x.y), q.eval(x.x, x.y));
            let c = interpolate_bdm(&e, &map, v, 2 * k + 2);
            let f = LocalField::new(&e, map, &c);
            for _ in 0..10 {
                let x = map.to_physical([rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)]);
                assert!((f.eval(x) - v(x)).norm() < 1e-11, "k={k}");
            }
        }
    }

    #[test]
    fn derivative_tables_match_hand_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = BdmElement::new(2).unwrap();
        let map = random_triangle(&mut rng);
        // (x^2, 0) interpolated exactly
        let c = interpolate_bdm(&e, &map, |x| Vec2::new(x.x * x.x, 0.0), 6);
        let f = LocalField::new(&e, map, &c);
        let x = map.to_physical([0.2, 0.3]);
        let d = f.derivatives(x, 2).unwrap();
        assert!((d[2][0].x - 2.0).abs() < 1e-10);
        assert!(d[2][1].x.abs() < 1e-10 && d[2][2].x.abs() < 1e-10);

        let coeffs: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = LocalField::new(&e, map, &coeffs);
        let d = f.derivatives(x, 1).unwrap();
        let hstep = 1e-5;
        let fdx = (f.eval(x + Vec2::new(hstep, 0.0)) - f.eval(x - Vec2::new(hstep, 0.0))) / (2.0 * hstep);
        let fdy = (f.eval(x + Vec2::new(0.0, hstep)) - f.eval(x - Vec2::new(0.0, hstep))) / (2.0 * hstep);
        assert!((fdx - d[1][0]).norm() <= 1e-6 * d[1][0].norm().max(1.0));
        assert!((fdy - d[1][1]).norm() <= 1e-6 * d[1][1].norm().max(1.0));
        assert!(f.derivatives(x, MAX_DERIVATIVE_ORDER + 1).is_err());
    }

    #[test]
    fn constant_field_has_vanishing_derivatives() {
        let e = BdmElement::new(3).unwrap();
        let map = AffineMap::from_vertices([Vec2::new(0.1, 0.0), Vec2::new(0.5, 0.1), Vec2::new(0.2, 0.4)]).unwrap();
        let c = interpolate_bdm(&e, &map, |_| Vec2::new(-0.5, 3.0), 8);
        let f = LocalField::new(&e, map, &c);
        let d = f.derivatives(Vec2::new(0.25, 0.15), 3).unwrap();
        for row in &d[1..] {
            for v in row {
                assert!(v.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn pressure_projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 1..=3 {
            let pe = PressureElement::new(k).unwrap();
            assert_eq!(pe.dim(), k * (k + 1) / 2);
            let map = random_triangle(&mut rng);
            let rule = triangle_quadrature(2 * k + 4);
            let terms: Vec<(usize, usize, f64)> = exponents(k - 1).map(|(a, b)| (a, b, rng.random_range(-1.0..1.0))).collect();
            let p = Poly2::from_terms(&terms);
            let c = project_pressure(&pe, &map, |x| p.eval(x.x, x.y), &rule);
            for _ in 0..5 {
                let xh = [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)];
                let x = map.to_physical(xh);
                assert!((pe.eval(&c, xh) - p.eval(x.x, x.y)).abs() < 1e-12);
            }
            let q = |x: Vec2| (x.x + x.y).sin();
            let c = project_pressure(&pe, &map, q, &rule);
            let mean_err: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(xh, w)| w * map.det.abs() * (q(map.to_physical(*xh)) - pe.eval(&c, *xh)))
                .sum();
            assert!(mean_err.abs() < 1e-12 * map.area());
        }
    }

    #[test]
    fn pressure_projection_error_rate() {
        // relative error ‖q − Πq‖_K / ‖q‖_K drops by about 2^k when K is halved
        for k in 1..=3 {
            let pe = PressureElement::new(k).unwrap();
            let rule = triangle_quadrature(2 * k + 6);
            let q = |x: Vec2| (x.x + x.y).sin() + 1.5;
            let rel_err = |s: f64| {
                let map = AffineMap::from_vertices([Vec2::new(0.1, 0.2), Vec2::new(0.1 + s, 0.2), Vec2::new(0.1 + 0.3 * s, 0.2 + s)]).unwrap();
                let c = project_pressure(&pe, &map, q, &rule);
                let (mut e2, mut n2) = (0.0, 0.0);
                for (xh, w) in rule.points.iter().zip(&rule.weights) {
                    let qv = q(map.to_physical(*xh));
                    e2 += w * (qv - pe.eval(&c, *xh)).powi(2);
                    n2 += w * qv * qv;
                }
                (e2 / n2).sqrt()
            };
            let rate = (rel_err(0.2) / rel_err(0.1)).log2();
            assert!((rate - k as f64).abs() < 0.25, "k={k} rate={rate}");
        }
    }
}
