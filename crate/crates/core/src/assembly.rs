//! Global DOF numbering, assembly of the forms
//!
//! ```text
//! a_h(w, v) = (w, v) + (div w, div v) + Σ_e h_K^{-1} ⟨T^m w·ñ, T^m v·ñ⟩_e
//! b_h1(v, q) = -(div v, q) + Σ_e ⟨v·n_h, q⟩_e
//! b_h0(v, q) = -(div v, q)
//! l_h(v)     = (f, div v) + Σ_e h_K^{-1} ⟨g̃_N, T^m v·ñ⟩_e
//! ```
//!
//! and of the saddle-point system
//!
//! ```text
//! a_h(u, v) + b_h1(v, p)            = l_h(v)
//! b_h0(u, q) + Σ_e ⟨u·n_h, q̄⟩_e + λ∫q = -(f - f̄, q)
//! ∫ p                              = 0
//! ```
//!
//! where `q̄` and `f̄` are means over the mesh domain and `λ` is the
//! multiplier pinning the pressure constant.

use crate::correction::{basis_normal_traces, boundary_trace_geometry, pullback_neumann, EdgeTraceGeometry, TaylorConfig};
use crate::element::{interpolate_bdm, project_pressure, AffineMap, BdmElement, LocalField, PressureElement};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Vec2};
use crate::mesh::Mesh;
use crate::poly::vec_poly_eval;
use crate::quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, TriangleRule};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Global numbering: edge moments first (`k+1` per edge, edge-major), then
/// interior velocity DOFs per triangle, and pressure DOFs per triangle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    pub k: usize,
    pub n_edges: usize,
    pub n_triangles: usize,
    pub edge_dofs: usize,
    pub interior_dofs: usize,
    pub pressure_dofs: usize,
    pub n_u: usize,
    pub n_p: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, velocity: &BdmElement, pressure: &PressureElement) -> Self {
        let edge_dofs = velocity.edge_dofs_per_edge();
        let interior_dofs = velocity.n_interior_dofs();
        let n_edges = mesh.edges.len();
        let n_triangles = mesh.triangles.len();
        Self {
            k: velocity.degree,
            n_edges,
            n_triangles,
            edge_dofs,
            interior_dofs,
            pressure_dofs: pressure.dim(),
            n_u: edge_dofs * n_edges + interior_dofs * n_triangles,
            n_p: pressure.dim() * n_triangles,
        }
    }

    pub fn edge_dof(&self, edge: usize, j: usize) -> usize {
        edge * self.edge_dofs + j
    }

    pub fn interior_dof(&self, t: usize, r: usize) -> usize {
        self.edge_dofs * self.n_edges + t * self.interior_dofs + r
    }

    pub fn pressure_dof(&self, t: usize, a: usize) -> usize {
        t * self.pressure_dofs + a
    }

    /// Global index and sign of each local velocity DOF of triangle `t`.
    ///
    /// The global edge functional uses the global edge normal and the
    /// parameter running from the lower to the higher vertex index, so the
    /// local moment `j` differs by the normal sign times `(-1)^j` when the
    /// local traversal is reversed.
    pub fn velocity_local_to_global(&self, mesh: &Mesh, t: usize) -> Vec<(usize, f64)> {
        let tri = mesh.triangles[t];
        let mut out = Vec::with_capacity(3 * self.edge_dofs + self.interior_dofs);
        for i in 0..3 {
            let e = mesh.triangle_edges[t][i];
            let sigma = mesh.edge_sign(t, i);
            let flipped = tri[(i + 1) % 3] > tri[(i + 2) % 3];
            for j in 0..self.edge_dofs {
                let s = if flipped && j % 2 == 1 { -sigma } else { sigma };
                out.push((self.edge_dof(e, j), s));
            }
        }
        for r in 0..self.interior_dofs {
            out.push((self.interior_dof(t, r), 1.0));
        }
        out
    }
}

/// Everything needed to assemble on one mesh at one polynomial degree.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub domain: Domain,
    pub mesh: Mesh,
    pub k: usize,
    pub velocity: BdmElement,
    pub pressure: PressureElement,
    pub dofs: DofMap,
    pub maps: Vec<AffineMap>,
    pub local_dofs: Vec<Vec<(usize, f64)>>,
    /// Trace geometry of every boundary edge (mesh.boundary_edges order).
    pub boundary: Vec<EdgeTraceGeometry>,
    /// Exact for the polynomial mass and div–div integrands (degree 2k+2).
    pub stiffness_rule: TriangleRule,
    /// Used for loads and error integrals (degree 2k+4).
    pub accurate_rule: TriangleRule,
    /// Boundary-edge rule (exact to degree 2k+5).
    pub edge_rule: EdgeRule,
}

impl Discretization {
    pub fn new(domain: Domain, mesh: Mesh, k: usize) -> Result<Self> {
        let velocity = BdmElement::new(k)?;
        let pressure = PressureElement::new(k)?;
        let dofs = DofMap::new(&mesh, &velocity, &pressure);
        let maps = (0..mesh.triangles.len())
            .map(|t| {
                AffineMap::from_vertices(mesh.triangles[t].map(|v| mesh.vertices[v])).map_err(|e| match e {
                    Error::DegenerateTriangle(_, det) => Error::DegenerateTriangle(t, det),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let local_dofs = (0..mesh.triangles.len())
            .map(|t| dofs.velocity_local_to_global(&mesh, t))
            .collect();
        let edge_rule = edge_quadrature(k + 3);
        let boundary = boundary_trace_geometry(&mesh, &domain, &edge_rule)?;
        Ok(Self {
            domain,
            mesh,
            k,
            velocity,
            pressure,
            dofs,
            maps,
            local_dofs,
            boundary,
            stiffness_rule: triangle_quadrature(2 * k + 2),
            accurate_rule: triangle_quadrature(2 * k + 4),
            edge_rule,
        })
    }

    /// `|Ω_h|`.
    pub fn area(&self) -> f64 {
        self.maps.iter().map(|m| m.area()).sum()
    }

    /// Local coefficients of a global velocity vector on triangle `t`.
    pub fn local_velocity(&self, t: usize, u: &[f64]) -> Vec<f64> {
        self.local_dofs[t].iter().map(|&(g, s)| s * u[g]).collect()
    }

    pub fn velocity_field(&self, t: usize, u: &[f64]) -> LocalField {
        LocalField::new(&self.velocity, self.maps[t], &self.local_velocity(t, u))
    }

    pub fn local_pressure<'a>(&self, t: usize, p: &'a [f64]) -> &'a [f64] {
        let start = self.dofs.pressure_dof(t, 0);
        &p[start..start + self.dofs.pressure_dofs]
    }

    /// Global velocity DOFs carried by boundary edges.
    pub fn boundary_velocity_dofs(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .mesh
            .boundary_edges
            .iter()
            .flat_map(|be| (0..self.dofs.edge_dofs).map(move |j| be.edge * self.dofs.edge_dofs + j))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Reference basis values at the nodes of a triangle rule.
struct ReferenceTables {
    values: Vec<Vec<[f64; 2]>>,
    divs: Vec<Vec<f64>>,
    pressure: Vec<Vec<f64>>,
}

impl ReferenceTables {
    fn new(velocity: &BdmElement, pressure: &PressureElement, rule: &TriangleRule) -> Self {
        let values = rule
            .points
            .iter()
            .map(|p| velocity.basis.iter().map(|phi| vec_poly_eval(phi, p[0], p[1])).collect())
            .collect();
        let divs = rule
            .points
            .iter()
            .map(|p| velocity.basis_div.iter().map(|d| d.eval(p[0], p[1])).collect())
            .collect();
        let pressure = rule
            .points
            .iter()
            .map(|p| pressure.basis.polys.iter().map(|q| q.eval(p[0], p[1])).collect())
            .collect();
        Self { values, divs, pressure }
    }
}

/// `(T^m φ_i · ñ)` at boundary nodes with orientation signs applied:
/// `traces[b][i][q]` for boundary edge `b`, local DOF `i`, node `q`.
fn signed_boundary_traces(disc: &Discretization, config: &TaylorConfig) -> Vec<Vec<Vec<f64>>> {
    disc.boundary
        .iter()
        .map(|g| {
            let raw = basis_normal_traces(&disc.velocity, &disc.maps[g.owner], g, config);
            raw.into_iter()
                .zip(&disc.local_dofs[g.owner])
                .map(|(row, &(_, s))| row.into_iter().map(|v| s * v).collect())
                .collect()
        })
        .collect()
}

/// Velocity block of `a_h`. `penalty = None` drops the boundary term.
pub fn assemble_a(disc: &Discretization, penalty: Option<&TaylorConfig>) -> CsrMatrix {
    let n = disc.velocity.dim();
    let rule = &disc.stiffness_rule;
    let tables = ReferenceTables::new(&disc.velocity, &disc.pressure, rule);
    let mut builder = TripletBuilder::with_capacity(disc.dofs.n_u, disc.dofs.n_u, disc.maps.len() * n * n);
    let mut local = vec![0.0; n * n];
    let mut mapped = vec![Vec2::zeros(); n];
    for (t, map) in disc.maps.iter().enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        let inv_abs_det = 1.0 / map.det.abs();
        for (q, w) in rule.weights.iter().enumerate() {
            for (i, m) in mapped.iter_mut().enumerate() {
                let v = tables.values[q][i];
                *m = map.jac * Vec2::new(v[0], v[1]);
            }
            let divs = &tables.divs[q];
            let wq = w * inv_abs_det;
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += wq * (mapped[i].dot(&mapped[j]) + divs[i] * divs[j]);
                }
            }
        }
        let l2g = &disc.local_dofs[t];
        for i in 0..n {
            for j in 0..n {
                builder.add(l2g[i].0, l2g[j].0, l2g[i].1 * l2g[j].1 * local[i * n + j]);
            }
        }
    }
    if let Some(config) = penalty {
        let traces = signed_boundary_traces(disc, config);
        for (g, tr) in disc.boundary.iter().zip(&traces) {
            let l2g = &disc.local_dofs[g.owner];
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = (0..g.len()).map(|q| g.weights[q] / g.h_k * tr[i][q] * tr[j][q]).sum();
                    if v != 0.0 {
                        builder.add(l2g[i].0, l2g[j].0, v);
                    }
                }
            }
        }
    }
    builder.build()
}

/// Divergence blocks `(B1, B0)` (pressure rows, velocity columns).
pub fn assemble_b(disc: &Discretization) -> (CsrMatrix, CsrMatrix) {
    let n = disc.velocity.dim();
    let np = disc.dofs.pressure_dofs;
    let rule = &disc.stiffness_rule;
    let tables = ReferenceTables::new(&disc.velocity, &disc.pressure, rule);
    let mut b0 = TripletBuilder::with_capacity(disc.dofs.n_p, disc.dofs.n_u, disc.maps.len() * n * np);
    for (t, map) in disc.maps.iter().enumerate() {
        let sign = map.det.signum();
        let l2g = &disc.local_dofs[t];
        for a in 0..np {
            let row = disc.dofs.pressure_dof(t, a);
            for i in 0..n {
                let v: f64 = rule
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * tables.divs[q][i] * tables.pressure[q][a])
                    .sum();
                b0.add(row, l2g[i].0, -sign * l2g[i].1 * v);
            }
        }
    }
    let b0 = b0.build();
    let mut extra = TripletBuilder::new(disc.dofs.n_p, disc.dofs.n_u);
    for g in &disc.boundary {
        let map = &disc.maps[g.owner];
        let l2g = &disc.local_dofs[g.owner];
        let normal_vals: Vec<Vec<f64>> = disc
            .velocity
            .basis
            .iter()
            .map(|phi| {
                g.nodes
                    .iter()
                    .map(|x| {
                        let xh = map.to_reference(*x);
                        map.piola(vec_poly_eval(phi, xh[0], xh[1])).dot(&g.n_h)
                    })
                    .collect()
            })
            .collect();
        for a in 0..np {
            let psi = &disc.pressure.basis.polys[a];
            let qv: Vec<f64> = g
                .nodes
                .iter()
                .map(|x| {
                    let xh = map.to_reference(*x);
                    psi.eval(xh[0], xh[1])
                })
                .collect();
            let row = disc.dofs.pressure_dof(g.owner, a);
            for i in 0..n {
                let v: f64 = (0..g.len()).map(|q| g.weights[q] * normal_vals[i][q] * qv[q]).sum();
                if v != 0.0 {
                    extra.add(row, l2g[i].0, l2g[i].1 * v);
                }
            }
        }
    }
    let extra = extra.build();
    let mut b1 = TripletBuilder::with_capacity(disc.dofs.n_p, disc.dofs.n_u, b0.nnz() + extra.nnz());
    for (i, j, v) in b0.triplets().chain(extra.triplets()) {
        b1.add(i, j, v);
    }
    (b1.build(), b0)
}

/// Load vectors and the mean-value data of the system.
#[derive(Clone, Debug)]
pub struct RhsBlocks {
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// `(1/|Ω_h|) ∫_{Ω_h} f`.
    pub f_mean: f64,
    /// `max |g̃_N|` over boundary nodes.
    pub max_abs_neumann: f64,
}

/// `l_h` and the mean-corrected pressure load. `penalty = None` drops the
/// boundary term of `l_h`.
pub fn assemble_rhs(
    disc: &Discretization,
    f: &dyn Fn(Vec2) -> f64,
    g_n: &dyn Fn(Vec2, Vec2) -> f64,
    penalty: Option<&TaylorConfig>,
) -> RhsBlocks {
    let n = disc.velocity.dim();
    let np = disc.dofs.pressure_dofs;
    let rule = &disc.accurate_rule;
    let tables = ReferenceTables::new(&disc.velocity, &disc.pressure, rule);
    let fvals: Vec<Vec<f64>> = disc
        .maps
        .iter()
        .map(|m| rule.points.iter().map(|&p| f(m.to_physical(p))).collect())
        .collect();
    let area = disc.area();
    let f_mean = disc
        .maps
        .iter()
        .zip(&fvals)
        .map(|(m, fv)| m.det.abs() * rule.weights.iter().zip(fv).map(|(w, v)| w * v).sum::<f64>())
        .sum::<f64>()
        / area;
    let mut rhs_u = vec![0.0; disc.dofs.n_u];
    let mut rhs_p = vec![0.0; disc.dofs.n_p];
    for (t, map) in disc.maps.iter().enumerate() {
        let sign = map.det.signum();
        let l2g = &disc.local_dofs[t];
        for i in 0..n {
            let v: f64 = rule
                .weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * fvals[t][q] * tables.divs[q][i])
                .sum();
            rhs_u[l2g[i].0] += sign * l2g[i].1 * v;
        }
        for a in 0..np {
            let v: f64 = rule
                .weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * (fvals[t][q] - f_mean) * tables.pressure[q][a])
                .sum();
            rhs_p[disc.dofs.pressure_dof(t, a)] -= map.det.abs() * v;
        }
    }
    let mut max_abs_neumann: f64 = 0.0;
    let gvals: Vec<Vec<f64>> = disc.boundary.iter().map(|g| pullback_neumann(g_n, g)).collect();
    for gv in &gvals {
        for v in gv {
            max_abs_neumann = max_abs_neumann.max(v.abs());
        }
    }
    if let Some(config) = penalty {
        let traces = signed_boundary_traces(disc, config);
        for ((g, tr), gv) in disc.boundary.iter().zip(&traces).zip(&gvals) {
            let l2g = &disc.local_dofs[g.owner];
            for i in 0..n {
                let v: f64 = (0..g.len()).map(|q| g.weights[q] / g.h_k * gv[q] * tr[i][q]).sum();
                rhs_u[l2g[i].0] += v;
            }
        }
    }
    RhsBlocks {
        rhs_u,
        rhs_p,
        f_mean,
        max_abs_neumann,
    }
}

/// `c_a = ∫_{Ω_h} φ_a^p`.
pub fn pressure_mean_vector(disc: &Discretization) -> Vec<f64> {
    let rule = &disc.stiffness_rule;
    let mut c = vec![0.0; disc.dofs.n_p];
    for (t, map) in disc.maps.iter().enumerate() {
        for (a, psi) in disc.pressure.basis.polys.iter().enumerate() {
            c[disc.dofs.pressure_dof(t, a)] = map.det.abs()
                * rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * psi.eval(p[0], p[1]))
                    .sum::<f64>();
        }
    }
    c
}

/// `g_i = Σ_e ∫_e φ_i·n_h ds`.
pub fn boundary_flux_vector(disc: &Discretization) -> Vec<f64> {
    let mut g = vec![0.0; disc.dofs.n_u];
    for tr in &disc.boundary {
        let map = &disc.maps[tr.owner];
        for (phi, &(gi, s)) in disc.velocity.basis.iter().zip(&disc.local_dofs[tr.owner]) {
            let v: f64 = tr
                .nodes
                .iter()
                .zip(&tr.weights)
                .map(|(x, w)| {
                    let xh = map.to_reference(*x);
                    w * map.piola(vec_poly_eval(phi, xh[0], xh[1])).dot(&tr.n_h)
                })
                .sum();
            g[gi] += s * v;
        }
    }
    g
}

/// Coefficients of the constant pressure 1.
pub fn constant_pressure(disc: &Discretization) -> Vec<f64> {
    project_pressure_global(disc, |_| 1.0)
}

/// All assembled pieces of the discrete problem.
#[derive(Clone, Debug)]
pub struct SaddleBlocks {
    pub a: CsrMatrix,
    pub b1: CsrMatrix,
    pub b0: CsrMatrix,
    pub rhs: RhsBlocks,
    pub mean_vector: Vec<f64>,
    pub boundary_flux: Vec<f64>,
    pub area: f64,
    pub boundary_dofs: Vec<usize>,
}

pub fn assemble_blocks(
    disc: &Discretization,
    f: &dyn Fn(Vec2) -> f64,
    g_n: &dyn Fn(Vec2, Vec2) -> f64,
    penalty: Option<&TaylorConfig>,
) -> SaddleBlocks {
    let a = assemble_a(disc, penalty);
    let (b1, b0) = assemble_b(disc);
    SaddleBlocks {
        a,
        b1,
        b0,
        rhs: assemble_rhs(disc, f, g_n, penalty),
        mean_vector: pressure_mean_vector(disc),
        boundary_flux: boundary_flux_vector(disc),
        area: disc.area(),
        boundary_dofs: disc.boundary_velocity_dofs(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemMode {
    /// Taylor-corrected weak Neumann condition.
    Corrected,
    /// Zero normal moments imposed on the straight boundary (homogeneous data only).
    UncorrectedStrong,
}

/// Data beyond this size in `max |g_N|` rules out strong imposition.
pub const HOMOGENEOUS_TOL: f64 = 1e-12;

/// The square system
///
/// ```text
/// [ A            B1ᵀ  0 ] [u]   [rhs_u ]
/// [ B0 + c gᵀ/|Ω| 0   c ] [p] = [rhs_p ]
/// [ 0            cᵀ   0 ] [λ]   [target]
/// ```
///
/// with velocity restricted to the free DOFs in strong mode.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub mode: SystemMode,
    pub a: CsrMatrix,
    pub b1: CsrMatrix,
    pub b0: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    pub mean_vector: Vec<f64>,
    pub boundary_flux: Vec<f64>,
    pub area: f64,
    /// Right-hand side of the mean constraint `cᵀp = target`.
    pub mean_target: f64,
    /// Full velocity index of each system velocity unknown.
    pub free_velocity: Vec<usize>,
    pub n_u_full: usize,
}

pub fn build_saddle_system(blocks: SaddleBlocks, mode: SystemMode) -> Result<SaddleSystem> {
    let n_u_full = blocks.a.nrows;
    match mode {
        SystemMode::Corrected => Ok(SaddleSystem {
            mode,
            a: blocks.a,
            b1: blocks.b1,
            b0: blocks.b0,
            rhs_u: blocks.rhs.rhs_u,
            rhs_p: blocks.rhs.rhs_p,
            mean_vector: blocks.mean_vector,
            boundary_flux: blocks.boundary_flux,
            area: blocks.area,
            mean_target: 0.0,
            free_velocity: (0..n_u_full).collect(),
            n_u_full,
        }),
        SystemMode::UncorrectedStrong => {
            if blocks.rhs.max_abs_neumann > HOMOGENEOUS_TOL {
                return Err(Error::NonhomogeneousStrongBoundary(blocks.rhs.max_abs_neumann));
            }
            let mut fixed = vec![false; n_u_full];
            for &d in &blocks.boundary_dofs {
                fixed[d] = true;
            }
            let free: Vec<usize> = (0..n_u_full).filter(|&i| !fixed[i]).collect();
            let prows: Vec<usize> = (0..blocks.b0.nrows).collect();
            Ok(SaddleSystem {
                mode,
                a: blocks.a.submatrix(&free, &free),
                b1: blocks.b1.submatrix(&prows, &free),
                b0: blocks.b0.submatrix(&prows, &free),
                rhs_u: free.iter().map(|&i| blocks.rhs.rhs_u[i]).collect(),
                rhs_p: blocks.rhs.rhs_p,
                mean_vector: blocks.mean_vector,
                boundary_flux: free.iter().map(|&i| blocks.boundary_flux[i]).collect(),
                area: blocks.area,
                mean_target: 0.0,
                free_velocity: free,
                n_u_full,
            })
        }
    }
}

impl SaddleSystem {
    pub fn n_u(&self) -> usize {
        self.free_velocity.len()
    }

    pub fn n_p(&self) -> usize {
        self.mean_vector.len()
    }

    /// Number of unknowns including the multiplier.
    pub fn dim(&self) -> usize {
        self.n_u() + self.n_p() + 1
    }

    /// Applies the system operator to `[u, p, λ]`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let (u, rest) = x.split_at(self.n_u());
        let (p, lambda) = rest.split_at(self.n_p());
        let lambda = lambda[0];
        let mut y = self.a.mul_vec(u);
        for (yi, v) in y.iter_mut().zip(self.b1.tr_mul_vec(p)) {
            *yi += v;
        }
        let flux: f64 = self.boundary_flux.iter().zip(u).map(|(g, v)| g * v).sum::<f64>() / self.area;
        let bp = self.b0.mul_vec(u);
        y.extend(
            bp.iter()
                .zip(&self.mean_vector)
                .map(|(b, c)| b + c * flux + c * lambda),
        );
        y.push(self.mean_vector.iter().zip(p).map(|(c, v)| c * v).sum());
        y
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut b = self.rhs_u.clone();
        b.extend_from_slice(&self.rhs_p);
        b.push(self.mean_target);
        b
    }

    /// Sparse form with one auxiliary unknown `s = gᵀu / |Ω_h|` so the rank-one
    /// boundary-mean coupling stays sparse. Unknown order: `[u, p, λ, s]`.
    pub fn augmented_triplets(&self) -> (usize, Vec<(usize, usize, f64)>, Vec<f64>) {
        let (nu, np) = (self.n_u(), self.n_p());
        let lam = nu + np;
        let s = lam + 1;
        let n = nu + np + 2;
        let mut t = Vec::with_capacity(self.a.nnz() + self.b1.nnz() + self.b0.nnz() + 4 * np + nu);
        t.extend(self.a.triplets());
        t.extend(self.b1.triplets().map(|(i, j, v)| (j, nu + i, v)));
        t.extend(self.b0.triplets().map(|(i, j, v)| (nu + i, j, v)));
        for (a, &c) in self.mean_vector.iter().enumerate() {
            if c != 0.0 {
                t.push((nu + a, lam, c));
                t.push((nu + a, s, c));
                t.push((lam, nu + a, c));
            }
        }
        for (j, &g) in self.boundary_flux.iter().enumerate() {
            if g != 0.0 {
                t.push((s, j, g));
            }
        }
        t.push((s, s, -self.area));
        let mut rhs = self.rhs();
        rhs.push(0.0);
        (n, t, rhs)
    }

    /// Full-length velocity vector from system velocity unknowns.
    pub fn expand_velocity(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_u_full];
        for (&i, &v) in self.free_velocity.iter().zip(u) {
            full[i] = v;
        }
        full
    }

    /// Coordinate dump of the augmented matrix and right-hand side.
    pub fn to_coordinate_text(&self) -> (String, String) {
        let (n, t, rhs) = self.augmented_triplets();
        let mut b = TripletBuilder::with_capacity(n, n, t.len());
        for (i, j, v) in t {
            b.add(i, j, v);
        }
        let m = b.build().to_coordinate_text();
        let r = rhs.iter().map(|v| format!("{v:.17e}\n")).collect();
        (m, r)
    }
}

/// Global BDM interpolant `I_h v`.
pub fn interpolate_velocity(disc: &Discretization, v: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
    let mut out = vec![0.0; disc.dofs.n_u];
    let deg = 2 * disc.k + 4;
    for (t, map) in disc.maps.iter().enumerate() {
        let local = interpolate_bdm(&disc.velocity, map, &v, deg);
        for (c, &(g, s)) in local.iter().zip(&disc.local_dofs[t]) {
            out[g] = s * c;
        }
    }
    out
}

/// Elementwise L² projection onto `Q_h`.
pub fn project_pressure_global(disc: &Discretization, q: impl Fn(Vec2) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; disc.dofs.n_p];
    for (t, map) in disc.maps.iter().enumerate() {
        let local = project_pressure(&disc.pressure, map, &q, &disc.accurate_rule);
        let start = disc.dofs.pressure_dof(t, 0);
        out[start..start + local.len()].copy_from_slice(&local);
    }
    out
}
