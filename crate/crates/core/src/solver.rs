//! Linear solve of the saddle-point system.
//!
//! The system matrix `M` has a dense border (the mean constraint and the
//! rank-one boundary-flux coupling), which ruins fill-reducing orderings. It
//! is split as `M = S + U Vᵀ`, where
//!
//! ```text
//! S = [ A   B1ᵀ   0 ]
//!     [ B0  e eᵀ  0 ]      e: unit vector of one pressure DOF
//!     [ 0   0     1 ]
//! ```
//!
//! is sparse and nonsingular and `U Vᵀ` has rank three, and solved with one
//! sparse LU of `S` and the Woodbury identity. If that fails, restarted GMRES
//! on the sparse augmented form ([`SaddleSystem::augmented_triplets`]) is
//! tried. Either way the residual is checked against `M` itself.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual accepted after the solve.
    pub residual_tol: f64,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Skip the direct solver.
    pub force_iterative: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            gmres_tol: 1e-12,
            gmres_restart: 200,
            gmres_max_iter: 20_000,
            force_iterative: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    SparseLu,
    Gmres,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    /// `‖B x − F‖₂ / ‖F‖₂` (absolute when `F = 0`).
    pub relative_residual: f64,
    pub iterations: usize,
    pub unknowns: usize,
    pub nonzeros: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Full-length velocity coefficients (fixed DOFs set to zero in strong mode).
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multiplier: f64,
    pub report: SolveReport,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative residual of `x` for the unaugmented system.
pub fn relative_residual(system: &SaddleSystem, x: &[f64]) -> f64 {
    let b = system.rhs();
    let r: Vec<f64> = system.apply(x).iter().zip(&b).map(|(y, b)| y - b).collect();
    let nb = norm(&b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Sparse LU factors of an `n × n` matrix given as triplets.
struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    fn new(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t).map_err(|e| Error::Solve(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Solve(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { n, lu })
    }

    fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        let mut b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
        self.lu.solve_in_place(b.as_mut());
        let x: Vec<Vec<f64>> = (0..rhs.len()).map(|j| (0..n).map(|i| b[(i, j)]).collect()).collect();
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Solve("sparse LU produced non-finite values".into()));
        }
        Ok(x)
    }
}

fn sparse_lu(n: usize, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(SparseLu::new(n, triplets)?.solve_many(&[rhs.to_vec()])?.remove(0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factorization of `M = S + U Vᵀ` (see the module docs).
struct BorderedLu {
    s: SparseLu,
    /// `S⁻¹ U`
    z: Vec<Vec<f64>>,
    v: [Vec<f64>; 3],
    capacitance: nalgebra::Matrix3<f64>,
}

impl BorderedLu {
    fn new(system: &SaddleSystem) -> Result<Self> {
        let (nu, np) = (system.n_u(), system.n_p());
        let n = system.dim();
        let lam = n - 1;
        // pin the pressure DOF carrying the largest mean weight
        let pin = nu + (0..np)
            .max_by(|&a, &b| system.mean_vector[a].abs().total_cmp(&system.mean_vector[b].abs()))
            .ok_or_else(|| Error::Solve("empty pressure space".into()))?;
        let mut t = Vec::with_capacity(system.a.nnz() + system.b1.nnz() + system.b0.nnz() + 2);
        t.extend(system.a.triplets());
        t.extend(system.b1.triplets().map(|(i, j, v)| (j, nu + i, v)));
        t.extend(system.b0.triplets().map(|(i, j, v)| (nu + i, j, v)));
        t.push((pin, pin, 1.0));
        t.push((lam, lam, 1.0));
        // M - S = c (g/|Ω| + f)ᵀ + f (c - f)ᵀ - e eᵀ with c, g, e, f embedded in R^n
        let mut c = vec![0.0; n];
        c[nu..nu + np].copy_from_slice(&system.mean_vector);
        let mut f = vec![0.0; n];
        f[lam] = 1.0;
        let mut e = vec![0.0; n];
        e[pin] = 1.0;
        let mut v0 = vec![0.0; n];
        for (vi, gi) in v0.iter_mut().zip(&system.boundary_flux) {
            *vi = gi / system.area;
        }
        v0[lam] = 1.0;
        let mut v1 = c.clone();
        v1[lam] = -1.0;
        let u = [c, f, e.iter().map(|x| -x).collect::<Vec<f64>>()];
        let v = [v0, v1, e];
        let s = SparseLu::new(n, &t)?;
        let z = s.solve_many(&u)?;
        let capacitance = nalgebra::Matrix3::from_fn(|i, j| dot(&v[i], &z[j]) + if i == j { 1.0 } else { 0.0 });
        Ok(Self { s, z, v, capacitance })
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let y = self.s.solve_many(&[b.to_vec()])?.remove(0);
        let w = nalgebra::Vector3::from_fn(|i, _| dot(&self.v[i], &y));
        let coef = self
            .capacitance
            .lu()
            .solve(&w)
            .ok_or_else(|| Error::Solve("singular capacitance matrix in bordered solve".into()))?;
        Ok((0..y.len())
            .map(|i| y[i] - coef[0] * self.z[0][i] - coef[1] * self.z[1][i] - coef[2] * self.z[2][i])
            .collect())
    }
}

/// Direct solve followed by iterative refinement until the residual stalls.
fn bordered_solve(system: &SaddleSystem) -> Result<Vec<f64>> {
    const REFINEMENT_STEPS: usize = 3;
    let lu = BorderedLu::new(system)?;
    let b = system.rhs();
    let mut x = lu.solve(&b)?;
    let mut res = relative_residual(system, &x);
    for _ in 0..REFINEMENT_STEPS {
        if res == 0.0 {
            break;
        }
        let r: Vec<f64> = b.iter().zip(system.apply(&x)).map(|(b, y)| b - y).collect();
        let dx = lu.solve(&r)?;
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let cand_res = relative_residual(system, &cand);
        if !(cand_res < res) {
            break;
        }
        x = cand;
        res = cand_res;
    }
    Ok(x)
}

/// Restarted GMRES without preconditioning. Returns the iterate and the
/// number of inner iterations.
pub fn gmres(a: &CsrMatrix, b: &[f64], tol: f64, restart: usize, max_iter: usize) -> (Vec<f64>, usize, bool) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let nb = norm(b).max(f64::MIN_POSITIVE);
    let mut iters = 0;
    while iters < max_iter {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let beta = norm(&r);
        if beta / nb <= tol {
            return (x, iters, true);
        }
        let m = restart.min(max_iter - iters);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let mut w = a.mul_vec(&v[j]);
            for (i, vi) in v.iter().enumerate() {
                let hij: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                h[i][j] = hij;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= hij * b);
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            iters += 1;
            if g[j + 1].abs() / nb <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&v) {
            x.iter_mut().zip(vi).for_each(|(a, b)| *a += yi * b);
        }
        if used == 0 {
            break;
        }
    }
    let ax = a.mul_vec(&x);
    let res = norm(&b.iter().zip(&ax).map(|(b, y)| b - y).collect::<Vec<_>>()) / nb;
    (x, iters, res <= tol)
}

/// Solves a general sparse square system given as `(row, col, value)` triplets
/// (duplicates summed). The report's residual refers to this system.
pub fn solve_triplets(n: usize, triplets: &[(usize, usize, f64)], rhs: &[f64], options: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let mut b = TripletBuilder::with_capacity(n, n, triplets.len());
    for &(i, j, v) in triplets {
        b.add(i, j, v);
    }
    let mat = b.build();
    let direct = if options.force_iterative {
        Err(Error::Solve("direct solver disabled".into()))
    } else {
        sparse_lu(n, triplets, rhs)
    };
    let (x, method, iterations) = match direct {
        Ok(x) => (x, SolveMethod::SparseLu, 0),
        Err(e) => {
            log::warn!("{e}; falling back to GMRES");
            let (x, it, converged) = gmres(&mat, rhs, options.gmres_tol, options.gmres_restart, options.gmres_max_iter);
            if !converged {
                return Err(Error::Solve(format!(
                    "GMRES stopped after {it} iterations without reaching {:e}",
                    options.gmres_tol
                )));
            }
            (x, SolveMethod::Gmres, it)
        }
    };
    let r: Vec<f64> = mat.mul_vec(&x).iter().zip(rhs).map(|(y, b)| y - b).collect();
    let nb = norm(rhs);
    let relative_residual = if nb > 0.0 { norm(&r) / nb } else { norm(&r) };
    Ok((
        x,
        SolveReport {
            method,
            relative_residual,
            iterations,
            unknowns: n,
            nonzeros: mat.nnz(),
        },
    ))
}

pub fn solve(system: &SaddleSystem, options: &SolverOptions) -> Result<Solution> {
    let direct = if options.force_iterative {
        Err(Error::Solve("direct solver disabled".into()))
    } else {
        bordered_solve(system)
    };
    let (x, method, iterations, nonzeros) = match direct.and_then(|x| {
        let r = relative_residual(system, &x);
        if r <= options.residual_tol {
            Ok(x)
        } else {
            Err(Error::Solve(format!("direct solve residual {r:e}")))
        }
    }) {
        Ok(x) => (x, SolveMethod::SparseLu, 0, system.a.nnz() + system.b1.nnz() + system.b0.nnz() + 2),
        Err(e) => {
            log::warn!("{e}; falling back to GMRES");
            let (n, triplets, rhs) = system.augmented_triplets();
            let mut b = TripletBuilder::with_capacity(n, n, triplets.len());
            for &(i, j, v) in &triplets {
                b.add(i, j, v);
            }
            let (x, it, _) = gmres(&b.build(), &rhs, options.gmres_tol, options.gmres_restart, options.gmres_max_iter);
            (x[..system.dim()].to_vec(), SolveMethod::Gmres, it, triplets.len())
        }
    };
    let relative_residual = relative_residual(system, &x);
    if !(relative_residual <= options.residual_tol) {
        return Err(Error::Solve(format!(
            "relative residual {relative_residual:e} exceeds {:e}",
            options.residual_tol
        )));
    }
    let (nu, np) = (system.n_u(), system.n_p());
    Ok(Solution {
        velocity: system.expand_velocity(&x[..nu]),
        pressure: x[nu..nu + np].to_vec(),
        multiplier: x[nu + np],
        report: SolveReport {
            method,
            relative_residual,
            iterations,
            unknowns: system.dim(),
            nonzeros,
        },
    })
}

/// Shifts pressure coefficients to zero mean over `Ω_h`, given the
/// coefficients `one` of the constant 1.
pub fn postprocess_pressure(system: &SaddleSystem, p: &[f64], one: &[f64]) -> Vec<f64> {
    let mean = pressure_mean(system, p);
    p.iter().zip(one).map(|(v, o)| v - mean * o).collect()
}

/// `(1/|Ω_h|) ∫ p_h`.
pub fn pressure_mean(system: &SaddleSystem, p: &[f64]) -> f64 {
    system.mean_vector.iter().zip(p).map(|(c, v)| c * v).sum::<f64>() / system.area
}
