//! Manufactured solutions, error norms and convergence orders.
//!
//! All cases solve `u + ∇p = 0`, `div u = f` with `u·n = g_N` on the
//! boundary. The formulas are globally smooth, so they double as their own
//! extensions off the physical domain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::{Discretization, SystemMode};
use crate::correction::{taylor_trace, taylor_trace_analytic, TaylorConfig};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Vec2};
use crate::poly::Poly2;

/// An exact solution together with its data.
pub trait ManufacturedCase: Send + Sync {
    fn name(&self) -> &str;

    /// The physical domain the case is posed on.
    fn domain(&self) -> Domain;

    fn u(&self, x: Vec2) -> Vec2;

    /// `∂x^a ∂y^b u(x)`.
    fn u_partial(&self, x: Vec2, a: usize, b: usize) -> Vec2;

    fn p(&self, x: Vec2) -> f64;

    /// `f = div u`.
    fn f(&self, x: Vec2) -> f64;

    /// `g_N = u·n` at a boundary point with outward normal `n`.
    fn g_n(&self, x: Vec2, n: Vec2) -> f64 {
        self.u(x).dot(&n)
    }

    /// `∂_d^order u(x)`.
    fn directional(&self, x: Vec2, d: Vec2, order: usize) -> Vec2 {
        let mut acc = Vec2::zeros();
        let mut binom = 1.0;
        for b in 0..=order {
            let a = order - b;
            acc += self.u_partial(x, a, b) * (binom * d.x.powi(a as i32) * d.y.powi(b as i32));
            binom = binom * (order - b) as f64 / (b + 1) as f64;
        }
        acc
    }
}

/// Polynomial case `u = -∇p` for a polynomial pressure.
#[derive(Clone, Debug)]
pub struct PolynomialCase {
    name: String,
    domain: Domain,
    pub pressure: Poly2,
    velocity: [Poly2; 2],
}

impl PolynomialCase {
    pub fn new(name: &str, domain: Domain, pressure: Poly2) -> Self {
        let velocity = [&pressure.dx() * -1.0, &pressure.dy() * -1.0];
        Self {
            name: name.to_string(),
            domain,
            pressure,
            velocity,
        }
    }
}

impl ManufacturedCase for PolynomialCase {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn u(&self, x: Vec2) -> Vec2 {
        Vec2::new(self.velocity[0].eval(x.x, x.y), self.velocity[1].eval(x.x, x.y))
    }

    fn u_partial(&self, x: Vec2, a: usize, b: usize) -> Vec2 {
        Vec2::new(
            self.velocity[0].partial(a, b).eval(x.x, x.y),
            self.velocity[1].partial(a, b).eval(x.x, x.y),
        )
    }

    fn p(&self, x: Vec2) -> f64 {
        self.pressure.eval(x.x, x.y)
    }

    fn f(&self, x: Vec2) -> f64 {
        self.velocity[0].dx().eval(x.x, x.y) + self.velocity[1].dy().eval(x.x, x.y)
    }
}

/// Unit disk with `u = (-3x² - y² + 3, -2xy)`, `p = -3x + x(x² + y²)`,
/// `f = -8x` and `g_N = 0`.
pub fn case_circle() -> PolynomialCase {
    PolynomialCase::new(
        "circle",
        Domain::disk(),
        Poly2::from_terms(&[(1, 0, -3.0), (3, 0, 1.0), (1, 2, 1.0)]),
    )
}

/// Ring `0.5 < r < 1` with `p = -sin(2πx) sin(2πy)`, `u = -∇p`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RingCase;

pub fn case_ring() -> RingCase {
    RingCase
}

/// `d^n/dt^n sin(t)`.
fn sin_derivative(t: f64, n: usize) -> f64 {
    match n % 4 {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    }
}

impl ManufacturedCase for RingCase {
    fn name(&self) -> &str {
        "ring"
    }

    fn domain(&self) -> Domain {
        Domain::ring()
    }

    fn u(&self, x: Vec2) -> Vec2 {
        self.u_partial(x, 0, 0)
    }

    fn u_partial(&self, x: Vec2, a: usize, b: usize) -> Vec2 {
        let w = 2.0 * PI;
        let (s, t) = (w * x.x, w * x.y);
        let scale = w * w.powi((a + b) as i32);
        // u = w (cos s sin t, sin s cos t)
        Vec2::new(
            scale * sin_derivative(s, a + 1) * sin_derivative(t, b),
            scale * sin_derivative(s, a) * sin_derivative(t, b + 1),
        )
    }

    fn p(&self, x: Vec2) -> f64 {
        -(2.0 * PI * x.x).sin() * (2.0 * PI * x.y).sin()
    }

    fn f(&self, x: Vec2) -> f64 {
        -8.0 * PI * PI * (2.0 * PI * x.x).sin() * (2.0 * PI * x.y).sin()
    }
}

/// Errors of one discrete solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    pub e_u_hdiv: f64,
    pub e_penalty: f64,
    pub e_u_0h: f64,
    pub e_p: f64,
    pub e_total: f64,
}

/// Error of `(u_h, p_h)` against `case`.
///
/// In corrected mode the velocity is measured in `‖·‖_{0,h}` with the
/// given Taylor configuration; in strong mode only the H(div) part is used.
/// Pressures are compared after shifting both to zero mean over `Ω_h`.
pub fn error_norms(
    disc: &Discretization,
    u_h: &[f64],
    p_h: &[f64],
    case: &dyn ManufacturedCase,
    mode: SystemMode,
    config: &TaylorConfig,
) -> ErrorReport {
    let rule = &disc.accurate_rule;
    let mut l2 = 0.0;
    let mut div = 0.0;
    let mut p_mean_h = 0.0;
    let mut p_mean_e = 0.0;
    let mut p_vals = Vec::with_capacity(disc.maps.len());
    for (t, map) in disc.maps.iter().enumerate() {
        let field = disc.velocity_field(t, u_h);
        let coeffs = disc.local_pressure(t, p_h);
        let jac = map.det.abs();
        let mut vals = Vec::with_capacity(rule.weights.len());
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.to_physical(*pt);
            l2 += w * jac * (case.u(x) - field.eval(x)).norm_squared();
            div += w * jac * (case.f(x) - field.div(x)).powi(2);
            let ph = disc.pressure.eval(coeffs, *pt);
            let pe = case.p(x);
            p_mean_h += w * jac * ph;
            p_mean_e += w * jac * pe;
            vals.push((ph, pe));
        }
        p_vals.push(vals);
    }
    let area = disc.area();
    p_mean_h /= area;
    p_mean_e /= area;
    let mut e_p2 = 0.0;
    for (map, vals) in disc.maps.iter().zip(&p_vals) {
        for ((ph, pe), w) in vals.iter().zip(&rule.weights) {
            e_p2 += w * map.det.abs() * ((ph - p_mean_h) - (pe - p_mean_e)).powi(2);
        }
    }
    let e_u_hdiv = (l2 + div).sqrt();
    let e_penalty = match mode {
        SystemMode::UncorrectedStrong => 0.0,
        SystemMode::Corrected => {
            let mut acc = 0.0;
            for g in &disc.boundary {
                let field = disc.velocity_field(g.owner, u_h);
                let discrete = taylor_trace(&field, g, config);
                let exact = taylor_trace_analytic(|x, d, j| case.directional(x, d, j), g, config.m);
                for q in 0..g.len() {
                    acc += g.weights[q] / g.h_k * (exact[q] - discrete[q]).dot(&g.n_gamma(q)).powi(2);
                }
            }
            acc.sqrt()
        }
    };
    let e_u_0h = e_u_hdiv.hypot(e_penalty);
    let e_p = e_p2.sqrt();
    ErrorReport {
        h: disc.mesh.stats().h,
        e_u_hdiv,
        e_penalty,
        e_u_0h,
        e_p,
        e_total: e_u_0h + e_p,
    }
}

/// Orders `log(E_i/E_{i+1}) / log(h_i/h_{i+1})`.
pub fn compute_eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() {
        return Err(Error::Eoc(format!("{} errors but {} mesh sizes", errors.len(), hs.len())));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Eoc(format!("nonpositive error {e}")));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) || hs.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Eoc("mesh sizes must be positive and strictly decreasing".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}
