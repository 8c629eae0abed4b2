//! Quadrature rules on the reference edge `[-1, 1]` and the reference
//! triangle `{(0,0), (1,0), (0,1)}`.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    /// Polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.points.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Legendre polynomial `P_n(t)` and its derivative by the three-term recurrence.
pub fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - t * t).abs() < 1e-300 {
        // endpoint derivative P_n'(±1) = (±1)^(n+1) n(n+1)/2
        let s = if t > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (t * p1 - p0) / (t * t - 1.0)
    };
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule, exact to degree `2n - 1`.
pub fn edge_quadrature(n: usize) -> EdgeRule {
    assert!(n >= 1, "edge quadrature needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton.
        let mut t = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        points[i] = -t;
        points[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    EdgeRule { points, weights }
}

/// Rule on the reference triangle (weights sum to 1/2).
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Triangle rule exact for polynomials of total degree `exactness_degree`.
///
/// Degrees 0–2 use the classical symmetric centroid and edge-interior rules;
/// higher degrees use a collapsed (Duffy) tensor product of Gauss–Legendre rules.
pub fn triangle_quadrature(exactness_degree: usize) -> TriangleRule {
    match exactness_degree {
        0 | 1 => TriangleRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            exactness: 1,
        },
        2 => TriangleRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            exactness: 2,
        },
        d => {
            // x = s, y = t (1 - s), dx dy = (1 - s) ds dt; the s-integrand has degree d + 1.
            let n = (d + 2).div_ceil(2);
            let g = edge_quadrature(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (&ps, &ws) in g.points.iter().zip(&g.weights) {
                let s = 0.5 * (ps + 1.0);
                for (&pt, &wt) in g.points.iter().zip(&g.weights) {
                    let t = 0.5 * (pt + 1.0);
                    points.push([s, t * (1.0 - s)]);
                    weights.push(0.25 * ws * wt * (1.0 - s));
                }
            }
            TriangleRule {
                points,
                weights,
                exactness: 2 * n - 2,
            }
        }
    }
}
