//! Dense bivariate polynomials in the monomial basis.
//!
//! Every local field in the crate (reference shape functions, their
//! derivatives, bubble products) is a [`Poly2`], so derivatives of any order
//! are exact and cheap.

use std::ops::{Add, Mul, Sub};

/// Bivariate polynomial `sum c_ab x^a y^b` with `a + b <= degree`.
///
/// Coefficients are stored by total degree: for degree `d`, the monomials
/// `x^d, x^(d-1) y, ..., y^d` occupy indices `d(d+1)/2 .. d(d+1)/2 + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    degree: usize,
    coeffs: Vec<f64>,
}

#[inline]
fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Number of monomials of total degree at most `degree`.
#[inline]
pub fn dim_pk(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponent pairs `(a, b)` in storage order.
pub fn exponents(degree: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=degree).flat_map(|d| (0..=d).map(move |b| (d - b, b)))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `∫ x^a y^b` over the reference triangle `{(0,0),(1,0),(0,1)}`.
pub fn reference_monomial_integral(a: usize, b: usize) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; dim_pk(degree)],
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            degree: 0,
            coeffs: vec![value],
        }
    }

    pub fn monomial(a: usize, b: usize) -> Self {
        let mut p = Self::zero(a + b);
        p.coeffs[index(a, b)] = 1.0;
        p
    }

    /// Builds a polynomial from `(a, b, coefficient)` terms.
    pub fn from_terms(terms: &[(usize, usize, f64)]) -> Self {
        let degree = terms.iter().map(|&(a, b, _)| a + b).max().unwrap_or(0);
        let mut p = Self::zero(degree);
        for &(a, b, c) in terms {
            p.coeffs[index(a, b)] += c;
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.degree {
            0.0
        } else {
            self.coeffs[index(a, b)]
        }
    }

    fn with_degree(&self, degree: usize) -> Self {
        if degree <= self.degree {
            return self.clone();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(dim_pk(degree), 0.0);
        Self { degree, coeffs }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.degree + 1;
        let mut xp = [1.0; 16];
        let mut yp = [1.0; 16];
        if n > 16 {
            return exponents(self.degree)
                .zip(&self.coeffs)
                .map(|((a, b), c)| c * x.powi(a as i32) * y.powi(b as i32))
                .sum();
        }
        for i in 1..n {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        exponents(self.degree)
            .zip(&self.coeffs)
            .map(|((a, b), c)| c * xp[a] * yp[b])
            .sum()
    }

    pub fn dx(&self) -> Self {
        let degree = self.degree.saturating_sub(1);
        let mut out = Self::zero(degree);
        for ((a, b), &c) in exponents(self.degree).zip(&self.coeffs) {
            if a > 0 {
                out.coeffs[index(a - 1, b)] += c * a as f64;
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let degree = self.degree.saturating_sub(1);
        let mut out = Self::zero(degree);
        for ((a, b), &c) in exponents(self.degree).zip(&self.coeffs) {
            if b > 0 {
                out.coeffs[index(a, b - 1)] += c * b as f64;
            }
        }
        out
    }

    /// Derivative along the (not necessarily unit) direction `d`.
    pub fn directional(&self, d: [f64; 2]) -> Self {
        &(&self.dx() * d[0]) + &(&self.dy() * d[1])
    }

    /// `∂x^a ∂y^b` of `self`.
    pub fn partial(&self, a: usize, b: usize) -> Self {
        let mut p = self.clone();
        for _ in 0..a {
            p = p.dx();
        }
        for _ in 0..b {
            p = p.dy();
        }
        p
    }

    /// Exact integral over the reference triangle.
    pub fn integrate_reference(&self) -> f64 {
        exponents(self.degree)
            .zip(&self.coeffs)
            .map(|((a, b), c)| c * reference_monomial_integral(a, b))
            .sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let degree = self.degree.max(rhs.degree);
        let mut out = self.with_degree(degree);
        for (o, r) in out.coeffs.iter_mut().zip(&rhs.coeffs) {
            *o += r;
        }
        out
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self + &(rhs * -1.0)
    }
}

impl Mul<f64> for &Poly2 {
    type Output = Poly2;
    fn mul(self, s: f64) -> Poly2 {
        Poly2 {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::zero(self.degree + rhs.degree);
        for ((a1, b1), &c1) in exponents(self.degree).zip(&self.coeffs) {
            if c1 == 0.0 {
                continue;
            }
            for ((a2, b2), &c2) in exponents(rhs.degree).zip(&rhs.coeffs) {
                out.coeffs[index(a1 + a2, b1 + b2)] += c1 * c2;
            }
        }
        out
    }
}

/// Vector field with polynomial components.
pub type VecPoly = [Poly2; 2];

pub fn vec_poly_eval(v: &VecPoly, x: f64, y: f64) -> [f64; 2] {
    [v[0].eval(x, y), v[1].eval(x, y)]
}

pub fn vec_poly_div(v: &VecPoly) -> Poly2 {
    &v[0].dx() + &v[1].dy()
}
