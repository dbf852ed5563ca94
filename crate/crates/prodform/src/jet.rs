//! Forward-mode jets for exact first and second derivatives of chart maps.
//!
//! Every built-in chart map is written generically over [`Scalar`]. Evaluating
//! with `f64` gives plain values, with [`Jet1`] gives the value plus gradient,
//! and with [`Jet2`] the value plus gradient plus Hessian, all to machine
//! precision of the evaluator itself. Chart dimension is capped at
//! [`MAX_VARS`]; jets are stack-only `Copy` values.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Maximum number of chart variables a jet can track.
pub const MAX_VARS: usize = 6;

/// Arithmetic shared by `f64` and the jet types.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn sqrt(self) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order jet: value and gradient with respect to `n` chart variables.
#[derive(Debug, Clone, Copy)]
pub struct Jet1 {
    pub v: f64,
    pub d: [f64; MAX_VARS],
    pub n: usize,
}

impl Jet1 {
    pub fn var(v: f64, index: usize, n: usize) -> Self {
        assert!(index < n && n <= MAX_VARS);
        let mut d = [0.0; MAX_VARS];
        d[index] = 1.0;
        Jet1 { v, d, n }
    }

    fn unary(self, v: f64, dv: f64) -> Self {
        let mut d = [0.0; MAX_VARS];
        for i in 0..self.n {
            d[i] = dv * self.d[i];
        }
        Jet1 { v, d, n: self.n }
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, rhs: Jet1) -> Jet1 {
        let n = self.n.max(rhs.n);
        let mut d = [0.0; MAX_VARS];
        for i in 0..n {
            d[i] = self.d[i] + rhs.d[i];
        }
        Jet1 { v: self.v + rhs.v, d, n }
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, rhs: Jet1) -> Jet1 {
        let n = self.n.max(rhs.n);
        let mut d = [0.0; MAX_VARS];
        for i in 0..n {
            d[i] = self.d[i] - rhs.d[i];
        }
        Jet1 { v: self.v - rhs.v, d, n }
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, rhs: Jet1) -> Jet1 {
        let n = self.n.max(rhs.n);
        let mut d = [0.0; MAX_VARS];
        for i in 0..n {
            d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Jet1 { v: self.v * rhs.v, d, n }
    }
}

impl Div for Jet1 {
    type Output = Jet1;
    fn div(self, rhs: Jet1) -> Jet1 {
        let n = self.n.max(rhs.n);
        let v = self.v / rhs.v;
        let mut d = [0.0; MAX_VARS];
        for i in 0..n {
            d[i] = (self.d[i] - v * rhs.d[i]) / rhs.v;
        }
        Jet1 { v, d, n }
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        let mut d = [0.0; MAX_VARS];
        for i in 0..self.n {
            d[i] = -self.d[i];
        }
        Jet1 { v: -self.v, d, n: self.n }
    }
}

impl Scalar for Jet1 {
    fn constant(v: f64) -> Self {
        Jet1 { v, d: [0.0; MAX_VARS], n: 0 }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        self.unary(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.v.cos(), -self.v.sin())
    }
    fn sinh(self) -> Self {
        self.unary(self.v.sinh(), self.v.cosh())
    }
    fn cosh(self) -> Self {
        self.unary(self.v.cosh(), self.v.sinh())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s)
    }
}

/// Second-order jet: value, gradient and (symmetric) Hessian.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; MAX_VARS],
    pub h: [f64; MAX_VARS * MAX_VARS],
    pub n: usize,
}

impl Jet2 {
    pub fn var(v: f64, index: usize, n: usize) -> Self {
        assert!(index < n && n <= MAX_VARS);
        let mut d = [0.0; MAX_VARS];
        d[index] = 1.0;
        Jet2 { v, d, h: [0.0; MAX_VARS * MAX_VARS], n }
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[i * MAX_VARS + j]
    }

    /// Chain rule for a unary function with first and second derivative.
    fn unary(self, v: f64, dv: f64, ddv: f64) -> Self {
        let n = self.n;
        let mut d = [0.0; MAX_VARS];
        let mut h = [0.0; MAX_VARS * MAX_VARS];
        for i in 0..n {
            d[i] = dv * self.d[i];
            for j in 0..n {
                h[i * MAX_VARS + j] =
                    ddv * self.d[i] * self.d[j] + dv * self.h[i * MAX_VARS + j];
            }
        }
        Jet2 { v, d, h, n }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        let n = self.n.max(rhs.n);
        let mut d = [0.0; MAX_VARS];
        let mut h = [0.0; MAX_VARS * MAX_VARS];
        for i in 0..n {
            d[i] = self.d[i] + rhs.d[i];
            for j in 0..n {
                h[i * MAX_VARS + j] = self.h[i * MAX_VARS + j] + rhs.h[i * MAX_VARS + j];
            }
        }
        Jet2 { v: self.v + rhs.v, d, h, n }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        let n = self.n.max(rhs.n);
        let mut d = [0.0; MAX_VARS];
        let mut h = [0.0; MAX_VARS * MAX_VARS];
        for i in 0..n {
            d[i] = self.d[i] - rhs.d[i];
            for j in 0..n {
                h[i * MAX_VARS + j] = self.h[i * MAX_VARS + j] - rhs.h[i * MAX_VARS + j];
            }
        }
        Jet2 { v: self.v - rhs.v, d, h, n }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let n = self.n.max(rhs.n);
        let mut d = [0.0; MAX_VARS];
        let mut h = [0.0; MAX_VARS * MAX_VARS];
        for i in 0..n {
            d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
            for j in 0..n {
                h[i * MAX_VARS + j] = self.h[i * MAX_VARS + j] * rhs.v
                    + self.d[i] * rhs.d[j]
                    + self.d[j] * rhs.d[i]
                    + self.v * rhs.h[i * MAX_VARS + j];
            }
        }
        Jet2 { v: self.v * rhs.v, d, h, n }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        let n = self.n.max(rhs.n);
        let v = self.v / rhs.v;
        let mut d = [0.0; MAX_VARS];
        for i in 0..n {
            d[i] = (self.d[i] - v * rhs.d[i]) / rhs.v;
        }
        let mut h = [0.0; MAX_VARS * MAX_VARS];
        for i in 0..n {
            for j in 0..n {
                h[i * MAX_VARS + j] = (self.h[i * MAX_VARS + j]
                    - v * rhs.h[i * MAX_VARS + j]
                    - d[i] * rhs.d[j]
                    - d[j] * rhs.d[i])
                    / rhs.v;
            }
        }
        Jet2 { v, d, h, n }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        let mut d = [0.0; MAX_VARS];
        let mut h = [0.0; MAX_VARS * MAX_VARS];
        for i in 0..self.n {
            d[i] = -self.d[i];
            for j in 0..self.n {
                h[i * MAX_VARS + j] = -self.h[i * MAX_VARS + j];
            }
        }
        Jet2 { v: -self.v, d, h, n: self.n }
    }
}

impl Scalar for Jet2 {
    fn constant(v: f64) -> Self {
        Jet2 { v, d: [0.0; MAX_VARS], h: [0.0; MAX_VARS * MAX_VARS], n: 0 }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.unary(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.unary(c, -s, -c)
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.unary(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.unary(c, s, c)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s, -0.25 / (s * s * s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x, y) = sin(x) * cosh(y) + sqrt(1 + x*x) / (2 + cos(y))
    fn sample<S: Scalar>(x: S, y: S) -> S {
        let one = S::constant(1.0);
        let two = S::constant(2.0);
        x.sin() * y.cosh() + (one + x * x).sqrt() / (two + y.cos())
    }

    #[test]
    fn jet1_matches_central_differences() {
        let (x0, y0) = (0.37, -0.81);
        let j = sample(Jet1::var(x0, 0, 2), Jet1::var(y0, 1, 2));
        let h = 1e-6;
        let dx = (sample(x0 + h, y0) - sample(x0 - h, y0)) / (2.0 * h);
        let dy = (sample(x0, y0 + h) - sample(x0, y0 - h)) / (2.0 * h);
        assert!((j.d[0] - dx).abs() < 1e-9, "dx: {} vs {}", j.d[0], dx);
        assert!((j.d[1] - dy).abs() < 1e-9, "dy: {} vs {}", j.d[1], dy);
        assert!((j.v - sample(x0, y0)).abs() < 1e-15);
    }

    #[test]
    fn jet2_hessian_matches_fd_and_is_symmetric() {
        let (x0, y0) = (0.52, 0.23);
        let j = sample(Jet2::var(x0, 0, 2), Jet2::var(y0, 1, 2));
        let h = 1e-4;
        let hxx = (sample(x0 + h, y0) - 2.0 * sample(x0, y0) + sample(x0 - h, y0)) / (h * h);
        let hxy = (sample(x0 + h, y0 + h) - sample(x0 + h, y0 - h) - sample(x0 - h, y0 + h)
            + sample(x0 - h, y0 - h))
            / (4.0 * h * h);
        assert!((j.hess(0, 0) - hxx).abs() < 1e-5, "{} vs {}", j.hess(0, 0), hxx);
        assert!((j.hess(0, 1) - hxy).abs() < 1e-5, "{} vs {}", j.hess(0, 1), hxy);
        assert_eq!(j.hess(0, 1), j.hess(1, 0));
    }

    #[test]
    fn jet2_division_second_derivative() {
        // f(x) = x / (1 + x): f'' = -2 / (1+x)^3
        let x0 = 0.4;
        let j = Jet2::var(x0, 0, 1) / (Jet2::constant(1.0) + Jet2::var(x0, 0, 1));
        let expect = -2.0 / (1.0 + x0).powi(3);
        assert!((j.hess(0, 0) - expect).abs() < 1e-12);
    }
}
