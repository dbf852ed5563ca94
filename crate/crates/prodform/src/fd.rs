//! Central finite-difference stencils over chart coordinates.
//!
//! All derivatives used by the verification pipeline go through these two
//! functions so the stencil order is controlled in one place. `order` is 2 or
//! 4; mixed second derivatives are compositions of two first-derivative
//! stencils.

use std::ops::{Add, Mul, Sub};

fn shifted<T, F>(f: &F, x: &[f64], i: usize, delta: f64) -> T
where
    F: Fn(&[f64]) -> T,
{
    let mut y = x.to_vec();
    y[i] += delta;
    f(&y)
}

/// d/dx_i of `f` at `x` with step `h`.
pub fn diff1<T, F>(f: &F, x: &[f64], i: usize, h: f64, order: usize) -> T
where
    F: Fn(&[f64]) -> T,
    T: Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    match order {
        2 => (shifted(f, x, i, h) - shifted(f, x, i, -h)) * (0.5 / h),
        4 => {
            let a = shifted(f, x, i, -2.0 * h) - shifted(f, x, i, 2.0 * h);
            let b = shifted(f, x, i, h) - shifted(f, x, i, -h);
            (a + b * 8.0) * (1.0 / (12.0 * h))
        }
        _ => panic!("unsupported stencil order {order}"),
    }
}

/// d^2/dx_i dx_j of `f` at `x` with step `h`.
pub fn diff2<T, F>(f: &F, x: &[f64], i: usize, j: usize, h: f64, order: usize) -> T
where
    F: Fn(&[f64]) -> T,
    T: Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Clone,
{
    if i == j {
        let f0 = f(x);
        match order {
            2 => {
                (shifted(f, x, i, h) + shifted(f, x, i, -h) - f0.clone() - f0) * (1.0 / (h * h))
            }
            4 => {
                let far = shifted(f, x, i, 2.0 * h) + shifted(f, x, i, -2.0 * h);
                let near = shifted(f, x, i, h) + shifted(f, x, i, -h);
                (near * 16.0 - far - f0.clone() * 15.0 - f0 * 15.0) * (1.0 / (12.0 * h * h))
            }
            _ => panic!("unsupported stencil order {order}"),
        }
    } else {
        let inner = |y: &[f64]| diff1(f, y, j, h, order);
        diff1(&inner, x, i, h, order)
    }
}

/// Margin in chart coordinates consumed by one derivative at step `h`.
pub fn stencil_reach(h: f64, order: usize) -> f64 {
    match order {
        2 => h,
        4 => 2.0 * h,
        _ => panic!("unsupported stencil order {order}"),
    }
}
