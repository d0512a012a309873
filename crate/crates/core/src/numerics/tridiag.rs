use std::ops::{Div, Mul, Sub};

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` couples row `i` to `i-1` (`lower[0]` unused), `upper[i]` couples
/// row `i` to `i+1` (last entry unused). `rhs` is overwritten with the solution.
pub fn solve<T>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T], work: &mut Vec<T>)
where
    T: Copy + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    let n = diag.len();
    if n == 0 {
        return;
    }
    work.clear();
    work.extend_from_slice(upper);
    let mut beta = diag[0];
    work[0] = upper[0] / beta;
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * work[i - 1];
        if i + 1 < n {
            work[i] = upper[i] / beta;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - work[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let lower = [0.0, 1.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [1.0, 1.0, 1.0, 0.0];
        let x: [f64; 4] = [1.0, -2.0, 3.0, 0.5];
        let mut b = [0.0f64; 4];
        for i in 0..4 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += lower[i] * x[i - 1];
            }
            if i < 3 {
                b[i] += upper[i] * x[i + 1];
            }
        }
        let mut w = Vec::new();
        solve(&lower, &diag, &upper, &mut b, &mut w);
        for i in 0..4 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }
}
