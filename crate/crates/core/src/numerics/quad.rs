use std::ops::{Add, Mul};

/// Values that can be integrated: reals and complex numbers.
pub trait Integrand: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>> Integrand for T {}

/// Composite Simpson rule over uniformly spaced samples.
///
/// Odd interval counts finish with the 3/8 rule on the last three intervals;
/// two samples fall back to the trapezoid rule. Fewer than two samples give zero.
pub fn integrate<T: Integrand>(f: &[T], h: f64) -> T {
    let n = f.len();
    match n {
        0 | 1 => T::default(),
        2 => (f[0] + f[1]) * (0.5 * h),
        3 => (f[0] + f[1] * 4.0 + f[2]) * (h / 3.0),
        _ => {
            let m = n - 1;
            let (simpson_end, tail) = if m % 2 == 0 { (m, false) } else { (m - 3, true) };
            let mut acc = T::default();
            if simpson_end > 0 {
                let mut s = f[0] + f[simpson_end];
                for (i, &v) in f.iter().enumerate().take(simpson_end).skip(1) {
                    s = s + v * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc = s * (h / 3.0);
            }
            if tail {
                let k = simpson_end;
                acc = acc + (f[k] + f[k + 1] * 3.0 + f[k + 2] * 3.0 + f[k + 3]) * (3.0 * h / 8.0);
            }
            acc
        }
    }
}

/// Running integral `F_i = ∫_{x_0}^{x_i} f`, third-order accurate per interval.
pub fn cumulative<T: Integrand>(f: &[T], h: f64) -> Vec<T> {
    let n = f.len();
    let mut out = vec![T::default(); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = (f[0] + f[1]) * (0.5 * h);
        return out;
    }
    let c = h / 12.0;
    for i in 0..n - 1 {
        let piece = if i + 2 < n {
            (f[i] * 5.0 + f[i + 1] * 8.0 + f[i + 2] * -1.0) * c
        } else {
            (f[i - 1] * -1.0 + f[i] * 8.0 + f[i + 1] * 5.0) * c
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (10/21) quadrature of a smooth function on `[a, b]`.
///
/// Returns the integral estimate and the accumulated error estimate.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let mut stack = vec![(a, b, gk21(&f, a, b))];
    let mut total = 0.0;
    let mut err = 0.0;
    let mut guard = 0usize;
    while let Some((lo, hi, (val, e))) = stack.pop() {
        guard += 1;
        let width_ok = (hi - lo) > 1e-12 * (b - a).abs();
        let tol = (abs_tol * (hi - lo) / (b - a)).max(rel_tol * val.abs());
        if e <= tol || !width_ok || guard > 200_000 {
            total += val;
            err += e;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, gk21(&f, lo, mid)));
        stack.push((mid, hi, gk21(&f, mid, hi)));
    }
    (total, err)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 1..=n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p2) / k as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_exact() {
        let f = vec![1.0; 101];
        assert_eq!(integrate(&f, 0.01), 1.0);
    }

    #[test]
    fn sine_half_period() {
        let h = PI / 100.0;
        let f: Vec<f64> = (0..101).map(|i| (i as f64 * h).sin()).collect();
        assert!((integrate(&f, h) - 2.0).abs() < 1e-8 * 10.0);
    }

    #[test]
    fn truncated_exponential() {
        let b = 0.5;
        let t_max = 20.0 / b;
        let n = 20_001;
        let h = t_max / (n - 1) as f64;
        let f: Vec<f64> = (0..n).map(|i| b * (-b * i as f64 * h).exp()).collect();
        let exact = 1.0 - (-20.0f64).exp();
        assert!((integrate(&f, h) - 1.0).abs() < 1e-8);
        assert!((integrate(&f, h) - exact).abs() < 1e-12);
    }

    #[test]
    fn cubic_exact_for_odd_and_even_counts() {
        for n in [4usize, 5, 6, 7, 10, 11] {
            let h = 0.3;
            let f: Vec<f64> = (0..n).map(|i| {
                let x = i as f64 * h;
                2.0 * x * x * x - x * x + 3.0
            }).collect();
            let l = (n - 1) as f64 * h;
            let exact = 0.5 * l.powi(4) - l.powi(3) / 3.0 + 3.0 * l;
            assert!((integrate(&f, h) - exact).abs() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn complex_samples() {
        let h = 0.01;
        let f: Vec<Complex64> = (0..=100)
            .map(|i| Complex64::new(0.0, i as f64 * h).exp())
            .collect();
        let exact = (Complex64::new(0.0, 1.0).exp() - 1.0) / Complex64::new(0.0, 1.0);
        assert!((integrate(&f, h) - exact).norm() < 1e-9);
    }

    #[test]
    fn cumulative_matches_total() {
        let h = 0.01;
        let f: Vec<f64> = (0..=300).map(|i| (i as f64 * h).cos()).collect();
        let c = cumulative(&f, h);
        for (i, ci) in c.iter().enumerate() {
            assert!((ci - (i as f64 * h).sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn gauss_kronrod_smooth_and_peaked() {
        let (v, _) = adaptive_gk(|x| (-x * x).exp(), -10.0, 10.0, 1e-14, 1e-14);
        assert!((v - PI.sqrt()).abs() < 1e-13);
        let (v, _) = adaptive_gk(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-13);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for k in [2, 10, 30] {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert!((q - 2.0 / (k + 1) as f64).abs() < 1e-13, "{k}: {q}");
        }
    }
}
