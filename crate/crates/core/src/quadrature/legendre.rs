use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn cached(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static G8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G5: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        8 => G8.get_or_init(|| gauss_legendre(8)),
        5 => G5.get_or_init(|| gauss_legendre(5)),
        _ => unreachable!(),
    }
}

/// ∫ f over [breaks[0], breaks[last]] as a sum of 8-point Gauss panels.
/// Returns (value, |value − 5-point value|), the latter as an error estimate.
pub fn integrate_panels(breaks: &[f64], f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut err = 0.0;
    for win in breaks.windows(2) {
        let (v8, v5) = panel(win[0], win[1], f);
        total += v8;
        err += (v8 - v5).abs();
    }
    (total, err)
}

/// (8-point, 5-point) Gauss values on one panel.
pub(crate) fn panel(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let rule = |n: usize| {
        let (x, w) = cached(n);
        x.iter()
            .zip(w)
            .map(|(xi, wi)| wi * f(c + h * xi))
            .sum::<f64>()
            * h
    };
    (rule(8), rule(5))
}
