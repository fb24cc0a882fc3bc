use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::special::{ln_gamma, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// ∫_{R^N} f(x) |x|^{-t} dx by importance sampling with radial density
/// ∝ |x|^{-t} e^{-|x|}.
pub fn integrate_mc(
    f: &dyn Fn(&[f64]) -> f64,
    t: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    integrate_mc_scaled(f, t, n, samples, seed, 1.0)
}

/// As `integrate_mc` with radial density ∝ |x|^{-t} e^{-|x|/scale}.
pub fn integrate_mc_scaled(
    f: &dyn Fn(&[f64]) -> f64,
    t: f64,
    n: usize,
    samples: usize,
    seed: u64,
    scale: f64,
) -> Result<McEstimate> {
    if !(2..=6).contains(&n) {
        return Err(CknError::UnsupportedDimension(n as f64));
    }
    if t >= n as f64 {
        return Err(CknError::DivergentWeight { t, n });
    }
    if samples < 2 || !(scale > 0.0) {
        return Err(CknError::Argument(format!(
            "need at least two samples and a positive scale, got {samples}, {scale}"
        )));
    }
    // Radial law Gamma(N − t, scale); the weight of a sample at radius ρ is
    // f(x) |S^{N-1}| Γ(N−t) scale^{N−t} e^{ρ/scale}.
    let k = n as f64 - t;
    let radial = Gamma::new(k, scale).map_err(|e| CknError::Argument(e.to_string()))?;
    let ln_norm = sphere_area(n as f64).ln() + ln_gamma(k) + k * scale.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..samples {
        let rho: f64 = radial.sample(&mut rng);
        let mut norm2 = 0.0;
        for xi in x.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi = z;
            norm2 += z * z;
        }
        let s = rho / norm2.sqrt();
        x.iter_mut().for_each(|xi| *xi *= s);
        let fx = f(&x);
        let w = if fx == 0.0 {
            0.0
        } else {
            fx * (ln_norm + rho / scale).exp()
        };
        if !w.is_finite() {
            return Err(CknError::NonFinite(format!(
                "sample weight at radius {rho}"
            )));
        }
        let delta = w - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (w - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / samples as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn norm2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn gaussian_in_the_plane() {
        let e = integrate_mc(&|x| (-norm2(x)).exp(), 0.0, 2, 200_000, 3).unwrap();
        assert!((e.estimate - PI).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn unit_ball_volume() {
        let f = |x: &[f64]| if norm2(x) <= 1.0 { 1.0 } else { 0.0 };
        let e = integrate_mc(&f, 0.0, 3, 200_000, 11).unwrap();
        assert!(
            (e.estimate - 4.0 * PI / 3.0).abs() < 3.0 * e.std_error,
            "{e:?}"
        );
    }

    #[test]
    fn singular_weight() {
        let e = integrate_mc(&|x| (-norm2(x)).exp(), 1.0, 2, 200_000, 5).unwrap();
        let want = PI.powf(1.5);
        assert!((e.estimate - want).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn rejects_nonintegrable_weight_and_bad_dimension() {
        let f = |_: &[f64]| 1.0;
        assert_eq!(
            integrate_mc(&f, 3.0, 3, 10, 0).unwrap_err().code(),
            "divergent-weight"
        );
        assert_eq!(
            integrate_mc(&f, 0.0, 7, 10, 0).unwrap_err().code(),
            "unsupported-dimension"
        );
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let f = |x: &[f64]| (-norm2(x)).exp() * (1.0 + x[0]);
        let a = integrate_mc(&f, 0.5, 3, 10_000, 42).unwrap();
        let b = integrate_mc(&f, 0.5, 3, 10_000, 42).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
