use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::functionals::quotient_with_tol;
use crate::params::CknParams;
use crate::profiles::{Bump, RadialProfile};
use crate::quadrature::MIN_TOL;

/// First-order gain (relative) tolerated by `passes`.
pub const FIRST_ORDER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub trials: usize,
    pub eps: f64,
    pub base_quotient: f64,
    /// max over trials and ±ε, ±ε/2 of (Q(g+εφ) − Q(g))/Q(g)
    pub max_gain: f64,
    /// max over trials of |dQ/dε|/Q at ε = 0 (Richardson-extrapolated)
    pub max_first_order: f64,
    /// largest fitted c in (Q(ε) − Q(0))/Q ≈ c·ε² (second difference)
    pub quadratic_fit: f64,
    /// max_first_order ≤ 1e−8
    pub passes: bool,
}

struct Sampler {
    taus: Vec<f64>,
    weights: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Sampler {
    /// Target-integrand weights |g|^r ρ^{N−s} on a τ grid, and the τ range
    /// holding the central 98% of the mass.
    fn new(profile: &RadialProfile, params: &CknParams) -> Result<Self> {
        let taus: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 0.01).collect();
        let weights: Vec<f64> = taus
            .iter()
            .map(|t| {
                let l = profile.ln_abs(*t);
                if l == f64::NEG_INFINITY {
                    0.0
                } else {
                    (params.r * l + (params.n - params.s) * t).exp()
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(CknError::NonFinite(format!("target mass {total}")));
        }
        let mut acc = 0.0;
        let (mut lo, mut hi) = (taus[0], taus[taus.len() - 1]);
        let mut seen_lo = false;
        for (t, w) in taus.iter().zip(&weights) {
            acc += w / total;
            if !seen_lo && acc >= 0.01 {
                lo = *t;
                seen_lo = true;
            }
            if acc <= 0.99 {
                hi = *t;
            }
        }
        Ok(Sampler {
            taus,
            weights,
            lo,
            hi: hi.max(lo + 0.5),
        })
    }

    fn inner(&self, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64) -> f64 {
        self.taus
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(*t) * g(*t))
            .sum()
    }
}

fn bump_sum(bumps: &[Bump], t: f64) -> f64 {
    bumps
        .iter()
        .map(|b| b.weight * (-((t - b.center) / b.width).powi(2)).exp())
        .sum()
}

/// Random Gaussian-in-ln ρ bump perturbations g ↦ g(e^{−εβ}ρ)(1 + ε(φ − α)),
/// where α and β remove the components of φ along the amplitude and
/// dilation directions (in the inner product weighted by |g|^r ρ^{N−1−s}).
pub fn stationarity_check(
    params: &CknParams,
    profile: &RadialProfile,
    trials: usize,
    eps: f64,
    seed: u64,
) -> Result<StationarityReport> {
    if !(1e-4..=1e-2).contains(&eps) {
        return Err(CknError::Argument(format!(
            "perturbation size {eps} outside [1e-4, 1e-2]"
        )));
    }
    if trials == 0 {
        return Err(CknError::Argument("at least one trial is needed".into()));
    }
    let tol = MIN_TOL;
    let q0 = quotient_with_tol(params, profile, tol)?.quotient;
    let sampler = Sampler::new(profile, params)?;
    let slope = |t: f64| profile.log_slope(t);
    let one = |_: f64| 1.0;
    let (g11, g1l, gll) = (
        sampler.inner(&one, &one),
        sampler.inner(&one, &slope),
        sampler.inner(&slope, &slope),
    );
    let det = g11 * gll - g1l * g1l;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = sampler.hi - sampler.lo;
    let mut max_gain = f64::NEG_INFINITY;
    let mut max_first: f64 = 0.0;
    let mut quad: f64 = f64::NEG_INFINITY;
    for _ in 0..trials {
        let count = rng.gen_range(1..=3);
        let bumps: Vec<Bump> = (0..count)
            .map(|_| Bump {
                center: rng.gen_range(sampler.lo..=sampler.hi),
                width: rng.gen_range(0.1..0.4) * span.max(1.0),
                weight: if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..1.0),
            })
            .collect();
        let phi = |t: f64| bump_sum(&bumps, t);
        let (b1, bl) = (sampler.inner(&phi, &one), sampler.inner(&phi, &slope));
        let (alpha, beta) = if det.abs() > 1e-14 * g11 * gll {
            ((gll * b1 - g1l * bl) / det, (g11 * bl - g1l * b1) / det)
        } else {
            (b1 / g11, 0.0)
        };
        let q_at = |e: f64| -> Result<f64> {
            let p = profile
                .dilate((-e * beta).exp())?
                .bumped(e, alpha, bumps.clone());
            Ok(quotient_with_tol(params, &p, tol)?.quotient)
        };
        let (qp, qm) = (q_at(eps)?, q_at(-eps)?);
        let (hp, hm) = (q_at(0.5 * eps)?, q_at(-0.5 * eps)?);
        let d1 = (qp - qm) / (2.0 * eps);
        let d2 = (hp - hm) / eps;
        let first = ((4.0 * d2 - d1) / 3.0).abs() / q0;
        max_first = max_first.max(first);
        for q in [qp, qm, hp, hm] {
            max_gain = max_gain.max((q - q0) / q0);
        }
        quad = quad.max((qp + qm - 2.0 * q0) / (2.0 * eps * eps * q0));
    }
    Ok(StationarityReport {
        trials,
        eps,
        base_quotient: q0,
        max_gain,
        max_first_order: max_first,
        quadratic_fit: quad,
        passes: max_first <= FIRST_ORDER_TOL,
    })
}
