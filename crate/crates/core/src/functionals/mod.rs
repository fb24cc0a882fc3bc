//! The three weighted integrals of the inequality, the quotient built from
//! them, and the scaling energy I(u) = A/p + B/q with its optimal dilation.

mod moments;

pub use moments::{radial_moment, Field};

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::params::{approx_eq, classify, exponents, CknParams, Regime};
use crate::profiles::RadialProfile;
use crate::quadrature::{Estimate, DEFAULT_TOL};
use crate::special::sphere_area;

/// ∫_{R^N} |u|^k |x|^{−t} dx for u(x) = g(|x|), with its error estimate.
pub fn weighted_integral(
    profile: &RadialProfile,
    k: f64,
    t: f64,
    n: f64,
    tol: f64,
) -> Result<Estimate> {
    let e = radial_moment(profile, Field::Value, k, n - 1.0 - t, tol)?;
    Ok(scale_estimate(e, sphere_area(n)))
}

/// ∫_{R^N} |∇u|^p |x|^{−μ} dx for u(x) = g(|x|), with its error estimate.
pub fn gradient_integral(
    profile: &RadialProfile,
    p: f64,
    mu: f64,
    n: f64,
    tol: f64,
) -> Result<Estimate> {
    let e = radial_moment(profile, Field::Gradient, p, n - 1.0 - mu, tol)?;
    Ok(scale_estimate(e, sphere_area(n)))
}

/// (∫|u|^k |x|^{−t} dx)^{1/k}.
pub fn weighted_norm(profile: &RadialProfile, k: f64, t: f64, n: f64) -> Result<f64> {
    check_exponent(k)?;
    Ok(weighted_integral(profile, k, t, n, DEFAULT_TOL)?
        .value
        .powf(1.0 / k))
}

/// (∫|∇u|^p |x|^{−μ} dx)^{1/p}.
pub fn gradient_norm(profile: &RadialProfile, p: f64, mu: f64, n: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(gradient_integral(profile, p, mu, n, DEFAULT_TOL)?
        .value
        .powf(1.0 / p))
}

fn check_exponent(k: f64) -> Result<()> {
    if !(k >= 1.0) {
        return Err(CknError::Argument(format!("norm exponent {k} below 1")));
    }
    Ok(())
}

fn scale_estimate(e: Estimate, c: f64) -> Estimate {
    Estimate {
        value: e.value * c,
        error: e.error * c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    /// (∫|u|^r |x|^{−s})^{1/r}
    pub target_norm: f64,
    /// (∫|∇u|^p |x|^{−μ})^{1/p}
    pub grad_norm: f64,
    /// (∫|u|^q |x|^{−θ})^{1/q}; absent when a = 1, where it drops out.
    pub interp_norm: Option<f64>,
    pub quotient: f64,
    pub target_error: f64,
    pub grad_error: f64,
    pub interp_error: f64,
    /// First-order bound on the quotient error from the three norm errors.
    pub error_bound: f64,
}

/// The quotient at a radial profile, at the default quadrature tolerance.
pub fn ckn_quotient(params: &CknParams, profile: &RadialProfile) -> Result<QuotientReport> {
    quotient_with_tol(params, profile, DEFAULT_TOL)
}

pub fn quotient_with_tol(
    params: &CknParams,
    profile: &RadialProfile,
    tol: f64,
) -> Result<QuotientReport> {
    quotient_with_measure(params, profile, sphere_area(params.n), tol)
}

/// The quotient with the angular factor ∫_{S^{N−1}} replaced by `angular`
/// (N κ_N for a gauge-radial profile).
pub fn quotient_with_measure(
    params: &CknParams,
    profile: &RadialProfile,
    angular: f64,
    tol: f64,
) -> Result<QuotientReport> {
    let c = params;
    if classify(c).regime == Regime::Invalid {
        return Err(CknError::Invalid(format!("{:?}", c.raw())));
    }
    let norm = |field: Field, k: f64, t: f64| -> Result<(f64, f64)> {
        let e = radial_moment(profile, field, k, c.n - 1.0 - t, tol)?;
        let v = e.value * angular;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CknError::NonFinite(format!(
                "{field:?} integral with exponent {k}, weight {t}: {v}"
            )));
        }
        let nv = v.powf(1.0 / k);
        Ok((nv, nv * e.error / (k * e.value)))
    };
    let (tn, te) = norm(Field::Value, c.r, c.s)?;
    let (gn, ge) = norm(Field::Gradient, c.p, c.mu)?;
    // a = 1 up to rounding: the interpolation norm drops out
    let a = if approx_eq(c.a, 1.0) { 1.0 } else { c.a };
    let (inorm, ie, ipow) = if a == 1.0 {
        (None, 0.0, 1.0)
    } else {
        let (v, e) = norm(Field::Value, c.q, c.theta)?;
        (Some(v), e, v.powf(1.0 - a))
    };
    let quotient = tn / (gn.powf(a) * ipow);
    if !quotient.is_finite() {
        return Err(CknError::NonFinite(format!("quotient {quotient}")));
    }
    let rel = te / tn + a * ge / gn + inorm.map_or(0.0, |v| (1.0 - a) * ie / v);
    Ok(QuotientReport {
        target_norm: tn,
        grad_norm: gn,
        interp_norm: inorm,
        quotient,
        target_error: te,
        grad_error: ge,
        interp_error: ie,
        error_bound: quotient * rel,
    })
}

/// I(u) = (1/p)∫|∇u|^p + (1/q)∫|u|^q |x|^{−(N+θd−Nd)}, split into its parts,
/// and the minimum of λ ↦ I(u_λ) over u_λ(x) = λ^{(Nd−sd)/r}u(λx).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    #[serde(rename = "A_part")]
    pub a_part: f64,
    #[serde(rename = "B_part")]
    pub b_part: f64,
    #[serde(rename = "I")]
    pub energy: f64,
    pub lambda0: f64,
    #[serde(rename = "I_min")]
    pub i_min: f64,
    /// I(u_λ) = λ^m A + λ^{−n} B
    pub m: f64,
    pub n: f64,
}

struct ScalingLaw {
    d: f64,
    m: f64,
    n: f64,
}

fn scaling_law(params: &CknParams) -> Result<ScalingLaw> {
    let reg = classify(params).regime;
    if reg != Regime::C1 {
        return Err(CknError::Invalid(format!(
            "the scaling energy is defined for regime C1, parameters are {reg}"
        )));
    }
    let e = exponents(params)?;
    if !(e.m > 0.0 && e.n > 0.0) {
        return Err(CknError::Invalid(format!(
            "scaling exponents m = {}, n = {} must both be positive",
            e.m, e.n
        )));
    }
    Ok(ScalingLaw {
        d: e.d,
        m: e.m,
        n: e.n,
    })
}

fn energy_parts(
    profile: &RadialProfile,
    params: &CknParams,
    d: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let c = params;
    let w = c.n + c.theta * d - c.n * d;
    let a = gradient_integral(profile, c.p, 0.0, c.n, tol)?.value / c.p;
    let b = weighted_integral(profile, c.q, w, c.n, tol)?.value / c.q;
    Ok((a, b))
}

pub fn energy(profile: &RadialProfile, params: &CknParams) -> Result<EnergyParts> {
    let law = scaling_law(params)?;
    let (a, b) = energy_parts(profile, params, law.d, DEFAULT_TOL)?;
    let (m, n) = (law.m, law.n);
    let lambda0 = (n * b / (m * a)).powf(1.0 / (m + n));
    let i_min =
        (m + n) / m * (n / m).powf(-n / (m + n)) * a.powf(n / (m + n)) * b.powf(m / (m + n));
    Ok(EnergyParts {
        a_part: a,
        b_part: b,
        energy: a + b,
        lambda0,
        i_min,
        m,
        n,
    })
}

/// I(u_λ) computed by rescaling the profile and integrating again.
pub fn energy_at_scale(
    profile: &RadialProfile,
    params: &CknParams,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    let law = scaling_law(params)?;
    let c = params;
    let amp = lambda.powf((c.n * law.d - c.s * law.d) / c.r);
    let scaled = profile.compose(1.0, lambda, amp)?;
    let (a, b) = energy_parts(&scaled, params, law.d, tol)?;
    Ok(a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    /// Index of the smallest energy.
    pub argmin: usize,
    /// Index of the grid point closest to λ₀ in ln λ.
    pub nearest: usize,
    pub lambda0: f64,
}

/// I(u_λ) on `points` log-spaced λ spanning one decade either side of λ₀.
/// The grid is shifted by 0.3 of a step so that λ₀ never sits halfway
/// between two points.
pub fn lambda_scan(
    profile: &RadialProfile,
    params: &CknParams,
    points: usize,
) -> Result<LambdaScan> {
    if points < 3 {
        return Err(CknError::Argument(format!(
            "scan needs at least 3 points, got {points}"
        )));
    }
    let parts = energy(profile, params)?;
    let h = 2.0 * std::f64::consts::LN_10 / (points - 1) as f64;
    let mid = (points - 1) as f64 / 2.0;
    let lambdas: Vec<f64> = (0..points)
        .map(|i| (parts.lambda0.ln() + (i as f64 - mid + 0.3) * h).exp())
        .collect();
    let energies = lambdas
        .iter()
        .map(|l| energy_at_scale(profile, params, *l, DEFAULT_TOL))
        .collect::<Result<Vec<_>>>()?;
    let argmin = energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let l0 = parts.lambda0.ln();
    let nearest = lambdas
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.ln() - l0).abs().total_cmp(&(b.1.ln() - l0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(LambdaScan {
        lambdas,
        energies,
        argmin,
        nearest,
        lambda0: parts.lambda0,
    })
}
