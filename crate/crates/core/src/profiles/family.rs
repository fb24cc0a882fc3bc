//! The closed-form optimizer families and their Beta-function moments.

use serde::{Deserialize, Serialize};

use super::RadialProfile;
use crate::error::{CknError, Result};
use crate::params::{approx_eq, classify, CknParams, Regime};
use crate::special::{gamma_sign, ln_gamma};

/// Which optimizer shape to build.
///
/// * `T5`: A(1+Bρ^β)^{−(p−1)/(q−p)}, β = ((N−p−μ)/(N−p))·p/(p−1), on the
///   decaying branch θ = s = Nμ/(N−p), r = p(q−1)/(p−1).
/// * `T6`: A(1−Bρ^β)₊^{(p−1)/(p−r)}, same β, on the compact branch
///   θ = s = Nμ/(N−p), q = p(r−1)/(p−1), r < p.
/// * `A1`: c(λ+ρ^{(p+μ−s)/(p−1)})^{−(N−p−μ)/(p+μ−s)} for a = 1.
/// * `T11`: A(1+Bρ^{μ+2−s})^{−1/(q−2)} for p = 2, r = 2(q−1), s = θ.
/// * `Hse`: the a = 1 shape with μ = 0 and s replaced by N+sd−Nd, i.e. the
///   extremal of the problem reached through the transform.
/// * `GnDpd` / `GnDpdCompact`: the T5 / T6 shapes with β = p/(p−1), the
///   optimizers of the transformed (unweighted-gradient) problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    T5,
    T6,
    A1,
    T11,
    Hse,
    GnDpd,
    GnDpdCompact,
}

/// A family with its two free parameters: (A, B) for the power families,
/// (c, λ) for `A1` and `Hse`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerFamily {
    pub kind: FamilyKind,
    pub amplitude: f64,
    pub scale: f64,
}

impl OptimizerFamily {
    pub fn new(kind: FamilyKind, amplitude: f64, scale: f64) -> Self {
        OptimizerFamily {
            kind,
            amplitude,
            scale,
        }
    }
}

fn mismatch(kind: FamilyKind, why: impl std::fmt::Display) -> CknError {
    CknError::FamilyRegimeMismatch(format!("{kind:?}: {why}"))
}

fn require_regime(kind: FamilyKind, params: &CknParams, want: Regime) -> Result<()> {
    let got = classify(params);
    if got.regime != want {
        return Err(mismatch(
            kind,
            format!("needs regime {want}, parameters are {}", got.regime),
        ));
    }
    Ok(())
}

fn require_branch_weights(kind: FamilyKind, c: &CknParams) -> Result<()> {
    let crit = c.critical_s();
    if !(approx_eq(c.s, crit) && approx_eq(c.theta, crit)) {
        return Err(mismatch(
            kind,
            format!(
                "needs s = theta = N mu/(N-p) = {crit}, got s = {}, theta = {}",
                c.s, c.theta
            ),
        ));
    }
    Ok(())
}

impl FamilyKind {
    /// (β, γ, compact) of the family under the given parameters, after
    /// checking that the parameters belong to the family's regime.
    pub fn shape(self, c: &CknParams) -> Result<(f64, f64, bool)> {
        let (n, p, q, r, s, mu) = (c.n, c.p, c.q, c.r, c.s, c.mu);
        match self {
            FamilyKind::T5 | FamilyKind::GnDpd => {
                require_regime(self, c, Regime::C1)?;
                require_branch_weights(self, c)?;
                if !approx_eq(r, p * (q - 1.0) / (p - 1.0)) {
                    return Err(mismatch(self, "needs r = p(q-1)/(p-1)"));
                }
                let beta = if self == FamilyKind::T5 {
                    (n - p - mu) / (n - p) * p / (p - 1.0)
                } else {
                    p / (p - 1.0)
                };
                Ok((beta, (p - 1.0) / (q - p), false))
            }
            FamilyKind::T6 | FamilyKind::GnDpdCompact => {
                if !(r < p) {
                    return Err(mismatch(self, format!("needs r < p, got r = {r}, p = {p}")));
                }
                require_regime(self, c, Regime::C1)?;
                require_branch_weights(self, c)?;
                if !approx_eq(q, p * (r - 1.0) / (p - 1.0)) {
                    return Err(mismatch(self, "needs q = p(r-1)/(p-1)"));
                }
                let beta = if self == FamilyKind::T6 {
                    (n - p - mu) / (n - p) * p / (p - 1.0)
                } else {
                    p / (p - 1.0)
                };
                Ok((beta, (p - 1.0) / (p - r), true))
            }
            FamilyKind::A1 | FamilyKind::Hse => {
                require_regime(self, c, Regime::C3)?;
                if !(s < p + mu) {
                    return Err(mismatch(
                        self,
                        "needs s < p + mu (s = p + mu is the Hardy endpoint)",
                    ));
                }
                if self == FamilyKind::A1 {
                    let k = p + mu - s;
                    Ok((k / (p - 1.0), (n - p - mu) / k, false))
                } else {
                    let d = c.d()?;
                    let s2 = n + s * d - n * d;
                    let k = p - s2;
                    Ok((k / (p - 1.0), (n - p) / k, false))
                }
            }
            FamilyKind::T11 => {
                require_regime(self, c, Regime::C2)?;
                Ok((mu + 2.0 - s, 1.0 / (q - 2.0), false))
            }
        }
    }
}

/// Build the family's profile under the given parameters.
pub fn make_optimizer(family: &OptimizerFamily, params: &CknParams) -> Result<RadialProfile> {
    let (beta, gamma, compact) = family.kind.shape(params)?;
    let (a, b) = (family.amplitude, family.scale);
    if !(b > 0.0 && b.is_finite()) {
        return Err(CknError::BadScale(format!("{:?} scale {b}", family.kind)));
    }
    match family.kind {
        FamilyKind::A1 | FamilyKind::Hse => {
            // c(λ + ρ^β)^{−γ} = cλ^{−γ}(1 + ρ^β/λ)^{−γ}
            RadialProfile::power_decay(a * b.powf(-gamma), 1.0 / b, beta, gamma)
        }
        _ if compact => RadialProfile::compact(a, b, beta, gamma),
        _ => RadialProfile::power_decay(a, b, beta, gamma),
    }
}

/// ln of ∫₀^∞ ρ^{c−1}(1+Bρ^β)^{−γ} dρ = B^{−c/β}Γ(c/β)Γ(γ−c/β)/(βΓ(γ)).
fn ln_power_moment(b: f64, beta: f64, gamma: f64, c: f64) -> Result<f64> {
    let x = c / beta;
    if !(x > 0.0 && gamma - x > 0.0) {
        return Err(CknError::DivergentMoment(format!(
            "Gamma arguments c/beta = {x}, gamma - c/beta = {}",
            gamma - x
        )));
    }
    Ok(-x * b.ln() + ln_gamma(x) + ln_gamma(gamma - x) - beta.ln() - ln_gamma(gamma))
}

/// ln of ∫₀^{B^{−1/β}} ρ^{c−1}(1−Bρ^β)^{γ} dρ = B^{−c/β}Γ(c/β)Γ(γ+1)/(βΓ(c/β+γ+1)).
fn ln_compact_moment(b: f64, beta: f64, gamma: f64, c: f64) -> Result<f64> {
    let x = c / beta;
    if !(x > 0.0 && gamma + 1.0 > 0.0) {
        return Err(CknError::DivergentMoment(format!(
            "Gamma arguments c/beta = {x}, gamma + 1 = {}",
            gamma + 1.0
        )));
    }
    let v =
        -x * b.ln() + ln_gamma(x) + ln_gamma(gamma + 1.0) - beta.ln() - ln_gamma(x + gamma + 1.0);
    debug_assert!(gamma_sign(gamma + 1.0) > 0.0);
    Ok(v)
}

/// ∫₀^∞ ρ^{c−1}|g(ρ)|^k dρ in closed form for the power and compact shapes.
pub fn analytic_moment(profile: &RadialProfile, k: f64, c: f64) -> Result<f64> {
    match profile {
        RadialProfile::PowerDecay {
            amplitude,
            scale,
            beta,
            gamma,
        } => Ok((k * amplitude.abs().ln() + ln_power_moment(*scale, *beta, k * gamma, c)?).exp()),
        RadialProfile::Compact {
            amplitude,
            scale,
            beta,
            gamma,
        } => Ok((k * amplitude.abs().ln() + ln_compact_moment(*scale, *beta, k * gamma, c)?).exp()),
        _ => Err(CknError::Argument(
            "closed-form moments exist only for the power and compact shapes".into(),
        )),
    }
}

/// ∫₀^∞ ρ^{c−1}|g′(ρ)|^k dρ in closed form for the power and compact shapes.
pub fn analytic_gradient_moment(profile: &RadialProfile, k: f64, c: f64) -> Result<f64> {
    match profile {
        RadialProfile::PowerDecay {
            amplitude,
            scale,
            beta,
            gamma,
        } => {
            // |g′| = |A|γβB ρ^{β−1}(1+Bρ^β)^{−γ−1}
            let pre = k * (amplitude.abs() * gamma * beta * scale).ln();
            let m = ln_power_moment(*scale, *beta, k * (gamma + 1.0), c + k * (beta - 1.0))?;
            Ok((pre + m).exp())
        }
        RadialProfile::Compact {
            amplitude,
            scale,
            beta,
            gamma,
        } => {
            // |g′| = |A|γβB ρ^{β−1}(1−Bρ^β)^{γ−1}
            let pre = k * (amplitude.abs() * gamma * beta * scale).ln();
            let m = ln_compact_moment(*scale, *beta, k * (gamma - 1.0), c + k * (beta - 1.0))?;
            Ok((pre + m).exp())
        }
        _ => Err(CknError::Argument(
            "closed-form moments exist only for the power and compact shapes".into(),
        )),
    }
}
