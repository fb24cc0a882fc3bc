//! Radial profiles g(ρ) with exact derivatives.
//!
//! Every variant evaluates in log form, τ = ln ρ ↦ ln|g(e^τ)|, together with
//! the log-slope ρg′/g. Integrands built from these never overflow on far
//! tails, which is where slowly decaying optimizers keep a visible share of
//! their mass.

mod family;
mod grid;

pub use family::{
    analytic_gradient_moment, analytic_moment, make_optimizer, FamilyKind, OptimizerFamily,
};
pub(crate) use grid::{hermite, pchip_slopes, slope_at};
pub use grid::{GridProfile, GridSpec, MIN_NODES};

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::special::softplus;

/// Gaussian bump in τ = ln ρ, weight·exp(−((τ − center)/width)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub weight: f64,
}

impl Bump {
    fn value(&self, tau: f64) -> f64 {
        let z = (tau - self.center) / self.width;
        self.weight * (-z * z).exp()
    }

    fn slope(&self, tau: f64) -> f64 {
        let z = (tau - self.center) / self.width;
        -2.0 * z / self.width * self.weight * (-z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// A (1 + Bρ^β)^{−γ}
    PowerDecay {
        amplitude: f64,
        scale: f64,
        beta: f64,
        gamma: f64,
    },
    /// A (1 − Bρ^β)₊^{γ}, supported on ρ < B^{−1/β}
    Compact {
        amplitude: f64,
        scale: f64,
        beta: f64,
        gamma: f64,
    },
    /// A exp(−Bρ^β)
    StretchedExp {
        amplitude: f64,
        scale: f64,
        beta: f64,
    },
    /// factor · g(dilation · ρ^power)
    Composed {
        inner: Box<RadialProfile>,
        power: f64,
        dilation: f64,
        factor: f64,
    },
    /// g(ρ) · (1 + ε(Σ bumps(ln ρ) − offset))
    Bumped {
        inner: Box<RadialProfile>,
        eps: f64,
        offset: f64,
        bumps: Vec<Bump>,
    },
    Grid(GridProfile),
}

fn check_shape(amplitude: f64, scale: f64, beta: f64) -> Result<()> {
    if !(amplitude != 0.0 && amplitude.is_finite()) {
        return Err(CknError::Argument(format!("amplitude {amplitude}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CknError::BadScale(format!("B = {scale}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(CknError::Argument(format!("exponent beta = {beta}")));
    }
    Ok(())
}

/// ln(1 − e^y) for y < 0.
fn ln_one_minus_exp(y: f64) -> f64 {
    if y > -std::f64::consts::LN_2 {
        (-y.exp_m1()).ln()
    } else {
        (-y.exp()).ln_1p()
    }
}

impl RadialProfile {
    pub fn power_decay(amplitude: f64, scale: f64, beta: f64, gamma: f64) -> Result<Self> {
        check_shape(amplitude, scale, beta)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(CknError::Argument(format!(
                "decay exponent gamma = {gamma}"
            )));
        }
        Ok(RadialProfile::PowerDecay {
            amplitude,
            scale,
            beta,
            gamma,
        })
    }

    pub fn compact(amplitude: f64, scale: f64, beta: f64, gamma: f64) -> Result<Self> {
        check_shape(amplitude, scale, beta)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(CknError::Argument(format!("edge exponent gamma = {gamma}")));
        }
        Ok(RadialProfile::Compact {
            amplitude,
            scale,
            beta,
            gamma,
        })
    }

    pub fn stretched_exp(amplitude: f64, scale: f64, beta: f64) -> Result<Self> {
        check_shape(amplitude, scale, beta)?;
        Ok(RadialProfile::StretchedExp {
            amplitude,
            scale,
            beta,
        })
    }

    /// ρ ↦ factor·g(dilation·ρ^power). Grid profiles with a positive factor
    /// stay grids (the node map is exact); everything else is wrapped.
    pub fn compose(&self, power: f64, dilation: f64, factor: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(CknError::Argument(format!("power {power}")));
        }
        if !(dilation > 0.0 && dilation.is_finite()) {
            return Err(CknError::BadScale(format!("dilation {dilation}")));
        }
        if !(factor != 0.0 && factor.is_finite()) {
            return Err(CknError::Argument(format!("factor {factor}")));
        }
        if let RadialProfile::Grid(g) = self {
            if factor > 0.0 {
                return Ok(RadialProfile::Grid(g.composed(power, dilation, factor)?));
            }
        }
        if let RadialProfile::Composed {
            inner,
            power: p0,
            dilation: l0,
            factor: f0,
        } = self
        {
            // f0·g(l0·(λρ^d)^{p0}) = f0·g(l0 λ^{p0} ρ^{d p0})
            return Ok(RadialProfile::Composed {
                inner: inner.clone(),
                power: power * p0,
                dilation: l0 * dilation.powf(*p0),
                factor: factor * f0,
            });
        }
        Ok(RadialProfile::Composed {
            inner: Box::new(self.clone()),
            power,
            dilation,
            factor,
        })
    }

    /// g(λρ).
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        self.compose(1.0, lambda, 1.0)
    }

    /// c·g(ρ).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.compose(1.0, 1.0, c)
    }

    pub fn bumped(&self, eps: f64, offset: f64, bumps: Vec<Bump>) -> Self {
        RadialProfile::Bumped {
            inner: Box::new(self.clone()),
            eps,
            offset,
            bumps,
        }
    }

    /// ln|g(e^τ)|; −∞ where g vanishes.
    pub fn ln_abs(&self, tau: f64) -> f64 {
        match self {
            RadialProfile::PowerDecay {
                amplitude,
                scale,
                beta,
                gamma,
            } => amplitude.abs().ln() - gamma * softplus(scale.ln() + beta * tau),
            RadialProfile::Compact {
                amplitude,
                scale,
                beta,
                gamma,
            } => {
                let y = scale.ln() + beta * tau;
                if y >= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    amplitude.abs().ln() + gamma * ln_one_minus_exp(y)
                }
            }
            RadialProfile::StretchedExp {
                amplitude,
                scale,
                beta,
            } => amplitude.abs().ln() - (scale.ln() + beta * tau).exp(),
            RadialProfile::Composed {
                inner,
                power,
                dilation,
                factor,
            } => factor.abs().ln() + inner.ln_abs(dilation.ln() + power * tau),
            RadialProfile::Bumped {
                inner,
                eps,
                offset,
                bumps,
            } => {
                let m = 1.0 + eps * (bumps.iter().map(|b| b.value(tau)).sum::<f64>() - offset);
                inner.ln_abs(tau) + m.abs().ln()
            }
            RadialProfile::Grid(g) => g.ln_abs(tau),
        }
    }

    /// ρ g′(ρ)/g(ρ) at ρ = e^τ (0 where g vanishes identically).
    pub fn log_slope(&self, tau: f64) -> f64 {
        match self {
            RadialProfile::PowerDecay {
                scale, beta, gamma, ..
            } => -gamma * beta * crate::special::logistic(scale.ln() + beta * tau),
            RadialProfile::Compact {
                scale, beta, gamma, ..
            } => {
                let y = scale.ln() + beta * tau;
                if y >= 0.0 {
                    0.0
                } else {
                    -gamma * beta / (-y.exp_m1()) * y.exp()
                }
            }
            RadialProfile::StretchedExp { scale, beta, .. } => {
                -beta * (scale.ln() + beta * tau).exp()
            }
            RadialProfile::Composed {
                inner,
                power,
                dilation,
                ..
            } => power * inner.log_slope(dilation.ln() + power * tau),
            RadialProfile::Bumped {
                inner,
                eps,
                offset,
                bumps,
            } => {
                let m = 1.0 + eps * (bumps.iter().map(|b| b.value(tau)).sum::<f64>() - offset);
                let dm = eps * bumps.iter().map(|b| b.slope(tau)).sum::<f64>();
                inner.log_slope(tau) + dm / m
            }
            RadialProfile::Grid(g) => g.log_slope(tau),
        }
    }

    /// ln|g′(e^τ)|.
    pub fn ln_abs_deriv(&self, tau: f64) -> f64 {
        match self {
            RadialProfile::Grid(g) => g.ln_abs_deriv(tau),
            RadialProfile::Compact {
                amplitude,
                scale,
                beta,
                gamma,
            } => {
                // |g′| = |A|γβ e^y (1 − e^y)^{γ−1} / ρ, written without the
                // cancellation of ln g + ln|slope| near the edge
                let y = scale.ln() + beta * tau;
                if y >= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    amplitude.abs().ln()
                        + (gamma * beta).ln()
                        + y
                        + (gamma - 1.0) * ln_one_minus_exp(y)
                        - tau
                }
            }
            RadialProfile::Composed {
                inner,
                power,
                dilation,
                factor,
            } => {
                factor.abs().ln()
                    + inner.ln_abs_deriv(dilation.ln() + power * tau)
                    + (dilation * power).ln()
                    + (power - 1.0) * tau
            }
            _ => {
                let s = self.log_slope(tau);
                if s == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.ln_abs(tau) + s.abs().ln() - tau
                }
            }
        }
    }

    /// Sign of g (profiles do not change sign).
    pub fn sign(&self) -> f64 {
        match self {
            RadialProfile::PowerDecay { amplitude, .. }
            | RadialProfile::Compact { amplitude, .. }
            | RadialProfile::StretchedExp { amplitude, .. } => amplitude.signum(),
            RadialProfile::Composed { inner, factor, .. } => inner.sign() * factor.signum(),
            RadialProfile::Bumped { inner, .. } => inner.sign(),
            RadialProfile::Grid(_) => 1.0,
        }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let l = self.ln_abs(rho.ln());
        if l == f64::NEG_INFINITY {
            0.0
        } else {
            self.sign() * l.exp()
        }
    }

    /// Sign of g′ at ρ = e^τ.
    pub fn deriv_sign(&self, tau: f64) -> f64 {
        match self {
            RadialProfile::Grid(g) => g.deriv_sign(tau),
            RadialProfile::Composed {
                inner,
                power,
                dilation,
                factor,
            } => factor.signum() * inner.deriv_sign(dilation.ln() + power * tau),
            _ => {
                let s = self.log_slope(tau);
                if s == 0.0 {
                    0.0
                } else {
                    self.sign() * s.signum()
                }
            }
        }
    }

    pub fn deriv(&self, rho: f64) -> f64 {
        let tau = rho.ln();
        let l = self.ln_abs_deriv(tau);
        if l == f64::NEG_INFINITY {
            return 0.0;
        }
        self.deriv_sign(tau) * l.exp()
    }

    /// g(ρ) ~ ρ^{origin_order} as ρ → 0.
    pub fn origin_order(&self) -> f64 {
        match self {
            RadialProfile::PowerDecay { .. }
            | RadialProfile::Compact { .. }
            | RadialProfile::StretchedExp { .. } => 0.0,
            RadialProfile::Composed { inner, power, .. } => power * inner.origin_order(),
            RadialProfile::Bumped { inner, .. } => inner.origin_order(),
            RadialProfile::Grid(g) => g.origin_order(),
        }
    }

    /// g(ρ) ~ ρ^{tail_order} as ρ → ∞; −∞ for compact support or
    /// faster-than-power decay.
    pub fn tail_order(&self) -> f64 {
        match self {
            RadialProfile::PowerDecay { beta, gamma, .. } => -beta * gamma,
            RadialProfile::Compact { .. } | RadialProfile::StretchedExp { .. } => f64::NEG_INFINITY,
            RadialProfile::Composed { inner, power, .. } => power * inner.tail_order(),
            RadialProfile::Bumped { inner, .. } => inner.tail_order(),
            RadialProfile::Grid(g) => g.tail_order(),
        }
    }

    /// g′(ρ) ~ ρ^{order} as ρ → 0; +∞ if g′ vanishes near the origin.
    pub fn deriv_origin_order(&self) -> f64 {
        match self {
            RadialProfile::PowerDecay { beta, .. }
            | RadialProfile::Compact { beta, .. }
            | RadialProfile::StretchedExp { beta, .. } => beta - 1.0,
            RadialProfile::Composed { inner, power, .. } => {
                power * inner.deriv_origin_order() + power - 1.0
            }
            RadialProfile::Bumped { inner, .. } => inner.deriv_origin_order(),
            RadialProfile::Grid(g) => {
                if g.origin_order() == 0.0 {
                    f64::INFINITY
                } else {
                    g.origin_order() - 1.0
                }
            }
        }
    }

    /// g′(ρ) ~ ρ^{order} as ρ → ∞.
    pub fn deriv_tail_order(&self) -> f64 {
        match self {
            RadialProfile::PowerDecay { beta, gamma, .. } => -beta * gamma - 1.0,
            RadialProfile::Compact { .. } | RadialProfile::StretchedExp { .. } => f64::NEG_INFINITY,
            RadialProfile::Composed { inner, power, .. } => {
                power * inner.deriv_tail_order() + power - 1.0
            }
            RadialProfile::Bumped { inner, .. } => inner.deriv_tail_order(),
            RadialProfile::Grid(g) => {
                if g.tail_order() == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    g.tail_order() - 1.0
                }
            }
        }
    }

    /// Right end of the support, if bounded.
    pub fn support_edge(&self) -> Option<f64> {
        match self {
            RadialProfile::Compact { scale, beta, .. } => Some(scale.powf(-1.0 / beta)),
            RadialProfile::Composed {
                inner,
                power,
                dilation,
                ..
            } => inner
                .support_edge()
                .map(|r| (r / dilation).powf(1.0 / power)),
            RadialProfile::Bumped { inner, .. } => inner.support_edge(),
            _ => None,
        }
    }

    /// τ-coordinates where the profile is only piecewise smooth.
    pub fn breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            RadialProfile::Grid(g) => Some(g.taus().to_vec()),
            RadialProfile::Composed {
                inner,
                power,
                dilation,
                ..
            } => inner.breakpoints().map(|b| {
                b.iter()
                    .map(|t| (t - dilation.ln()) / power)
                    .collect::<Vec<_>>()
            }),
            RadialProfile::Bumped { inner, .. } => inner.breakpoints(),
            _ => None,
        }
    }

    /// Sample onto given nodes as a grid profile with this profile's orders.
    pub fn to_grid(&self, nodes: &[f64]) -> Result<GridProfile> {
        let values: Vec<f64> = nodes.iter().map(|x| self.eval(*x).abs()).collect();
        let (o, t) = (self.origin_order(), self.tail_order());
        if !t.is_finite() {
            return Err(CknError::BadGrid(
                "profile without a power-law tail cannot be sampled onto a grid".into(),
            ));
        }
        GridProfile::new(nodes, &values, o, t)
    }
}

/// n log-spaced nodes on [lo, hi].
pub fn log_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
