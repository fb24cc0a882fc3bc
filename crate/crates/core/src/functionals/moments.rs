//! ∫₀^∞ |g|^k ρ^c dρ and ∫₀^∞ |g′|^k ρ^c dρ for any radial profile.
//!
//! Smooth profiles go straight to the line quadrature. Profiles with
//! breakpoints (grids and anything built from them) are split at the
//! breakpoints: Gauss panels in between, and either closed-form power tails
//! (plain grids) or line quadrature on the two outer pieces.

use crate::error::{CknError, Endpoint, Result};
use crate::profiles::{GridProfile, RadialProfile};
use crate::quadrature::{integrate_radial, Estimate, Integrand, RadialIntegral, Support};

const MAX_DEPTH: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// |g|
    Value,
    /// |g′|
    Gradient,
}

/// τ ↦ ln of the integrand |g|^k or |g′|^k at ρ = e^τ, and its orders.
struct LogField<'a> {
    profile: &'a RadialProfile,
    field: Field,
    k: f64,
}

impl LogField<'_> {
    fn ln(&self, tau: f64) -> f64 {
        let l = match self.field {
            Field::Value => self.profile.ln_abs(tau),
            Field::Gradient => self.profile.ln_abs_deriv(tau),
        };
        if l == f64::NEG_INFINITY {
            l
        } else {
            self.k * l
        }
    }

    fn origin_order(&self) -> f64 {
        self.k
            * match self.field {
                Field::Value => self.profile.origin_order(),
                Field::Gradient => self.profile.deriv_origin_order(),
            }
    }

    fn tail_order(&self) -> f64 {
        self.k
            * match self.field {
                Field::Value => self.profile.tail_order(),
                Field::Gradient => self.profile.deriv_tail_order(),
            }
    }
}

/// ∫₀^∞ |g|^k ρ^power dρ (or with g′), with an error estimate.
pub fn radial_moment(
    profile: &RadialProfile,
    field: Field,
    k: f64,
    power: f64,
    tol: f64,
) -> Result<Estimate> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(CknError::Argument(format!("moment exponent {k}")));
    }
    let f = LogField { profile, field, k };
    if let Some(br) = profile.breakpoints() {
        return piecewise(&f, &br, power, tol, profile);
    }
    let ln = |tau: f64| f.ln(tau);
    let support = match profile.support_edge() {
        Some(edge) => Support::Bounded(edge),
        None => Support::HalfLine,
    };
    integrate_radial(
        &RadialIntegral::new(Integrand::LogAbs(&ln), power)
            .support(support)
            .tolerance(tol)
            .orders(f.origin_order(), f.tail_order()),
    )
}

fn piecewise(
    f: &LogField,
    br: &[f64],
    power: f64,
    tol: f64,
    profile: &RadialProfile,
) -> Result<Estimate> {
    let (t0, tn) = (br[0], br[br.len() - 1]);
    let (o0, o_inf) = (f.origin_order(), f.tail_order());
    if power + o0 <= -1.0 {
        return Err(CknError::DivergentIntegral {
            endpoint: Endpoint::Origin,
        });
    }
    if power + o_inf >= -1.0 {
        return Err(CknError::DivergentIntegral {
            endpoint: Endpoint::Infinity,
        });
    }
    let body = |tau: f64| -> f64 {
        let l = f.ln(tau);
        if l == f64::NEG_INFINITY {
            0.0
        } else {
            (l + (power + 1.0) * tau).exp()
        }
    };
    let (mid, mid_err) = adaptive_panels(br, &body, tol)?;

    let (left, right) = if let RadialProfile::Grid(g) = profile {
        grid_tails(g, f, power)
    } else {
        outer_pieces(f, t0, tn, power, tol, o0, o_inf)?
    };
    let value = mid + left.value + right.value;
    if !value.is_finite() {
        return Err(CknError::NonFinite(format!("moment value {value}")));
    }
    Ok(Estimate {
        value,
        error: mid_err + left.error + right.error,
    })
}

/// Closed-form integrals of the power-law extensions of a grid profile. The
/// extension at the ends has |g| = |g_end|e^{o(τ−τ_end)} and ρ|g′| = |o||g|.
fn grid_tails(g: &GridProfile, f: &LogField, power: f64) -> (Estimate, Estimate) {
    let taus = g.taus();
    let (t0, tn) = (taus[0], taus[taus.len() - 1]);
    let piece = |tau: f64, order: f64, left: bool| -> Estimate {
        let lg = g.ln_abs(tau);
        let (lnv, c) = match f.field {
            Field::Value => (f.k * lg, power),
            Field::Gradient => {
                if order == 0.0 {
                    return Estimate {
                        value: 0.0,
                        error: 0.0,
                    };
                }
                (f.k * (lg + order.abs().ln()), power - f.k)
            }
        };
        if lnv == f64::NEG_INFINITY {
            return Estimate {
                value: 0.0,
                error: 0.0,
            };
        }
        let rate = f.k * order + c + 1.0;
        let v = (lnv + (c + 1.0) * tau).exp() / if left { rate } else { -rate };
        Estimate {
            value: v,
            error: v.abs() * 1e-15,
        }
    };
    (
        piece(t0, g.origin_order(), true),
        piece(tn, g.tail_order(), false),
    )
}

/// Line quadrature on (0, e^{t0}] and [e^{tn}, ∞); the second is mapped to
/// (0, 1] by ρ = e^{tn}/u.
fn outer_pieces(
    f: &LogField,
    t0: f64,
    tn: f64,
    power: f64,
    tol: f64,
    o0: f64,
    o_inf: f64,
) -> Result<(Estimate, Estimate)> {
    let ln = |tau: f64| f.ln(tau);
    let left = integrate_radial(
        &RadialIntegral::new(Integrand::LogAbs(&ln), power)
            .support(Support::Bounded(t0.exp()))
            .tolerance(tol)
            .orders(o0, o_inf),
    )?;
    let ln_u = |tu: f64| f.ln(tn - tu);
    let right = integrate_radial(
        &RadialIntegral::new(Integrand::LogAbs(&ln_u), -power - 2.0)
            .support(Support::Bounded(1.0))
            .tolerance(tol)
            .orders(-o_inf, f64::NEG_INFINITY),
    )?;
    let scale = ((power + 1.0) * tn).exp();
    Ok((
        left,
        Estimate {
            value: right.value * scale,
            error: right.error * scale,
        },
    ))
}

/// Gauss panels between consecutive breakpoints, bisected until the 8- and
/// 5-point rules agree to the tolerance.
fn adaptive_panels(br: &[f64], f: &dyn Fn(f64) -> f64, tol: f64) -> Result<(f64, f64)> {
    let first: Vec<(f64, f64)> = br
        .windows(2)
        .map(|w| crate::quadrature::panel_pair(w[0], w[1], f))
        .collect();
    let total: f64 = first.iter().map(|(v, _)| v.abs()).sum();
    let span = br[br.len() - 1] - br[0];
    let mut value = 0.0;
    let mut err = 0.0;
    for (w, &(v8, v5)) in br.windows(2).zip(&first) {
        let floor = tol * total * (w[1] - w[0]) / span;
        let (v, e) = refine(w[0], w[1], v8, v5, f, tol, floor, 0);
        value += v;
        err += e;
    }
    if !value.is_finite() {
        return Err(CknError::NonFinite(format!("panel sum {value}")));
    }
    Ok((value, err))
}

#[allow(clippy::too_many_arguments)]
fn refine(
    a: f64,
    b: f64,
    v8: f64,
    v5: f64,
    f: &dyn Fn(f64) -> f64,
    tol: f64,
    floor: f64,
    depth: usize,
) -> (f64, f64) {
    let e = (v8 - v5).abs();
    if e <= tol * v8.abs() || e <= floor || depth >= MAX_DEPTH {
        return (v8, e);
    }
    let m = 0.5 * (a + b);
    let (l8, l5) = crate::quadrature::panel_pair(a, m, f);
    let (r8, r5) = crate::quadrature::panel_pair(m, b, f);
    let (lv, le) = refine(a, m, l8, l5, f, tol, 0.5 * floor, depth + 1);
    let (rv, re) = refine(m, b, r8, r5, f, tol, 0.5 * floor, depth + 1);
    (lv + rv, le + re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::log_nodes;

    #[test]
    fn grid_matches_its_source_closely() {
        let g = RadialProfile::power_decay(1.0, 1.0, 2.0, 1.0).unwrap();
        let grid = RadialProfile::Grid(g.to_grid(&log_nodes(1e-3, 1e3, 400)).unwrap());
        for field in [Field::Value, Field::Gradient] {
            let a = radial_moment(&g, field, 2.0, 2.0, 1e-10).unwrap();
            let b = radial_moment(&grid, field, 2.0, 2.0, 1e-10).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-5 * a.value,
                "{field:?} {a:?} {b:?}"
            );
        }
    }

    #[test]
    fn composed_grid_uses_the_generic_outer_pieces() {
        let g = RadialProfile::power_decay(1.0, 1.0, 2.0, 1.0).unwrap();
        let grid = RadialProfile::Grid(g.to_grid(&log_nodes(1e-2, 1e2, 120)).unwrap());
        let flipped = grid.compose(1.0, 1.0, -1.0).unwrap();
        for field in [Field::Value, Field::Gradient] {
            let a = radial_moment(&grid, field, 3.0, 2.0, 1e-11).unwrap();
            let b = radial_moment(&flipped, field, 3.0, 2.0, 1e-11).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-10 * a.value,
                "{field:?} {a:?} {b:?}"
            );
        }
    }

    #[test]
    fn divergent_tail_on_grid() {
        let g = RadialProfile::power_decay(1.0, 1.0, 2.0, 1.0).unwrap();
        let grid = RadialProfile::Grid(g.to_grid(&log_nodes(1e-2, 1e2, 50)).unwrap());
        let e = radial_moment(&grid, Field::Value, 1.0, 2.0, 1e-10).unwrap_err();
        assert_eq!(e.code(), "divergent-integral");
    }
}
