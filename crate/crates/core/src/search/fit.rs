use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::params::CknParams;
use crate::profiles::{log_nodes, FamilyKind, RadialProfile};
use crate::special::{logistic, softplus};

/// Fitted family parameters: (A, B) for the power families, (c, λ) for
/// the a = 1 families. `residual` is max|g − fit| / max|g| over the nodes
/// used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: FamilyKind,
    pub amplitude: f64,
    pub scale: f64,
    pub residual: f64,
}

/// Least squares in log space over the interior nodes (the outer 10% at
/// each end are left out), by damped Gauss–Newton on (ln A, ln B): first on
/// ln g, then on g / max g.
pub fn fit_family(
    profile: &RadialProfile,
    kind: FamilyKind,
    params: &CknParams,
) -> Result<FamilyFit> {
    let (beta, gamma, compact) = kind.shape(params)?;
    let taus: Vec<f64> = match profile {
        RadialProfile::Grid(g) => g.taus().to_vec(),
        _ => log_nodes(1e-3, 1e3, 200).iter().map(|x| x.ln()).collect(),
    };
    let cut = taus.len() / 10;
    if profile.sign() < 0.0 {
        return Err(CknError::Unfittable("profile is negative".into()));
    }
    let mut pts = Vec::new();
    for &t in &taus[cut..taus.len() - cut] {
        let l = profile.ln_abs(t);
        if l.is_finite() {
            pts.push((t, l));
        } else if !compact {
            return Err(CknError::Unfittable(format!(
                "value 0 at rho = {}",
                t.exp()
            )));
        }
    }
    if pts.len() < 4 {
        return Err(CknError::Unfittable(format!(
            "only {} positive interior nodes",
            pts.len()
        )));
    }

    // model ln A + γ·h(ln B + βτ)
    let h = |y: f64| -> (f64, f64) {
        if compact {
            if y >= 0.0 {
                (f64::NEG_INFINITY, f64::NEG_INFINITY)
            } else {
                let e = y.exp();
                ((-y.exp_m1()).ln(), -e / (-y.exp_m1()))
            }
        } else {
            (-softplus(y), -logistic(y))
        }
    };
    let la0 = pts[0].1;
    let lb0 = if compact {
        -beta * (pts[pts.len() - 1].0 + 0.05)
    } else {
        let half = la0 - gamma * 2f64.ln();
        let t = pts.iter().find(|(_, y)| *y <= half).map_or(0.0, |p| p.0);
        -beta * t
    };
    // log-space fit for a robust start, then a fit of the values themselves
    // relative to their maximum, which is what `residual` measures
    let log_resid = |t: f64, y: f64, la: f64, lb: f64| -> (f64, [f64; 2]) {
        let (v, dv) = h(lb + beta * t);
        (y - la - gamma * v, [1.0, gamma * dv])
    };
    let (la, lb) = levenberg_marquardt(&pts, (la0, lb0), &log_resid);
    let gmax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lin_resid = |t: f64, y: f64, la: f64, lb: f64| -> (f64, [f64; 2]) {
        let (v, dv) = h(lb + beta * t);
        let f = (la + gamma * v - gmax).exp();
        let j = if f > 0.0 {
            [f, f * gamma * dv]
        } else {
            [0.0, 0.0]
        };
        ((y - gmax).exp() - f, j)
    };
    let (la, lb) = levenberg_marquardt(&pts, (la, lb), &lin_resid);

    let gmax = gmax.exp();
    let residual = pts
        .iter()
        .map(|(t, y)| {
            let fit = (la + gamma * h(lb + beta * t).0).exp();
            (y.exp() - fit).abs()
        })
        .fold(0.0, f64::max)
        / gmax;
    let (amplitude, scale) = match kind {
        FamilyKind::A1 | FamilyKind::Hse => {
            // A(1+Bρ^β)^{−γ} = c(λ+ρ^β)^{−γ} with λ = 1/B, c = Aλ^γ
            let lambda = (-lb).exp();
            (la.exp() * lambda.powf(gamma), lambda)
        }
        _ => (la.exp(), lb.exp()),
    };
    Ok(FamilyFit {
        family: kind,
        amplitude,
        scale,
        residual,
    })
}

/// Damped Gauss–Newton on two parameters; `model` returns the residual
/// y − f and the gradient of f.
fn levenberg_marquardt(
    pts: &[(f64, f64)],
    start: (f64, f64),
    model: &dyn Fn(f64, f64, f64, f64) -> (f64, [f64; 2]),
) -> (f64, f64) {
    let cost = |la: f64, lb: f64| -> f64 {
        pts.iter()
            .map(|(t, y)| model(*t, *y, la, lb).0.powi(2))
            .sum()
    };
    let (mut la, mut lb) = start;
    let mut c0 = cost(la, lb);
    let mut damp = 1e-3;
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (t, y) in pts {
            let (r, j) = model(*t, *y, la, lb);
            if !r.is_finite() {
                continue;
            }
            for a in 0..2 {
                jtr[a] += j[a] * r;
                for b in 0..2 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while damp < 1e12 {
            let m = [
                [jtj[0][0] * (1.0 + damp), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + damp)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let da = (jtr[0] * m[1][1] - jtr[1] * m[0][1]) / det;
            let db = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
            let c1 = cost(la + da, lb + db);
            if c1.is_finite() && c1 < c0 {
                la += da;
                lb += db;
                let rel = (c0 - c1) / c0.max(1e-300);
                c0 = c1;
                damp = (damp * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            damp *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (la, lb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{a1_params, t5_params, t6_params};
    use crate::profiles::{make_optimizer, OptimizerFamily};

    #[test]
    fn self_fit_recovers_parameters() {
        let c = t5_params(3.0, 2.0, 3.0, 0.5).unwrap();
        let g = make_optimizer(&OptimizerFamily::new(FamilyKind::T5, 2.5, 0.3), &c).unwrap();
        let f = fit_family(&g, FamilyKind::T5, &c).unwrap();
        assert!(f.residual < 1e-12, "{f:?}");
        assert!(
            (f.amplitude - 2.5).abs() < 1e-10 && (f.scale - 0.3).abs() < 1e-10,
            "{f:?}"
        );
    }

    #[test]
    fn compact_and_a_equal_one_self_fits() {
        let c = t6_params(4.0, 2.0, 1.7, 0.5).unwrap();
        let g = make_optimizer(&OptimizerFamily::new(FamilyKind::T6, 1.5, 0.02), &c).unwrap();
        let f = fit_family(&g, FamilyKind::T6, &c).unwrap();
        assert!(f.residual < 1e-10, "{f:?}");
        let c = a1_params(4.0, 2.0, 0.5, 1.0).unwrap();
        let g = make_optimizer(&OptimizerFamily::new(FamilyKind::A1, 3.0, 2.0), &c).unwrap();
        let f = fit_family(&g, FamilyKind::A1, &c).unwrap();
        assert!(
            (f.amplitude - 3.0).abs() < 1e-9 && (f.scale - 2.0).abs() < 1e-9,
            "{f:?}"
        );
    }

    #[test]
    fn gaussian_is_far_from_the_family() {
        let c = t5_params(3.0, 2.0, 3.0, 0.0).unwrap();
        let g = RadialProfile::stretched_exp(1.0, 1.0, 2.0).unwrap();
        let f = fit_family(&g, FamilyKind::T5, &c).unwrap();
        assert!(f.residual > 0.05, "{f:?}");
        let neg = g.scaled(-1.0).unwrap();
        assert_eq!(
            fit_family(&neg, FamilyKind::T5, &c).unwrap_err().code(),
            "unfittable"
        );
    }
}
