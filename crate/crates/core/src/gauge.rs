//! ℓ^ρ gauge norms on R^N and quotients of gauge-radial profiles
//! u(x) = g(‖x‖_ρ).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{integer_dimension, CknError, Result};
use crate::functionals::{quotient_with_measure, QuotientReport};
use crate::params::{classify, CknParams, Regime};
use crate::profiles::RadialProfile;
use crate::quadrature::{integrate_mc_scaled, McEstimate};
use crate::special::ln_gamma;
use crate::transform::quotient_transfer_with_measure;

pub const NON_SMOOTH_GAUGE: &str = "non-smooth-gauge";

/// An ℓ^ρ exponent in [1, ∞]. JSON form is a number or the string "inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho(pub f64);

impl Serialize for Rho {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Rho {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Rho(x)),
            Raw::Text(t) => t.parse::<f64>().map(Rho).map_err(|_| {
                serde::de::Error::custom(format!("rho must be a number or \"inf\", got {t:?}"))
            }),
        }
    }
}

/// The JSON gauge descriptor `{"rho": number | "inf"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeSpec {
    pub rho: Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub rho: Rho,
    #[serde(rename = "N")]
    pub n: usize,
    /// volume of the unit ball {‖x‖ ≤ 1}
    pub kappa: f64,
    pub dual_rho: Rho,
}

impl Gauge {
    pub fn new(rho: f64, n: f64) -> Result<Self> {
        if rho.is_nan() || rho < 1.0 {
            return Err(CknError::NotANorm(rho));
        }
        let n = integer_dimension(n, 1, usize::MAX)?;
        let dual = if rho == 1.0 {
            f64::INFINITY
        } else if rho.is_infinite() {
            1.0
        } else {
            rho / (rho - 1.0)
        };
        Ok(Gauge {
            rho: Rho(rho),
            n,
            kappa: ball_volume(rho, n)?,
            dual_rho: Rho(dual),
        })
    }

    pub fn from_spec(spec: &GaugeSpec, n: f64) -> Result<Self> {
        Gauge::new(spec.rho.0, n)
    }

    pub fn euclidean(n: f64) -> Result<Self> {
        Gauge::new(2.0, n)
    }

    /// ℓ^1 and ℓ^∞ have non-unique dual points on their flat faces.
    pub fn is_smooth(&self) -> bool {
        self.rho.0 > 1.0 && self.rho.0.is_finite()
    }

    pub fn flags(&self) -> Vec<String> {
        if self.is_smooth() {
            Vec::new()
        } else {
            vec![NON_SMOOTH_GAUGE.to_string()]
        }
    }

    /// N κ_N, the angular factor of the gauge-radial reduction.
    pub fn angular(&self) -> f64 {
        self.n as f64 * self.kappa
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.rho.0)
    }

    pub fn dual_norm(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.dual_rho.0)
    }

    /// A subgradient of ‖·‖ at x ≠ 0; its dual norm is 1.
    pub fn norm_gradient(&self, x: &[f64]) -> Vec<f64> {
        let rho = self.rho.0;
        let nx = self.norm(x);
        if rho.is_infinite() {
            let k = (0..x.len())
                .max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()))
                .unwrap_or(0);
            let mut g = vec![0.0; x.len()];
            g[k] = x[k].signum();
            return g;
        }
        if rho == 1.0 {
            return x.iter().map(|v| v.signum()).collect();
        }
        x.iter()
            .map(|v| v.signum() * (v.abs() / nx).powf(rho - 1.0))
            .collect()
    }

    /// Monte Carlo estimate of κ_N: ∫ 1{‖x‖ ≤ 1} dx.
    pub fn ball_volume_mc(&self, samples: usize, seed: u64) -> Result<McEstimate> {
        let f = |x: &[f64]| if self.norm(x) <= 1.0 { 1.0 } else { 0.0 };
        integrate_mc_scaled(&f, 0.0, self.n, samples, seed, 0.5)
    }
}

fn lp_norm(x: &[f64], rho: f64) -> f64 {
    if rho.is_infinite() {
        return x.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let big = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if big == 0.0 {
        return 0.0;
    }
    big * x
        .iter()
        .map(|v| (v.abs() / big).powf(rho))
        .sum::<f64>()
        .powf(1.0 / rho)
}

/// κ_N = 2^N Γ(1+1/ρ)^N / Γ(1+N/ρ), and 2^N for ρ = ∞.
pub fn ball_volume(rho: f64, n: usize) -> Result<f64> {
    if rho.is_nan() || rho < 1.0 {
        return Err(CknError::NotANorm(rho));
    }
    let nf = n as f64;
    if rho.is_infinite() {
        return Ok(2f64.powi(n as i32));
    }
    Ok((nf * 2f64.ln() + nf * ln_gamma(1.0 + 1.0 / rho) - ln_gamma(1.0 + nf / rho)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeQuotientReport {
    #[serde(flatten)]
    pub report: QuotientReport,
    pub rho: Rho,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

fn gauge_regime(params: &CknParams) -> Result<()> {
    match classify(params).regime {
        Regime::C1 | Regime::C3 => Ok(()),
        other => Err(CknError::Invalid(format!(
            "gauge quotients need regime C1 or C3, got {other}"
        ))),
    }
}

/// The quotient at u(x) = g(‖x‖). For gauge-radial u, ‖∇u‖_* = |g′(‖x‖)|,
/// so only the angular factor changes: N κ_N in place of N ω_N.
pub fn gauge_quotient(
    params: &CknParams,
    profile: &RadialProfile,
    gauge: &Gauge,
    tol: f64,
) -> Result<GaugeQuotientReport> {
    gauge_regime(params)?;
    check_dimension(params, gauge)?;
    let report = quotient_with_measure(params, profile, gauge.angular(), tol)?;
    Ok(GaugeQuotientReport {
        report,
        rho: gauge.rho,
        kappa: gauge.kappa,
        flags: gauge.flags(),
    })
}

/// Exponent of κ_N in the gauge quotient: 1/r − a/p − (1−a)/q.
pub fn kappa_exponent(params: &CknParams) -> f64 {
    let a = params.a;
    let tail = if crate::params::approx_eq(a, 1.0) {
        0.0
    } else {
        (1.0 - a) / params.q
    };
    1.0 / params.r - a / params.p - tail
}

fn check_dimension(params: &CknParams, gauge: &Gauge) -> Result<()> {
    if gauge.n as f64 != params.n {
        return Err(CknError::Argument(format!(
            "gauge dimension {} differs from N = {}",
            gauge.n, params.n
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeTransfer {
    /// quotient with weights (N+sd−Nd, 0, N+θd−Nd) at the forward image
    pub q1: f64,
    /// quotient with weights (s, μ, θ) at the profile
    pub q2: f64,
    pub ratio: f64,
    /// d^{prefactor_exp}
    pub expected_ratio: f64,
    pub rho: Rho,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Transfer of the gauge quotient through the transform with
/// d = (N−p)/(N−p−μ) ≥ 1.
pub fn t10_transfer(
    params: &CknParams,
    profile: &RadialProfile,
    gauge: &Gauge,
    tol: f64,
) -> Result<GaugeTransfer> {
    gauge_regime(params)?;
    check_dimension(params, gauge)?;
    let d = params.d()?;
    if d < 1.0 - crate::params::EQ_TOL {
        return Err(CknError::Invalid(format!("transfer needs d >= 1, got {d}")));
    }
    if !(params.a > 0.0 && params.a <= 1.0 + crate::params::EQ_TOL) {
        return Err(CknError::Invalid(format!(
            "transfer needs a in (0, 1], got {}",
            params.a
        )));
    }
    let t = quotient_transfer_with_measure(params, profile, gauge.angular(), tol)?;
    Ok(GaugeTransfer {
        q1: t.transformed,
        q2: t.original,
        ratio: t.ratio,
        expected_ratio: t.expected_ratio,
        rho: gauge.rho,
        flags: gauge.flags(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::quotient_with_tol;
    use crate::params::t5_params;
    use crate::profiles::{make_optimizer, FamilyKind, OptimizerFamily};
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1.0, 2).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(ball_volume(f64::INFINITY, 3).unwrap(), 8.0);
        assert!((ball_volume(2.0, 3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert_eq!(ball_volume(0.5, 2).unwrap_err().code(), "not-a-norm");
        assert_eq!(Gauge::new(0.9, 3.0).unwrap_err().code(), "not-a-norm");
    }

    #[test]
    fn dual_exponents_and_flags() {
        let g = Gauge::new(1.0, 3.0).unwrap();
        assert!(g.dual_rho.0.is_infinite());
        assert_eq!(g.flags(), vec![NON_SMOOTH_GAUGE.to_string()]);
        let g = Gauge::new(3.0, 3.0).unwrap();
        assert!((g.dual_rho.0 - 1.5).abs() < 1e-15);
        assert!(g.flags().is_empty());
    }

    #[test]
    fn norm_gradient_has_unit_dual_norm() {
        let x = [0.3, -1.2, 0.7];
        for rho in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let g = Gauge::new(rho, 3.0).unwrap();
            let grad = g.norm_gradient(&x);
            assert!((g.dual_norm(&grad) - 1.0).abs() < 1e-14, "rho = {rho}");
            let pairing: f64 = grad.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((pairing - g.norm(&x)).abs() < 1e-14, "rho = {rho}");
        }
    }

    #[test]
    fn json_round_trip() {
        let s: GaugeSpec = serde_json::from_str(r#"{"rho": "inf"}"#).unwrap();
        assert!(s.rho.0.is_infinite());
        let s: GaugeSpec = serde_json::from_str(r#"{"rho": 1.5}"#).unwrap();
        assert_eq!(s.rho.0, 1.5);
        let g = Gauge::new(f64::INFINITY, 2.0).unwrap();
        let v = serde_json::to_value(g).unwrap();
        assert_eq!(v["rho"], "inf");
        assert_eq!(v["dual_rho"], 1.0);
        assert!(serde_json::from_str::<GaugeSpec>(r#"{"rho": "wide"}"#).is_err());
    }

    #[test]
    fn euclidean_gauge_matches_plain_quotient() {
        let c = t5_params(3.0, 2.0, 3.0, 0.5).unwrap();
        let g = make_optimizer(&OptimizerFamily::new(FamilyKind::T5, 1.0, 1.0), &c).unwrap();
        let plain = quotient_with_tol(&c, &g, 1e-12).unwrap().quotient;
        let e = gauge_quotient(&c, &g, &Gauge::euclidean(3.0).unwrap(), 1e-12).unwrap();
        assert!((e.report.quotient / plain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_dependence_is_a_kappa_power() {
        let c = t5_params(3.0, 2.0, 3.0, 0.5).unwrap();
        let g = RadialProfile::power_decay(1.0, 1.0, 2.0, 1.5).unwrap();
        let (g1, g2) = (Gauge::new(1.5, 3.0).unwrap(), Gauge::new(3.0, 3.0).unwrap());
        let q1 = gauge_quotient(&c, &g, &g1, 1e-12).unwrap().report.quotient;
        let q2 = gauge_quotient(&c, &g, &g2, 1e-12).unwrap().report.quotient;
        let want = (g1.kappa / g2.kappa).powf(kappa_exponent(&c));
        assert!((q1 / q2 / want - 1.0).abs() < 1e-11);
    }

    #[test]
    fn transfer_is_trivial_without_weight() {
        let c = t5_params(3.0, 2.0, 3.0, 0.0).unwrap();
        let g = RadialProfile::power_decay(1.0, 1.0, 2.0, 1.5).unwrap();
        let t = t10_transfer(&c, &g, &Gauge::new(1.5, 3.0).unwrap(), 1e-12).unwrap();
        assert!(
            (t.ratio - 1.0).abs() < 1e-12 && t.expected_ratio == 1.0,
            "{t:?}"
        );
    }
}
