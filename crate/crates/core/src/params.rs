//! Parameter tuples (N, p, q, r, s, μ, θ), the interpolation exponent a,
//! regime classification and the auxiliary exponents of the scaling argument.

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};

/// Relative slack used for equality constraints and for the inclusive side of
/// regime boundaries. Strict inequalities get no slack.
pub const EQ_TOL: f64 = 1e-12;

/// Parameter tuple as read from JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    #[serde(rename = "N")]
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub mu: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

/// The full inequality parameterization with a recomputed from the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CknParams {
    #[serde(rename = "N")]
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub mu: f64,
    pub theta: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    C1,
    C2,
    C3,
    General,
    Invalid,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::C1 => "C1",
            Regime::C2 => "C2",
            Regime::C3 => "C3",
            Regime::General => "General",
            Regime::Invalid => "Invalid",
        };
        f.write_str(s)
    }
}

/// Result of `validate`: the tuple, its regime, and for `Invalid` the
/// constraints that failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classified {
    pub params: CknParams,
    pub regime: Regime,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    T5,
    T6,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub d: f64,
    /// Np − q(N−p) on the T5 branch, Np − r(N−p) on the T6 branch.
    pub delta: Option<f64>,
    pub m: f64,
    pub n: f64,
    pub prefactor_exp: f64,
}

impl DerivedExponents {
    /// d^{prefactor_exp}.
    pub fn prefactor(&self) -> f64 {
        (self.prefactor_exp * self.d.ln()).exp()
    }
}

pub fn approx_eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= EQ_TOL * 1f64.max(x.abs()).max(y.abs())
}

fn approx_le(x: f64, y: f64) -> bool {
    x <= y || approx_eq(x, y)
}

/// a = [(N−θ)r − (N−s)q]·p / ([(N−θ)p − (N−μ−p)q]·r).
pub fn interpolation_exponent(
    n: f64,
    p: f64,
    q: f64,
    r: f64,
    s: f64,
    mu: f64,
    theta: f64,
) -> Result<f64> {
    let num = ((n - theta) * r - (n - s) * q) * p;
    let den = ((n - theta) * p - (n - mu - p) * q) * r;
    let scale = ((n - theta) * p)
        .abs()
        .max(((n - mu - p) * q).abs())
        .max(1.0)
        * r.abs();
    if den.abs() <= 1e-14 * scale {
        return Err(CknError::DegenerateDenominator(format!(
            "(N-theta)p - (N-mu-p)q = {} with r = {r}",
            den / r
        )));
    }
    Ok(num / den)
}

impl CknParams {
    pub fn new(n: f64, p: f64, q: f64, r: f64, s: f64, mu: f64, theta: f64) -> Result<Self> {
        for (name, v) in [
            ("N", n),
            ("p", p),
            ("q", q),
            ("r", r),
            ("s", s),
            ("mu", mu),
            ("theta", theta),
        ] {
            if !v.is_finite() {
                return Err(CknError::NonFinite(format!("parameter {name} = {v}")));
            }
        }
        let mut a = interpolation_exponent(n, p, q, r, s, mu, theta)?;
        // endpoints reached up to rounding are the endpoints
        for end in [0.0, 1.0] {
            if approx_eq(a, end) {
                a = end;
            }
        }
        Ok(CknParams {
            n,
            p,
            q,
            r,
            s,
            mu,
            theta,
            a,
        })
    }

    pub fn from_raw(raw: &RawParams) -> Result<Self> {
        CknParams::new(raw.n, raw.p, raw.q, raw.r, raw.s, raw.mu, raw.theta)
    }

    /// Same exponents, different weight powers; a is recomputed.
    pub fn with_weights(&self, s: f64, mu: f64, theta: f64) -> Result<Self> {
        CknParams::new(self.n, self.p, self.q, self.r, s, mu, theta)
    }

    /// d = (N−p)/(N−p−μ).
    pub fn d(&self) -> Result<f64> {
        let den = self.n - self.p - self.mu;
        if den <= 0.0 {
            return Err(CknError::HardyDenominator(den));
        }
        Ok((self.n - self.p) / den)
    }

    /// Weights (N+sd−Nd, 0, N+θd−Nd) of the unweighted-gradient problem
    /// reached through the transform with d = (N−p)/(N−p−μ).
    pub fn transformed(&self) -> Result<Self> {
        let d = self.d()?;
        let n = self.n;
        self.with_weights(n + self.s * d - n * d, 0.0, n + self.theta * d - n * d)
    }

    /// Nμ/(N−p), the lower endpoint for s in C1/C3.
    pub fn critical_s(&self) -> f64 {
        self.n * self.mu / (self.n - self.p)
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            n: self.n,
            p: self.p,
            q: self.q,
            r: self.r,
            s: self.s,
            mu: self.mu,
            theta: self.theta,
            a: Some(self.a),
        }
    }
}

struct Checks(Vec<String>);

impl Checks {
    fn new() -> Self {
        Checks(Vec::new())
    }
    fn require(&mut self, ok: bool, what: &str) {
        if !ok {
            self.0.push(format!("{what} violated"));
        }
    }
    fn ok(&self) -> bool {
        self.0.is_empty()
    }
}

fn general_checks(c: &CknParams) -> Checks {
    let mut k = Checks::new();
    k.require(c.n >= 2.0, "N >= 2");
    k.require(c.p > 1.0, "p > 1");
    k.require(c.p < c.n, "p < N");
    k.require(c.q >= 1.0, "q >= 1");
    k.require(c.r > 0.0, "r > 0");
    k.require(c.mu < c.n, "mu < N");
    k.require(c.theta < c.n, "theta < N");
    k.require(c.s < c.n, "s < N");
    k.require(c.a >= 0.0 && c.a <= 1.0, "0 <= a <= 1");
    k
}

fn c1_checks(c: &CknParams) -> Checks {
    let mut k = Checks::new();
    let crit = c.critical_s();
    k.require(c.p > 1.0, "p > 1");
    k.require(c.mu >= 0.0, "mu >= 0");
    k.require(c.p + c.mu < c.n, "p + mu < N");
    k.require(approx_le(c.theta, crit), "theta <= N mu/(N-p)");
    k.require(approx_le(crit, c.s), "N mu/(N-p) <= s");
    k.require(c.s < c.n, "s < N");
    k.require(c.q >= 1.0 || approx_eq(c.q, 1.0), "q >= 1");
    k.require(c.q < c.r, "q < r");
    k.require(c.r < c.n * c.p / (c.n - c.p), "r < Np/(N-p)");
    k.require(c.a >= 0.0 && c.a <= 1.0, "0 <= a <= 1");
    k
}

fn c2_checks(c: &CknParams) -> Checks {
    let mut k = Checks::new();
    k.require(approx_eq(c.p, 2.0), "p = 2");
    k.require(c.mu >= 0.0, "mu >= 0");
    k.require(2.0 + c.mu < c.n, "2 + mu < N");
    k.require(2.0 < c.r, "2 < r");
    k.require(approx_eq(c.r, 2.0 * (c.q - 1.0)), "r = 2(q-1)");
    k.require(c.r < 2.0 * c.n / (c.n - 2.0), "r < 2N/(N-2)");
    k.require(approx_eq(c.s, c.theta), "s = theta");
    k.require(c.s > c.n * c.mu / (c.n - 2.0), "s > N mu/(N-2)");
    k.require(c.s < c.mu + 2.0, "s < mu + 2");
    k
}

fn c3_checks(c: &CknParams) -> Checks {
    let mut k = Checks::new();
    k.require(c.p > 1.0, "p > 1");
    k.require(c.mu >= 0.0, "mu >= 0");
    k.require(c.p + c.mu < c.n, "p + mu < N");
    let ratio = c.s / c.r;
    k.require(approx_le(c.mu / c.p, ratio), "mu/p <= s/r");
    k.require(approx_le(ratio, c.mu / c.p + 1.0), "s/r <= mu/p + 1");
    let r_star = (c.n - c.s) * c.p / (c.n - c.mu - c.p);
    k.require(approx_eq(c.r, r_star), "r = (N-s)p/(N-mu-p)");
    k
}

/// Classify a tuple. C2 is tested first, then C3, then C1. C2 and C1 are
/// disjoint (s = θ > Nμ/(N−2) against θ ≤ Nμ/(N−p) ≤ s); a = 1 tuples with
/// θ below the critical value satisfy the C1 inequalities as well and are
/// reported as C3, the more specific label.
pub fn classify(params: &CknParams) -> Classified {
    let general = general_checks(params);
    if !general.ok() {
        let mut violations = general.0;
        for v in c1_checks(params).0 {
            if !violations.contains(&v) {
                violations.push(v);
            }
        }
        return Classified {
            params: *params,
            regime: Regime::Invalid,
            violations,
        };
    }
    let regime = if c2_checks(params).ok() {
        Regime::C2
    } else if c3_checks(params).ok() {
        Regime::C3
    } else if c1_checks(params).ok() {
        Regime::C1
    } else {
        Regime::General
    };
    Classified {
        params: *params,
        regime,
        violations: Vec::new(),
    }
}

/// Validate a raw tuple: recompute a, cross-check any supplied a, classify.
pub fn validate(raw: &RawParams) -> Result<Classified> {
    let params = CknParams::from_raw(raw)?;
    let mut out = classify(&params);
    if let Some(given) = raw.a {
        if !given.is_finite() {
            return Err(CknError::NonFinite(format!("parameter a = {given}")));
        }
        if !approx_eq(given, params.a) {
            out.regime = Regime::Invalid;
            out.violations.push(format!(
                "supplied a = {given} disagrees with the balance value {}",
                params.a
            ));
        }
    }
    Ok(out)
}

/// Exponents without a branch-specific δ.
pub fn exponents(params: &CknParams) -> Result<DerivedExponents> {
    let c = params;
    let d = c.d()?;
    let (n, p, q, r, a) = (c.n, c.p, c.q, c.r, c.a);
    let nds = n * d - c.s * d;
    let m = nds / r * p + p - n;
    let nn = n * d - c.theta * d - q * nds / r;
    let pm1 = (p - 1.0) / p;
    let prefactor_exp = 1.0 / r + pm1 - (1.0 - a) / q - pm1 * (1.0 - a);
    Ok(DerivedExponents {
        d,
        delta: None,
        m,
        n: nn,
        prefactor_exp,
    })
}

/// Exponents together with the branch δ, after checking the branch bounds
/// (q > p for T5, 2 − 1/p < r < p for T6).
pub fn derive(params: &CknParams, branch: Branch) -> Result<DerivedExponents> {
    let mut e = exponents(params)?;
    let c = params;
    match branch {
        Branch::T5 => {
            if !(c.q > c.p) {
                return Err(CknError::BranchMismatch(format!(
                    "T5 branch needs q > p, got q = {}, p = {}",
                    c.q, c.p
                )));
            }
            e.delta = Some(c.n * c.p - c.q * (c.n - c.p));
        }
        Branch::T6 => {
            if !(2.0 - 1.0 / c.p < c.r && c.r < c.p) {
                return Err(CknError::BranchMismatch(format!(
                    "T6 branch needs 2 - 1/p < r < p, got r = {}, p = {}",
                    c.r, c.p
                )));
            }
            e.delta = Some(c.n * c.p - c.r * (c.n - c.p));
        }
    }
    Ok(e)
}

/// T5 branch tuple for given (N, p, q, μ): θ = s = Nμ/(N−p), r = p(q−1)/(p−1).
pub fn t5_params(n: f64, p: f64, q: f64, mu: f64) -> Result<CknParams> {
    let s = n * mu / (n - p);
    CknParams::new(n, p, q, p * (q - 1.0) / (p - 1.0), s, mu, s)
}

/// T6 branch tuple for given (N, p, r, μ): θ = s = Nμ/(N−p), q = p(r−1)/(p−1).
pub fn t6_params(n: f64, p: f64, r: f64, mu: f64) -> Result<CknParams> {
    let s = n * mu / (n - p);
    CknParams::new(n, p, p * (r - 1.0) / (p - 1.0), r, s, mu, s)
}

/// a = 1 tuple for given (N, p, μ, s): r = (N−s)p/(N−μ−p). The interpolation
/// pair (q, θ) drops out when a = 1; q = 1, θ = 0 are used as placeholders.
pub fn a1_params(n: f64, p: f64, mu: f64, s: f64) -> Result<CknParams> {
    let r = (n - s) * p / (n - mu - p);
    CknParams::new(n, p, 1.0, r, s, mu, 0.0)
}

/// C2 tuple for given (N, q, μ, s): p = 2, r = 2(q−1), θ = s.
pub fn c2_params(n: f64, q: f64, mu: f64, s: f64) -> Result<CknParams> {
    CknParams::new(n, 2.0, q, 2.0 * (q - 1.0), s, mu, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: f64, p: f64, q: f64, r: f64, s: f64, mu: f64, theta: f64) -> RawParams {
        RawParams {
            n,
            p,
            q,
            r,
            s,
            mu,
            theta,
            a: None,
        }
    }

    #[test]
    fn half_interpolation_in_c1() {
        let c = validate(&raw(3.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((c.params.a - 0.5).abs() < 1e-15);
        assert_eq!(c.regime, Regime::C1);
    }

    #[test]
    fn a_equal_one_is_c3() {
        let c = validate(&raw(4.0, 2.0, 1.0, 2.0, 3.0, 1.0, 3.0)).unwrap();
        assert!((c.params.a - 1.0).abs() < 1e-15);
        assert_eq!(c.regime, Regime::C3);
    }

    #[test]
    fn q_not_below_r_is_invalid() {
        let c = validate(&raw(3.0, 2.0, 5.0, 4.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(c.regime, Regime::Invalid);
        assert!(
            c.violations.iter().any(|v| v == "q < r violated"),
            "{:?}",
            c.violations
        );
    }

    #[test]
    fn strict_bound_equality_is_excluded() {
        // q = r sits on a strict inequality
        let c = classify(&CknParams::new(3.0, 2.0, 4.0, 4.0, 0.0, 0.0, 0.0).unwrap());
        assert_ne!(c.regime, Regime::C1);
    }

    #[test]
    fn inclusive_boundary_is_inside() {
        let p = t5_params(4.0, 2.0, 2.5, 0.5).unwrap();
        assert_eq!(classify(&p).regime, Regime::C1);
    }

    #[test]
    fn degenerate_denominator() {
        // (N-θ)p = (N-μ-p)q: 3·2 = 1·6
        let e = CknParams::new(3.0, 2.0, 6.0, 7.0, 0.0, 0.0, 0.0).unwrap_err();
        assert_eq!(e.code(), "degenerate-denominator");
    }

    #[test]
    fn supplied_a_mismatch_is_invalid() {
        let mut r = raw(3.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0);
        r.a = Some(0.4);
        assert_eq!(validate(&r).unwrap().regime, Regime::Invalid);
        r.a = Some(0.5);
        assert_eq!(validate(&r).unwrap().regime, Regime::C1);
    }

    #[test]
    fn derived_examples() {
        let c = CknParams::new(4.0, 2.0, 3.0, 3.5, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(exponents(&c).unwrap().d, 2.0);
        let c = t5_params(3.0, 2.0, 3.0, 0.0).unwrap();
        let e = derive(&c, Branch::T5).unwrap();
        assert_eq!(e.delta, Some(3.0));
        assert_eq!(e.d, 1.0);
        assert_eq!(e.prefactor(), 1.0);
    }

    #[test]
    fn branch_checks() {
        let c = CknParams::new(3.0, 2.0, 1.5, 2.5, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(
            derive(&c, Branch::T5).unwrap_err().code(),
            "branch-mismatch"
        );
        let c = t6_params(3.0, 2.0, 2.0, 0.0).unwrap();
        assert_eq!(
            derive(&c, Branch::T6).unwrap_err().code(),
            "branch-mismatch"
        );
        let c = CknParams::new(3.0, 2.0, 3.0, 4.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(exponents(&c).unwrap_err().code(), "hardy-denominator");
    }

    #[test]
    fn c2_tuple() {
        // N=5, μ=0.5: Nμ/(N−2) = 5/6, s must lie in (5/6, 2.5)
        let c = c2_params(5.0, 2.4, 0.5, 1.0).unwrap();
        assert_eq!(classify(&c).regime, Regime::C2);
    }

    #[test]
    fn a1_helper_gives_a_one() {
        let c = a1_params(5.0, 2.0, 0.5, 1.5).unwrap();
        assert_eq!(c.a, 1.0);
        assert_eq!(classify(&c).regime, Regime::C3);
    }
}
