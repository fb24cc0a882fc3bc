//! Grid profiles: shape-preserving cubic Hermite interpolation in τ = ln ρ
//! with power-law extensions beyond the first and last node.
//!
//! Strictly positive data are interpolated as ln g (so the power-law tails
//! are straight lines in the same coordinates); data containing zeros are
//! interpolated as g itself.

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};

pub const MIN_NODES: usize = 8;

/// On-disk form: `{"points": [[node, value], ...], "origin_order": o, "tail_order": t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: Vec<[f64; 2]>,
    pub origin_order: f64,
    pub tail_order: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// interpolate ln g
    Log,
    /// interpolate g
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct GridProfile {
    taus: Vec<f64>,
    values: Vec<f64>,
    origin_order: f64,
    tail_order: f64,
    #[serde(skip)]
    mode: Mode,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl TryFrom<GridSpec> for GridProfile {
    type Error = CknError;
    fn try_from(spec: GridSpec) -> Result<Self> {
        let (nodes, values): (Vec<f64>, Vec<f64>) =
            spec.points.iter().map(|p| (p[0], p[1])).unzip();
        GridProfile::new(&nodes, &values, spec.origin_order, spec.tail_order)
    }
}

impl From<GridProfile> for GridSpec {
    fn from(g: GridProfile) -> Self {
        GridSpec {
            points: g
                .taus
                .iter()
                .zip(&g.values)
                .map(|(t, v)| [t.exp(), *v])
                .collect(),
            origin_order: g.origin_order,
            tail_order: g.tail_order,
        }
    }
}

/// Monotone cubic Hermite slopes (Fritsch–Butland weighted harmonic means,
/// three-point shape-preserving end conditions).
pub(crate) fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        m[i] = interior_slope(x, y, i);
    }
    m[0] = end_slope(x[1] - x[0], x[2] - x[1], secant(x, y, 0), secant(x, y, 1));
    m[n - 1] = end_slope(
        x[n - 1] - x[n - 2],
        x[n - 2] - x[n - 3],
        secant(x, y, n - 2),
        secant(x, y, n - 3),
    );
    m
}

#[inline]
fn secant(x: &[f64], y: &[f64], i: usize) -> f64 {
    (y[i + 1] - y[i]) / (x[i + 1] - x[i])
}

#[inline]
pub(crate) fn interior_slope(x: &[f64], y: &[f64], i: usize) -> f64 {
    let (d0, d1) = (secant(x, y, i - 1), secant(x, y, i));
    if d0 * d1 <= 0.0 {
        return 0.0;
    }
    let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
    (w1 + w2) / (w1 / d0 + w2 / d1)
}

#[inline]
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Slope at node i given the full arrays (used for local updates).
pub(crate) fn slope_at(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    if i == 0 {
        end_slope(x[1] - x[0], x[2] - x[1], secant(x, y, 0), secant(x, y, 1))
    } else if i == n - 1 {
        end_slope(
            x[n - 1] - x[n - 2],
            x[n - 2] - x[n - 3],
            secant(x, y, n - 2),
            secant(x, y, n - 3),
        )
    } else {
        interior_slope(x, y, i)
    }
}

/// Cubic Hermite value and derivative on [x0, x1].
#[inline]
pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
    let d00 = 6.0 * t2 - 6.0 * t;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = -6.0 * t2 + 6.0 * t;
    let d11 = 3.0 * t2 - 2.0 * t;
    let dv = (d00 * y0 + d01 * y1) / h + d10 * m0 + d11 * m1;
    (v, dv)
}

impl GridProfile {
    pub fn new(nodes: &[f64], values: &[f64], origin_order: f64, tail_order: f64) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(CknError::BadGrid(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.len() < MIN_NODES {
            return Err(CknError::BadGrid(format!(
                "{} nodes, at least {MIN_NODES} required",
                nodes.len()
            )));
        }
        if !(origin_order.is_finite() && tail_order.is_finite()) {
            return Err(CknError::BadGrid("tail orders must be finite".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(CknError::BadGrid(format!(
                    "nodes must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(nodes[0] > 0.0) || !nodes[nodes.len() - 1].is_finite() {
            return Err(CknError::BadGrid(
                "nodes must be positive and finite".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CknError::BadGrid(format!(
                "value {v} is not a finite nonnegative number"
            )));
        }
        let taus: Vec<f64> = nodes.iter().map(|x| x.ln()).collect();
        let mode = if values.iter().all(|v| *v > 0.0) {
            Mode::Log
        } else {
            Mode::Linear
        };
        let ys: Vec<f64> = match mode {
            Mode::Log => values.iter().map(|v| v.ln()).collect(),
            Mode::Linear => values.to_vec(),
        };
        let slopes = pchip_slopes(&taus, &ys);
        Ok(GridProfile {
            taus,
            values: values.to_vec(),
            origin_order,
            tail_order,
            mode,
            ys,
            slopes,
        })
    }

    /// Positive profile from log-values at given τ nodes.
    pub fn from_log_values(
        taus: &[f64],
        logs: &[f64],
        origin_order: f64,
        tail_order: f64,
    ) -> Result<Self> {
        if let Some(l) = logs.iter().find(|l| !l.is_finite()) {
            return Err(CknError::BadGrid(format!("log-value {l}")));
        }
        let nodes: Vec<f64> = taus.iter().map(|t| t.exp()).collect();
        // validate with values clamped away from underflow; the log data
        // stays authoritative
        let clamped: Vec<f64> = logs
            .iter()
            .map(|l| l.exp().max(f64::MIN_POSITIVE))
            .collect();
        let mut g = GridProfile::new(&nodes, &clamped, origin_order, tail_order)?;
        g.values = logs.iter().map(|l| l.exp()).collect();
        g.mode = Mode::Log;
        g.taus = taus.to_vec();
        g.ys = logs.to_vec();
        g.slopes = pchip_slopes(&g.taus, &g.ys);
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.taus.iter().map(|t| t.exp()).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin_order(&self) -> f64 {
        self.origin_order
    }

    pub fn tail_order(&self) -> f64 {
        self.tail_order
    }

    /// True when the interpolated quantity is ln g.
    pub fn is_log(&self) -> bool {
        self.mode == Mode::Log
    }

    /// Grid of ρ ↦ factor·g(λρ^d) for factor > 0: exact, since the Hermite
    /// construction commutes with affine changes of τ and of the data.
    pub fn composed(&self, power: f64, dilation: f64, factor: f64) -> Result<Self> {
        if !(power > 0.0 && dilation > 0.0 && factor > 0.0) {
            return Err(CknError::Argument(format!(
                "grid composition needs positive power, dilation and factor, got {power}, {dilation}, {factor}"
            )));
        }
        let shift = dilation.ln();
        let taus: Vec<f64> = self.taus.iter().map(|t| (t - shift) / power).collect();
        let mut g = self.clone();
        g.taus = taus;
        g.values = self.values.iter().map(|v| factor * v).collect();
        g.origin_order = self.origin_order * power;
        g.tail_order = self.tail_order * power;
        match self.mode {
            Mode::Log => {
                let lf = factor.ln();
                g.ys = self.ys.iter().map(|y| y + lf).collect();
                g.slopes = self.slopes.iter().map(|m| m * power).collect();
            }
            Mode::Linear => {
                g.ys = g.values.clone();
                g.slopes = self.slopes.iter().map(|m| m * power * factor).collect();
            }
        }
        Ok(g)
    }

    /// Interpolated y and dy/dτ at τ (y = ln g or g depending on mode).
    fn interp(&self, tau: f64) -> (f64, f64) {
        let n = self.taus.len();
        let (t0, tn) = (self.taus[0], self.taus[n - 1]);
        if tau <= t0 {
            return self.extend(0, self.origin_order, tau);
        }
        if tau >= tn {
            return self.extend(n - 1, self.tail_order, tau);
        }
        let i = self.taus.partition_point(|t| *t <= tau).min(n - 1) - 1;
        hermite(
            self.taus[i],
            self.taus[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            tau,
        )
    }

    fn extend(&self, i: usize, order: f64, tau: f64) -> (f64, f64) {
        let dt = tau - self.taus[i];
        match self.mode {
            Mode::Log => (self.ys[i] + order * dt, order),
            Mode::Linear => {
                let v = self.ys[i] * (order * dt).exp();
                (v, order * v)
            }
        }
    }

    pub fn ln_abs(&self, tau: f64) -> f64 {
        let (y, _) = self.interp(tau);
        match self.mode {
            Mode::Log => y,
            Mode::Linear => y.abs().ln(),
        }
    }

    pub fn log_slope(&self, tau: f64) -> f64 {
        let (y, dy) = self.interp(tau);
        match self.mode {
            Mode::Log => dy,
            Mode::Linear => {
                if y == 0.0 {
                    0.0
                } else {
                    dy / y
                }
            }
        }
    }

    pub fn ln_abs_deriv(&self, tau: f64) -> f64 {
        let (y, dy) = self.interp(tau);
        match self.mode {
            Mode::Log => y + dy.abs().ln() - tau,
            Mode::Linear => dy.abs().ln() - tau,
        }
    }

    /// Sign of g′ at τ.
    pub fn deriv_sign(&self, tau: f64) -> f64 {
        let (_, dy) = self.interp(tau);
        if dy == 0.0 {
            0.0
        } else {
            dy.signum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn reproduces_a_smooth_profile() {
        let nodes = log_grid(1e-2, 1e2, 80);
        let vals: Vec<f64> = nodes.iter().map(|x| 1.0 / (1.0 + x * x)).collect();
        let g = GridProfile::new(&nodes, &vals, 0.0, -2.0).unwrap();
        for x in log_grid(0.1, 10.0, 333) {
            let want = 1.0 / (1.0 + x * x);
            let got = g.ln_abs(x.ln()).exp();
            assert!((got - want).abs() < 1e-4 * want, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn extension_is_a_power_law() {
        let nodes = log_grid(1.0, 10.0, 10);
        let vals: Vec<f64> = nodes.iter().map(|x| x.powf(-3.0)).collect();
        let g = GridProfile::new(&nodes, &vals, 0.0, -3.0).unwrap();
        let got = g.ln_abs(1000f64.ln()).exp();
        assert!((got - 1e-9).abs() < 1e-20);
        assert!((g.log_slope(1000f64.ln()) + 3.0).abs() < 1e-15);
        assert_eq!(g.log_slope(-5.0), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let n = log_grid(1.0, 2.0, 2);
        assert_eq!(
            GridProfile::new(&n, &[1.0, 1.0], 0.0, -1.0)
                .unwrap_err()
                .code(),
            "bad-grid"
        );
        let mut n = log_grid(1.0, 2.0, 9);
        n.swap(3, 4);
        assert_eq!(
            GridProfile::new(&n, &[1.0; 9], 0.0, -1.0)
                .unwrap_err()
                .code(),
            "bad-grid"
        );
    }

    #[test]
    fn monotone_data_stay_monotone() {
        let nodes = log_grid(0.1, 10.0, 12);
        let vals = [
            1.0, 1.0, 0.99, 0.5, 0.49, 0.1, 0.0999, 0.01, 0.005, 0.001, 0.0009, 0.0001,
        ];
        let g = GridProfile::new(&nodes, &vals, 0.0, -4.0).unwrap();
        let mut last = f64::INFINITY;
        for x in log_grid(0.1, 10.0, 1000) {
            let v = g.ln_abs(x.ln());
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn linear_mode_handles_zeros() {
        let nodes = log_grid(0.1, 3.0, 30);
        let vals: Vec<f64> = nodes
            .iter()
            .map(|x| if *x <= 1.0 { 1.0 } else { 0.0 })
            .collect();
        let g = GridProfile::new(&nodes, &vals, 0.0, 0.0).unwrap();
        assert!(!g.is_log());
        assert_eq!(g.ln_abs(0.5f64.ln()).exp(), 1.0);
        assert_eq!(g.ln_abs(2f64.ln()), f64::NEG_INFINITY);
    }

    #[test]
    fn composition_matches_pointwise_definition() {
        let nodes = log_grid(1e-2, 1e2, 40);
        let vals: Vec<f64> = nodes.iter().map(|x| (1.0 + x).powf(-2.5)).collect();
        let g = GridProfile::new(&nodes, &vals, 0.0, -2.5).unwrap();
        let (d, lam, f) = (1.7, 0.3, 0.8);
        let h = g.composed(d, lam, f).unwrap();
        for x in log_grid(1e-3, 1e3, 101) {
            let want = f.ln() + g.ln_abs((lam * x.powf(d)).ln());
            assert!((h.ln_abs(x.ln()) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let nodes = log_grid(0.1, 10.0, 9);
        let vals: Vec<f64> = nodes.iter().map(|x| (-x).exp()).collect();
        let g = GridProfile::new(&nodes, &vals, 0.0, -8.0).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.starts_with("{\"points\":[["));
        let back: GridProfile = serde_json::from_str(&s).unwrap();
        for x in log_grid(0.05, 20.0, 50) {
            assert!((back.ln_abs(x.ln()) - g.ln_abs(x.ln())).abs() < 1e-12);
        }
    }
}
