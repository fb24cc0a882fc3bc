//! Maximization of the quotient over positive radial grid profiles, fitting
//! of closed-form families to the result, and perturbative stationarity
//! checks of candidate maximizers.

mod fit;
mod objective;
mod stationarity;

pub use fit::{fit_family, FamilyFit};
pub use stationarity::{stationarity_check, StationarityReport, FIRST_ORDER_TOL};

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::functionals::ckn_quotient;
use crate::params::{classify, CknParams, Regime};
use crate::profiles::{log_nodes, FamilyKind, RadialProfile};
use objective::{Objective, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub nodes: usize,
    pub lo: f64,
    pub hi: f64,
    pub max_iterations: usize,
    /// Smallest relative gain for a step to count; below it the search stops.
    pub min_gain: f64,
    /// Stop when the accepted gains over this many iterations sum below
    /// `min_gain`.
    pub window: usize,
    /// L-BFGS memory.
    pub memory: usize,
    /// Newton steps with a finite-difference Hessian after the ascent on
    /// the full grid.
    #[serde(default)]
    pub polish: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            nodes: 200,
            lo: 1e-3,
            hi: 1e3,
            max_iterations: 3000,
            min_gain: 1e-10,
            window: 20,
            memory: 10,
            polish: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_profile: RadialProfile,
    pub best_quotient: f64,
    /// Quadrature error bound of `best_quotient`.
    pub error_bound: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    pub regime: Regime,
    /// Set when the regime has no theory behind a radial search.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exploratory: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_fit: Option<FamilyFit>,
}

/// Random positive decreasing profile: ln g has log-slope
/// −T·logistic(b(τ−c))·(1 + bumps), with T chosen so that all three
/// integrals converge.
pub fn random_profile(params: &CknParams, opts: &SearchOptions) -> Result<RadialProfile> {
    let taus: Vec<f64> = log_nodes(opts.lo, opts.hi, opts.nodes)
        .iter()
        .map(|x| x.ln())
        .collect();
    let obj = Objective::new(params, taus.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ceiling = obj.tail_ceiling;
    let rate = -ceiling * rng.gen_range(1.2..2.5);
    let b = rng.gen_range(1.0..3.0);
    let c = rng.gen_range(-1.0..1.0);
    let bumps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.3..1.5),
                rng.gen_range(-0.4..0.4),
            )
        })
        .collect();
    let slope = |t: f64| -> f64 {
        let m: f64 = bumps
            .iter()
            .map(|(c0, w, a)| a * (-((t - c0) / w).powi(2)).exp())
            .sum();
        -rate * crate::special::logistic(b * (t - c)) * (1.0 + m).max(0.2)
    };
    let mut ys = vec![0.0; taus.len()];
    for i in 1..taus.len() {
        let (t0, t1) = (taus[i - 1], taus[i]);
        // Simpson on each step
        let s = (slope(t0) + 4.0 * slope(0.5 * (t0 + t1)) + slope(t1)) / 6.0;
        ys[i] = ys[i - 1] + s * (t1 - t0);
    }
    let st = obj.state(ys)?;
    Ok(RadialProfile::Grid(obj.to_profile(&st)?))
}

struct Lbfgs {
    mem: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    /// diagonal initial inverse Hessian
    diag: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    fn new(mem: usize) -> Self {
        Lbfgs {
            mem,
            s: VecDeque::new(),
            y: VecDeque::new(),
            diag: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        if dot(&s, &y) <= 1e-14 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            return;
        }
        if self.s.len() == self.mem {
            self.s.pop_front();
            self.y.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
    }

    /// Ascent direction H·g for maximization (g the gradient of the
    /// objective, pairs stored as (step, −Δgradient)).
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        if !self.diag.is_empty() {
            q.iter_mut().zip(&self.diag).for_each(|(v, d)| *v *= d);
        }
        if let (Some(s), Some(y)) = (self.s.back(), self.y.back()) {
            let ydy = if self.diag.is_empty() {
                dot(y, y)
            } else {
                y.iter().zip(&self.diag).map(|(v, d)| v * v * d).sum()
            };
            let gamma = dot(s, y) / ydy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            let beta = rho * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        q
    }
}

/// Remove the components along the constant vector and along the node slopes
/// (the generators of amplitude and dilation, both neutral for Q).
fn project_neutral(v: &mut [f64], slopes: &[f64]) {
    let n = v.len() as f64;
    let ones_mean = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= ones_mean);
    let sm = slopes.iter().sum::<f64>() / n;
    let s: Vec<f64> = slopes.iter().map(|x| x - sm).collect();
    let ss = dot(&s, &s);
    if ss > 0.0 {
        let c = dot(v, &s) / ss;
        v.iter_mut().zip(&s).for_each(|(x, y)| *x -= c * y);
    }
}

/// Relative floor on node weights, bounding the preconditioner's range.
const PRECONDITIONER_FLOOR: f64 = 1e-6;

/// Inverse node weights, floored relative to the largest.
fn preconditioner(obj: &Objective, st: &State) -> Vec<f64> {
    let w = obj.node_weights(st);
    let top = w.iter().fold(0.0f64, |m, v| m.max(*v));
    w.iter()
        .map(|v| 1.0 / v.max(PRECONDITIONER_FLOOR * top))
        .collect()
}

fn normalize(obj: &Objective, st: State, r: f64) -> Result<State> {
    let shift = obj.ln_target(&st) / r;
    obj.state(st.ys.iter().map(|y| y - shift).collect())
}

/// Resample a state so that its target centroid sits at τ = `center`.
fn recenter(obj: &Objective, st: &State, center: f64) -> Result<State> {
    let shift = obj.centroid(st) - center;
    let g = obj.to_profile(st)?;
    obj.state(obj.taus.iter().map(|t| g.ln_abs(t + shift)).collect())
}

/// Newton steps with a finite-difference Hessian of ln Q, taken near the
/// maximum where L-BFGS stalls along the soft shape modes. Components with
/// non-negative curvature are damped to the smallest admissible curvature.
fn polish(obj: &Objective, mut st: State, r: f64, rounds: usize) -> Result<(State, usize)> {
    let n = obj.len();
    let mut accepted = 0;
    for _ in 0..rounds {
        let mut grad = obj.gradient(&st);
        project_neutral(&mut grad, &st.slopes);
        let h = 1e-4;
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut ys = st.ys.clone();
            ys[i] += h;
            let shifted = obj.state(ys)?;
            let mut gi = obj.gradient(&shifted);
            project_neutral(&mut gi, &st.slopes);
            for j in 0..n {
                hess[(i, j)] = (gi[j] - grad[j]) / h;
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let eig = SymmetricEigen::new(hess);
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = 1e-6 * scale;
        let gv = DVector::from_vec(grad.clone());
        let mut dir = DVector::<f64>::zeros(n);
        for k in 0..n {
            let v = eig.eigenvectors.column(k);
            let curvature = (-eig.eigenvalues[k]).max(floor);
            dir += v * (v.dot(&gv) / curvature);
        }
        let mut dir: Vec<f64> = dir.iter().copied().collect();
        project_neutral(&mut dir, &st.slopes);
        let big = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = if big > 1.0 { 1.0 / big } else { 1.0 };
        let mut next = None;
        for _ in 0..30 {
            let ys: Vec<f64> = st.ys.iter().zip(&dir).map(|(y, d)| y + alpha * d).collect();
            if let Ok(cand) = obj.state(ys) {
                if cand.ln_q > st.ln_q {
                    next = Some(cand);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(cand) = next else { break };
        st = normalize(obj, cand, r)?;
        accepted += 1;
    }
    Ok((st, accepted))
}

struct Ascent {
    state: State,
    iterations: usize,
    accepted: usize,
    converged: bool,
}

/// Preconditioned L-BFGS ascent on one grid, keeping the target integral at
/// 1 and the target centroid near the middle of the grid.
fn ascend(obj: &Objective, st: State, r: f64, opts: &SearchOptions) -> Result<Ascent> {
    let mid = 0.5 * (obj.taus[0] + obj.taus[obj.len() - 1]);
    let spacing = obj.taus[1] - obj.taus[0];
    let mut st = st;
    if (obj.centroid(&st) - mid).abs() > 2.0 * spacing {
        st = recenter(obj, &st, mid)?;
    }
    st = normalize(obj, st, r)?;

    let mut mem = Lbfgs::new(opts.memory);
    mem.diag = preconditioner(obj, &st);
    let mut grad = obj.gradient(&st);
    project_neutral(&mut grad, &st.slopes);
    let mut gains: VecDeque<f64> = VecDeque::new();
    let mut accepted = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        // preconditioned L-BFGS direction, then the plain gradient if that
        // yields no acceptable step
        let mut found = None;
        for attempt in 0..2 {
            let mut dir = if attempt == 0 {
                mem.direction(&grad)
            } else {
                mem.reset();
                grad.clone()
            };
            project_neutral(&mut dir, &st.slopes);
            let slope = dot(&dir, &grad);
            if !(slope > 0.0) {
                continue;
            }
            // cap the largest log-value change of a full step
            let big = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut alpha = if mem.s.is_empty() { 0.1 / big } else { 1.0 };
            if alpha * big > 1.0 {
                alpha = 1.0 / big;
            }
            for _ in 0..40 {
                let ys: Vec<f64> = st.ys.iter().zip(&dir).map(|(y, d)| y + alpha * d).collect();
                if let Ok(cand) = obj.state(ys) {
                    let gain = cand.ln_q - st.ln_q;
                    if gain >= 1e-4 * alpha * slope && gain >= opts.min_gain {
                        found = Some((cand, gain, dir, alpha));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if found.is_some() {
                break;
            }
        }
        let Some((cand, gain, dir, alpha)) = found else {
            converged = true;
            break;
        };
        let step: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
        let mut cand = normalize(obj, cand, r)?;
        let mut resampled = false;
        if (obj.centroid(&cand) - mid).abs() > 2.0 * spacing {
            cand = normalize(obj, recenter(obj, &cand, mid)?, r)?;
            resampled = true;
        }
        let mut g_new = obj.gradient(&cand);
        project_neutral(&mut g_new, &cand.slopes);
        if resampled {
            mem.reset();
        } else {
            let dy: Vec<f64> = grad.iter().zip(&g_new).map(|(a, b)| a - b).collect();
            mem.push(step, dy);
        }
        mem.diag = preconditioner(obj, &cand);
        st = cand;
        grad = g_new;
        accepted += 1;
        gains.push_back(gain);
        if gains.len() > opts.window {
            gains.pop_front();
        }
        if gains.len() == opts.window && gains.iter().sum::<f64>() < opts.min_gain {
            converged = true;
            break;
        }
    }
    Ok(Ascent {
        state: st,
        iterations,
        accepted,
        converged,
    })
}

/// Ascend ln Q over the log-values of a grid profile. Without `init` a
/// random decreasing profile from `opts.seed` is the starting point.
pub fn maximize_quotient(
    params: &CknParams,
    init: Option<&RadialProfile>,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let regime = classify(params).regime;
    if regime == Regime::Invalid {
        return Err(CknError::Invalid(format!("{:?}", params.raw())));
    }
    if opts.nodes < 16 || !(opts.lo > 0.0 && opts.hi > opts.lo) {
        return Err(CknError::Argument(format!(
            "search grid of {} nodes on [{}, {}]",
            opts.nodes, opts.lo, opts.hi
        )));
    }
    let start = match init {
        Some(p) => p.clone(),
        None => random_profile(params, opts)?,
    };
    // random starts go coarse to fine, halving the node count down to 25;
    // a supplied profile is refined on the full grid only
    let mut levels = vec![opts.nodes];
    if init.is_none() {
        while levels[levels.len() - 1] / 2 >= 25 {
            levels.push(levels[levels.len() - 1] / 2);
        }
        levels.reverse();
    }
    let mut profile = start;
    let (mut iterations, mut accepted, mut converged) = (0, 0, false);
    for nodes in levels {
        let taus: Vec<f64> = log_nodes(opts.lo, opts.hi, nodes)
            .iter()
            .map(|x| x.ln())
            .collect();
        let obj = Objective::new(params, taus)?;
        let ys: Vec<f64> = obj.taus.iter().map(|t| profile.ln_abs(*t)).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(CknError::Argument(
                "search needs a profile that is positive on the whole grid".into(),
            ));
        }
        let run = ascend(&obj, obj.state(ys)?, params.r, opts)?;
        iterations += run.iterations;
        accepted += run.accepted;
        converged = run.converged;
        let mut state = run.state;
        if nodes == opts.nodes && opts.polish > 0 {
            let (polished, steps) = polish(&obj, state, params.r, opts.polish)?;
            state = polished;
            accepted += steps;
        }
        profile = RadialProfile::Grid(obj.to_profile(&state)?);
    }

    let best = profile;
    let report = ckn_quotient(params, &best)?;
    let family_fit = family_for(params, regime).and_then(|k| fit_family(&best, k, params).ok());
    Ok(SearchResult {
        best_profile: best,
        best_quotient: report.quotient,
        error_bound: report.error_bound,
        iterations,
        accepted_steps: accepted,
        converged,
        regime,
        exploratory: regime == Regime::General,
        family_fit,
    })
}

/// The family a maximizer is expected to follow, where one is known.
pub fn family_for(params: &CknParams, regime: Regime) -> Option<FamilyKind> {
    [FamilyKind::T5, FamilyKind::A1, FamilyKind::T11]
        .into_iter()
        .find(|k| k.shape(params).is_ok())
        .filter(|_| regime != Regime::Invalid)
}
