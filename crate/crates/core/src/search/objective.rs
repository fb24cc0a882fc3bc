//! ln Q as a function of the log-values of a grid profile, with cheap
//! finite-difference gradients: moving one node only touches the Hermite
//! slopes next to it, the four panels around it and the two power tails.

use crate::error::{CknError, Endpoint, Result};
use crate::functionals::Field;
use crate::params::{approx_eq, CknParams};
use crate::profiles::{hermite, pchip_slopes, slope_at, GridProfile};
use crate::quadrature::gauss_legendre;
use crate::special::sphere_area;

/// Margin kept between a fitted tail order and the order at which one of
/// the integrals stops converging.
const ORDER_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
struct Term {
    field: Field,
    k: f64,
    /// exponent of ρ in the radial integrand
    power: f64,
    /// coefficient of ln(integral) in ln Q
    weight: f64,
}

pub(crate) struct Objective {
    pub taus: Vec<f64>,
    terms: Vec<Term>,
    gl_x: Vec<f64>,
    gl_w: Vec<f64>,
    /// nodes used by each tail fit
    window: usize,
    origin_floor: f64,
    pub tail_ceiling: f64,
    /// constant part of ln Q from the angular factor
    ln_const: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct State {
    pub ys: Vec<f64>,
    pub slopes: Vec<f64>,
    /// panels[t][j]: term t on [τ_j, τ_{j+1}]
    panels: Vec<Vec<f64>>,
    pub origin_order: f64,
    pub tail_order: f64,
    tails: Vec<(f64, f64)>,
    totals: Vec<f64>,
    pub ln_q: f64,
}

impl Objective {
    pub fn new(params: &CknParams, taus: Vec<f64>) -> Result<Self> {
        let c = params;
        let a = if approx_eq(c.a, 1.0) { 1.0 } else { c.a };
        let mut terms = vec![
            Term {
                field: Field::Value,
                k: c.r,
                power: c.n - 1.0 - c.s,
                weight: 1.0 / c.r,
            },
            Term {
                field: Field::Gradient,
                k: c.p,
                power: c.n - 1.0 - c.mu,
                weight: -a / c.p,
            },
        ];
        if a != 1.0 {
            terms.push(Term {
                field: Field::Value,
                k: c.q,
                power: c.n - 1.0 - c.theta,
                weight: -(1.0 - a) / c.q,
            });
        }
        // per-term convergence limits on the extension orders
        let mut origin_floor = f64::NEG_INFINITY;
        let mut tail_ceiling = f64::INFINITY;
        for t in &terms {
            let lim = match t.field {
                Field::Value => -(t.power + 1.0) / t.k,
                Field::Gradient => (t.k - t.power - 1.0) / t.k,
            };
            origin_floor = origin_floor.max(lim);
            tail_ceiling = tail_ceiling.min(lim);
        }
        if !(origin_floor < 0.0) {
            return Err(CknError::DivergentIntegral {
                endpoint: Endpoint::Origin,
            });
        }
        let ln_const = terms.iter().map(|t| t.weight).sum::<f64>() * sphere_area(c.n).ln();
        let (gl_x, gl_w) = gauss_legendre(8);
        let window = (taus.len() / 10).max(3);
        Ok(Objective {
            taus,
            terms,
            gl_x,
            gl_w,
            window,
            origin_floor,
            tail_ceiling,
            ln_const,
        })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    /// Least-squares slope of y against τ over a window, clamped so every
    /// integral converges at that end.
    fn fit_orders(&self, ys: &[f64]) -> (f64, f64) {
        let n = self.taus.len();
        let w = self.window;
        let slope = |r: std::ops::Range<usize>| -> f64 {
            let m = r.len() as f64;
            let tx: f64 = self.taus[r.clone()].iter().sum::<f64>() / m;
            let ty: f64 = ys[r.clone()].iter().sum::<f64>() / m;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for i in r {
                sxy += (self.taus[i] - tx) * (ys[i] - ty);
                sxx += (self.taus[i] - tx) * (self.taus[i] - tx);
            }
            sxy / sxx
        };
        let o0 = slope(0..w).max(self.origin_floor + ORDER_MARGIN);
        let oi = slope(n - w..n).min(self.tail_ceiling - ORDER_MARGIN);
        (o0, oi)
    }

    fn panel(&self, t: &Term, j: usize, ys: &[f64], slopes: &[f64]) -> f64 {
        let (x0, x1) = (self.taus[j], self.taus[j + 1]);
        let (c, h) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
        let mut s = 0.0;
        for (xi, wi) in self.gl_x.iter().zip(&self.gl_w) {
            let tau = c + h * xi;
            let (v, dv) = hermite(x0, x1, ys[j], ys[j + 1], slopes[j], slopes[j + 1], tau);
            let l = match t.field {
                Field::Value => t.k * v + (t.power + 1.0) * tau,
                Field::Gradient => {
                    if dv == 0.0 {
                        continue;
                    }
                    t.k * (v + dv.abs().ln()) + (t.power + 1.0 - t.k) * tau
                }
            };
            s += wi * l.exp();
        }
        s * h
    }

    /// Closed-form integrals of the two power-law extensions.
    fn tails(&self, t: &Term, ys: &[f64], o0: f64, oi: f64) -> (f64, f64) {
        let n = self.taus.len();
        let piece = |tau: f64, y: f64, o: f64, left: bool| -> f64 {
            let (lv, c) = match t.field {
                Field::Value => (t.k * y, t.power),
                Field::Gradient => {
                    if o == 0.0 {
                        return 0.0;
                    }
                    (t.k * (y + o.abs().ln()), t.power - t.k)
                }
            };
            let rate = t.k * o + c + 1.0;
            (lv + (c + 1.0) * tau).exp() / if left { rate } else { -rate }
        };
        (
            piece(self.taus[0], ys[0], o0, true),
            piece(self.taus[n - 1], ys[n - 1], oi, false),
        )
    }

    fn ln_q_from(&self, totals: &[f64]) -> f64 {
        self.ln_const
            + self
                .terms
                .iter()
                .zip(totals)
                .map(|(t, v)| t.weight * v.ln())
                .sum::<f64>()
    }

    pub fn state(&self, ys: Vec<f64>) -> Result<State> {
        if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
            return Err(CknError::NonFinite(format!("grid log-value {y}")));
        }
        let slopes = pchip_slopes(&self.taus, &ys);
        let (o0, oi) = self.fit_orders(&ys);
        let n = self.taus.len();
        let mut panels = Vec::with_capacity(self.terms.len());
        let mut tails = Vec::with_capacity(self.terms.len());
        let mut totals = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let p: Vec<f64> = (0..n - 1).map(|j| self.panel(t, j, &ys, &slopes)).collect();
            let tl = self.tails(t, &ys, o0, oi);
            totals.push(p.iter().sum::<f64>() + tl.0 + tl.1);
            panels.push(p);
            tails.push(tl);
        }
        let ln_q = self.ln_q_from(&totals);
        if !ln_q.is_finite() {
            return Err(CknError::NonFinite(format!("ln Q = {ln_q}")));
        }
        Ok(State {
            ys,
            slopes,
            panels,
            origin_order: o0,
            tail_order: oi,
            tails,
            totals,
            ln_q,
        })
    }

    /// ln of the target integral ∫|u|^r|x|^{−s} (without the angular factor).
    pub fn ln_target(&self, st: &State) -> f64 {
        st.totals[0].ln()
    }

    /// Centroid in τ of the target integrand over the grid panels.
    pub fn centroid(&self, st: &State) -> f64 {
        let p = &st.panels[0];
        let (mut num, mut den) = (0.0, 0.0);
        for (j, v) in p.iter().enumerate() {
            num += v * 0.5 * (self.taus[j] + self.taus[j + 1]);
            den += v;
        }
        num / den
    }

    /// Share of each node in the integrals, weighted by the coefficients of
    /// ln Q: a proxy for the diagonal of the Hessian, which spans many
    /// orders of magnitude across the grid.
    pub fn node_weights(&self, st: &State) -> Vec<f64> {
        let n = self.taus.len();
        let mut w = vec![0.0; n];
        for (ti, t) in self.terms.iter().enumerate() {
            let c = t.weight.abs() * t.k / st.totals[ti];
            let p = &st.panels[ti];
            for j in 0..n - 1 {
                w[j] += 0.5 * c * p[j];
                w[j + 1] += 0.5 * c * p[j];
            }
            w[0] += c * st.tails[ti].0;
            w[n - 1] += c * st.tails[ti].1;
        }
        w
    }

    /// Central-difference gradient of ln Q with steps 2e−6(1+|y_i|). A
    /// forward difference is not enough: its O(h) bias along the stiff
    /// oscillatory modes swamps the gradient near the maximum.
    pub fn gradient(&self, st: &State) -> Vec<f64> {
        let n = self.taus.len();
        let mut ys = st.ys.clone();
        let mut slopes = st.slopes.clone();
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let h = 2e-6 * (1.0 + ys[i].abs());
            let y0 = ys[i];
            ys[i] = y0 + h;
            let up = self.moved_ln_q(st, i, &ys, &mut slopes);
            let hp = ys[i] - y0;
            ys[i] = y0 - h;
            let down = self.moved_ln_q(st, i, &ys, &mut slopes);
            let hm = y0 - ys[i];
            grad[i] = (up - down) / (hp + hm);
            ys[i] = y0;
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                slopes[j] = st.slopes[j];
            }
            slopes[0] = st.slopes[0];
            slopes[n - 1] = st.slopes[n - 1];
        }
        grad
    }

    /// ln Q after node i of `st` has moved to ys[i], updating only the
    /// slopes, panels and tails that depend on it. `slopes` comes in equal
    /// to st.slopes around i and is left modified there.
    fn moved_ln_q(&self, st: &State, i: usize, ys: &[f64], slopes: &mut [f64]) -> f64 {
        let n = self.taus.len();
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(n - 1);
        let mut touched: Vec<usize> = (lo..=hi).collect();
        if i <= 2 && !touched.contains(&0) {
            touched.push(0);
        }
        if i + 3 >= n && !touched.contains(&(n - 1)) {
            touched.push(n - 1);
        }
        for &j in &touched {
            slopes[j] = slope_at(&self.taus, ys, j);
        }
        // panels with an endpoint among the touched nodes
        let mut pan: Vec<usize> = Vec::with_capacity(6);
        for &j in &touched {
            if j >= 1 && !pan.contains(&(j - 1)) {
                pan.push(j - 1);
            }
            if j + 1 < n && !pan.contains(&j) {
                pan.push(j);
            }
        }
        let in_window = i < self.window || i >= n - self.window;
        let (o0, oi) = if in_window {
            self.fit_orders(ys)
        } else {
            (st.origin_order, st.tail_order)
        };
        let mut totals = vec![0.0; self.terms.len()];
        for (ti, t) in self.terms.iter().enumerate() {
            let mut tot = st.totals[ti];
            for &j in &pan {
                tot += self.panel(t, j, ys, slopes) - st.panels[ti][j];
            }
            if in_window || i == 0 || i == n - 1 {
                let (l, r) = self.tails(t, ys, o0, oi);
                tot += l + r - st.tails[ti].0 - st.tails[ti].1;
            }
            totals[ti] = tot;
        }
        self.ln_q_from(&totals)
    }

    pub fn to_profile(&self, st: &State) -> Result<GridProfile> {
        GridProfile::from_log_values(&self.taus, &st.ys, st.origin_order, st.tail_order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::ckn_quotient;
    use crate::params::t5_params;
    use crate::profiles::{log_nodes, RadialProfile};

    fn setup() -> (CknParams, Objective, Vec<f64>) {
        let c = t5_params(3.0, 2.0, 3.0, 0.0).unwrap();
        let taus: Vec<f64> = log_nodes(1e-3, 1e3, 60).iter().map(|x| x.ln()).collect();
        let g = RadialProfile::stretched_exp(1.0, 0.5, 1.5).unwrap();
        let ys: Vec<f64> = taus
            .iter()
            .map(|t| g.ln_abs(*t) - 0.3 * (0.7 * t).sin().powi(2))
            .collect();
        (c, Objective::new(&c, taus).unwrap(), ys)
    }

    #[test]
    fn matches_the_generic_quotient() {
        let (c, obj, ys) = setup();
        let st = obj.state(ys).unwrap();
        let g = RadialProfile::Grid(obj.to_profile(&st).unwrap());
        let q = ckn_quotient(&c, &g).unwrap().quotient;
        assert!(
            (st.ln_q - q.ln()).abs() < 1e-10,
            "{} vs {}",
            st.ln_q.exp(),
            q
        );
    }

    #[test]
    fn local_gradient_matches_full_recomputation() {
        let (_, obj, ys) = setup();
        let st = obj.state(ys.clone()).unwrap();
        let g = obj.gradient(&st);
        for i in [0, 1, 2, 5, 30, 57, 58, 59] {
            let mut yp = ys.clone();
            let h = 2e-6 * (1.0 + ys[i].abs());
            let mut ym = ys.clone();
            yp[i] += h;
            ym[i] -= h;
            let full = (obj.state(yp).unwrap().ln_q - obj.state(ym).unwrap().ln_q) / (2.0 * h);
            assert!(
                (full - g[i]).abs() < 1e-6 * (1.0 + full.abs()),
                "{i}: {full} vs {}",
                g[i]
            );
        }
    }
}
