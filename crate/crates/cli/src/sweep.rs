//! Cartesian parameter sweeps written as CSV.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ckn_core::constants::{
    hardy_constant, hardy_params, sharp_constant_a1, sharp_constant_t5, sharp_constant_t6,
    SharpConstantReport, FORMULA_DISCREPANCY,
};
use ckn_core::params::{a1_params, classify, t5_params, t6_params, CknParams, Regime};
use ckn_core::search::{maximize_quotient, SearchOptions};

use crate::io::{Failure, Outcome};

pub const HEADER: [&str; 16] = [
    "N",
    "p",
    "q",
    "r",
    "s",
    "mu",
    "theta",
    "a",
    "regime",
    "branch",
    "constant",
    "quotient_at_optimizer",
    "rel_gap",
    "search_best",
    "search_gap",
    "error_bound",
];

/// Environment variable with the default number of sweep threads.
pub const THREADS_ENV: &str = "CKN_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    T5,
    T6,
    A1,
    Hardy,
}

impl BranchArg {
    pub fn label(self) -> &'static str {
        match self {
            BranchArg::T5 => "T5",
            BranchArg::T6 => "T6",
            BranchArg::A1 => "A1",
            BranchArg::Hardy => "Hardy",
        }
    }

    /// Free parameters that determine a tuple on this branch.
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            BranchArg::T5 => &["N", "p", "q", "mu"],
            BranchArg::T6 => &["N", "p", "r", "mu"],
            BranchArg::A1 => &["N", "p", "mu", "s"],
            BranchArg::Hardy => &["N", "p", "mu"],
        }
    }

    fn build(self, v: &BTreeMap<String, f64>) -> ckn_core::Result<CknParams> {
        let g = |k: &str| v[k];
        match self {
            BranchArg::T5 => t5_params(g("N"), g("p"), g("q"), g("mu")),
            BranchArg::T6 => t6_params(g("N"), g("p"), g("r"), g("mu")),
            BranchArg::A1 => a1_params(g("N"), g("p"), g("mu"), g("s")),
            BranchArg::Hardy => hardy_params(g("N"), g("p"), g("mu")),
        }
    }

    pub fn constant(self, params: &CknParams) -> ckn_core::Result<SharpConstantReport> {
        match self {
            BranchArg::T5 => sharp_constant_t5(params),
            BranchArg::T6 => sharp_constant_t6(params),
            BranchArg::A1 => sharp_constant_a1(params),
            BranchArg::Hardy => hardy_constant(params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Range {
    fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSearch {
    pub seeds: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    SearchOptions::default().nodes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub branch: BranchArg,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub ranges: BTreeMap<String, Range>,
    /// CSV destination; standard output when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; falls back to `CKN_THREADS`, then to rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub search: Option<SweepSearch>,
}

impl SweepSpec {
    /// Every tuple of the sweep, in row order: the first field of the
    /// branch varies slowest.
    pub fn tuples(&self) -> Outcome<Vec<BTreeMap<String, f64>>> {
        let fields = self.branch.fields();
        for k in self.fixed.keys().chain(self.ranges.keys()) {
            if !fields.contains(&k.as_str()) {
                return Err(Failure::Input(format!(
                    "field {k:?} is not a parameter of branch {}; expected {fields:?}",
                    self.branch.label()
                )));
            }
            if self.fixed.contains_key(k) && self.ranges.contains_key(k) {
                return Err(Failure::Input(format!(
                    "field {k:?} is both fixed and ranged"
                )));
            }
        }
        let mut axes = Vec::new();
        for f in fields {
            let values = match (self.fixed.get(*f), self.ranges.get(*f)) {
                (Some(v), None) => vec![*v],
                (None, Some(r)) => {
                    if r.steps == 0 {
                        return Err(Failure::Input(format!("range for {f:?} has no steps")));
                    }
                    r.values()
                }
                _ => return Err(Failure::Input(format!("field {f:?} is missing"))),
            };
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Failure::Input(format!(
                    "field {f:?} has a non-finite value"
                )));
            }
            axes.push((*f, values));
        }
        let mut rows = vec![BTreeMap::new()];
        for (f, values) in axes {
            rows = rows
                .into_iter()
                .flat_map(|row| {
                    values.iter().map(move |v| {
                        let mut r = row.clone();
                        r.insert(f.to_string(), *v);
                        r
                    })
                })
                .collect();
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: [Option<f64>; 8],
    pub regime: Regime,
    pub branch: &'static str,
    pub constant: Option<f64>,
    pub quotient_at_optimizer: Option<f64>,
    pub rel_gap: Option<f64>,
    pub search_best: Option<f64>,
    pub search_gap: Option<f64>,
    pub error_bound: Option<f64>,
    pub discrepancy: bool,
}

impl Row {
    fn cells(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        let mut out: Vec<String> = self.values.iter().map(|v| num(*v)).collect();
        out.push(self.regime.to_string());
        out.push(self.branch.to_string());
        for v in [
            self.constant,
            self.quotient_at_optimizer,
            self.rel_gap,
            self.search_best,
            self.search_gap,
            self.error_bound,
        ] {
            out.push(num(v));
        }
        out
    }
}

fn evaluate(spec: &SweepSpec, tuple: &BTreeMap<String, f64>) -> Row {
    let branch = spec.branch;
    let given = |k: &str| tuple.get(k).copied();
    let mut row = Row {
        values: [
            given("N"),
            given("p"),
            given("q"),
            given("r"),
            given("s"),
            given("mu"),
            None,
            None,
        ],
        regime: Regime::Invalid,
        branch: branch.label(),
        constant: None,
        quotient_at_optimizer: None,
        rel_gap: None,
        search_best: None,
        search_gap: None,
        error_bound: None,
        discrepancy: false,
    };
    let c = match branch.build(tuple) {
        Ok(c) => c,
        Err(_) => return row,
    };
    row.values = [c.n, c.p, c.q, c.r, c.s, c.mu, c.theta, c.a].map(Some);
    row.regime = classify(&c).regime;
    if row.regime == Regime::Invalid {
        return row;
    }
    let Ok(rep) = branch.constant(&c) else {
        return row;
    };
    row.constant = Some(rep.value);
    row.quotient_at_optimizer = rep.oracle;
    row.rel_gap = rep.rel_gap;
    row.error_bound = rep.oracle_error;
    row.discrepancy = rep.flags.iter().any(|f| f == FORMULA_DISCREPANCY);
    if let (Some(s), true) = (spec.search, branch != BranchArg::Hardy) {
        let best = (0..s.seeds as u64)
            .filter_map(|k| {
                let opts = SearchOptions {
                    nodes: s.nodes,
                    seed: spec.seed.wrapping_add(k),
                    ..SearchOptions::default()
                };
                maximize_quotient(&c, None, &opts)
                    .ok()
                    .map(|r| r.best_quotient)
            })
            .fold(None, |acc: Option<f64>, q| {
                Some(acc.map_or(q, |a| a.max(q)))
            });
        row.search_best = best;
        row.search_gap = best.map(|b| (rep.value - b) / rep.value);
    }
    row
}

pub fn thread_count(spec: &SweepSpec) -> Outcome<Option<usize>> {
    if let Some(t) = spec.threads {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::Input(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

/// All rows of the sweep in order. Rows are evaluated in parallel; the
/// indexed collect keeps the order independent of scheduling.
pub fn run(spec: &SweepSpec) -> Outcome<Vec<Row>> {
    let tuples = spec.tuples()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(spec)? {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    Ok(pool.install(|| tuples.par_iter().map(|t| evaluate(spec, t)).collect()))
}

pub fn to_csv(rows: &[Row]) -> Outcome<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Input(format!("csv: {e}"));
    w.write_record(HEADER).map_err(err)?;
    for r in rows {
        w.write_record(r.cells()).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Failure::Input(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> SweepSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn tuples_follow_the_field_order() {
        let s = spec(
            r#"{"branch": "t5", "fixed": {"N": 3, "p": 2},
                "ranges": {"q": {"start": 2.2, "stop": 2.8, "steps": 3},
                           "mu": {"start": 0, "stop": 0.2, "steps": 2}}}"#,
        );
        let t = s.tuples().unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!((t[0]["q"], t[0]["mu"]), (2.2, 0.0));
        assert_eq!((t[1]["q"], t[1]["mu"]), (2.2, 0.2));
        assert!((t[5]["q"] - 2.8).abs() < 1e-15);
    }

    #[test]
    fn misplaced_fields_are_rejected() {
        let s = spec(r#"{"branch": "t5", "fixed": {"N": 3, "p": 2, "q": 3, "mu": 0, "s": 1}}"#);
        assert!(s.tuples().is_err());
        let s = spec(r#"{"branch": "t6", "fixed": {"N": 3, "p": 2, "mu": 0}}"#);
        assert!(s.tuples().is_err());
        assert!(serde_json::from_str::<SweepSpec>(r#"{"branch": "t7"}"#).is_err());
    }

    #[test]
    fn invalid_tuples_keep_their_row() {
        let s = spec(
            r#"{"branch": "t5", "fixed": {"N": 3, "p": 2, "mu": 0},
                         "ranges": {"q": {"start": 1.5, "stop": 3, "steps": 2}}}"#,
        );
        let rows = run(&s).unwrap();
        assert_eq!(rows[0].regime, Regime::Invalid);
        assert!(rows[0].constant.is_none());
        assert_eq!(rows[1].regime, Regime::C1);
        assert!(rows[1].rel_gap.unwrap() < 1e-8);
        let csv = String::from_utf8(to_csv(&rows).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], HEADER.join(","));
        assert!(lines[1].contains(",Invalid,T5,,,,,,"), "{}", lines[1]);
    }

    #[test]
    fn seventeen_significant_digits() {
        let r = Row {
            values: [Some(0.1); 8],
            regime: Regime::C1,
            branch: "T5",
            constant: Some(2.0 / 3.0),
            quotient_at_optimizer: None,
            rel_gap: None,
            search_best: None,
            search_gap: None,
            error_bound: None,
            discrepancy: false,
        };
        let cells = r.cells();
        assert_eq!(cells[0], "1.0000000000000001e-1");
        assert_eq!(cells[10].parse::<f64>().unwrap(), 2.0 / 3.0);
    }
}
