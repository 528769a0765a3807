use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_world, true_ate, GenConfig, GraphVariant};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Method};
use crate::model::TrainConfig;

use super::mape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Fraction of the surrogates that are latent; latent count, proxy
    /// count, and observed count all move together.
    Ratio,
    /// Number of proxies, with the surrogate layout fixed.
    ProxyCount,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Ratio => "ratio",
            SweepAxis::ProxyCount => "proxy_count",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: GenConfig,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub train: TrainConfig,
    /// Total surrogate count split by the ratio axis.
    pub surrogate_total: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep has no axis values".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep has no seeds".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("sweep has no methods".into()));
        }
        match self.axis {
            SweepAxis::Ratio => {
                if self.surrogate_total == 0 {
                    return Err(Error::Config("surrogate_total must be positive".into()));
                }
                for &r in &self.values {
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::Config(format!("ratio {r} outside [0, 1]")));
                    }
                    let scaled = r * self.surrogate_total as f64;
                    if (scaled - scaled.round()).abs() > 1e-9 {
                        return Err(Error::Config(format!(
                            "ratio {r} does not split {} surrogates into whole counts",
                            self.surrogate_total
                        )));
                    }
                }
            }
            SweepAxis::ProxyCount => {
                for &c in &self.values {
                    if c < 1.0 || (c - c.round()).abs() > 1e-9 {
                        return Err(Error::Config(format!(
                            "proxy count {c} is not a positive integer"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Generator and training configs for one cell of the sweep.
    pub fn cell_config(&self, value: f64, seed: u64) -> (GenConfig, TrainConfig) {
        let mut gen = self.base.clone();
        gen.seed = seed;
        match self.axis {
            SweepAxis::Ratio => {
                let total = self.surrogate_total;
                let a = (value * total as f64).round() as usize;
                gen.n_latent = a;
                gen.n_obs_surr = total - a;
                gen.n_proxies = a;
                gen.graph_variant = if a == 0 {
                    GraphVariant::AllObserved
                } else if a == total {
                    GraphVariant::ProxiesOnly
                } else {
                    GraphVariant::General
                };
            }
            SweepAxis::ProxyCount => {
                gen.n_proxies = value.round() as usize;
            }
        }
        let mut train = self.train.clone();
        train.seed = seed;
        train.latent_dim = gen.n_latent + gen.n_obs_surr;
        (gen, train)
    }
}

/// One (method, axis value, seed) run. A failed run carries the error
/// message instead of a fabricated estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub axis_value: f64,
    pub seed: u64,
    pub tau_true: Option<f64>,
    pub tau_hat: Option<f64>,
    pub mape: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub axis_value: f64,
    /// Mean over seeds that succeeded; absent when every seed failed.
    pub mean_mape: Option<f64>,
    /// Sample standard deviation (n - 1 denominator) over succeeded seeds.
    pub std_mape: Option<f64>,
    /// Per-seed MAPE in the order of `BenchmarkTable::seeds`; `None` marks
    /// a failed cell.
    pub per_seed: Vec<Option<f64>>,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkTable {
    pub axis: SweepAxis,
    pub seeds: Vec<u64>,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn row(&self, method: Method, axis_value: f64) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.method == method.as_str() && r.axis_value == axis_value)
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("method,");
        out.push_str(self.axis.as_str());
        out.push_str(",mean_mape,std_mape");
        for s in &self.seeds {
            let _ = write!(out, ",seed_{s}");
        }
        out.push('\n');
        let cell = |v: &Option<f64>| match v {
            Some(x) => x.to_string(),
            None => "failed".to_string(),
        };
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{}",
                r.method,
                r.axis_value,
                cell(&r.mean_mape),
                cell(&r.std_mape)
            );
            for v in &r.per_seed {
                let _ = write!(out, ",{}", cell(v));
            }
            out.push('\n');
        }
        out
    }
}

fn run_cell(spec: &SweepSpec, method: Method, value: f64, seed: u64) -> CellResult {
    let mut cell = CellResult {
        method: method.as_str().to_string(),
        axis_value: value,
        seed,
        tau_true: None,
        tau_hat: None,
        mape: None,
        error: None,
    };
    let (gen_cfg, train_cfg) = spec.cell_config(value, seed);
    let outcome = (|| -> Result<(f64, f64, f64)> {
        let world = generate_world(&gen_cfg)?;
        let tau = true_ate(&world.d_exp)?;
        let report = estimate(method, &world.d_obs, &world.d_exp, &train_cfg)?;
        let err = mape(tau, report.tau_hat)?;
        Ok((tau, report.tau_hat, err))
    })();
    match outcome {
        Ok((tau, tau_hat, err)) => {
            cell.tau_true = Some(tau);
            cell.tau_hat = Some(tau_hat);
            cell.mape = Some(err);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

pub fn run_sweep(spec: &SweepSpec) -> Result<BenchmarkTable> {
    run_sweep_with(spec, &[], &|_| {})
}

/// Run a sweep, skipping cells already present in `existing` (resume
/// support) and invoking `on_cell` as each new cell finishes so callers can
/// persist progress incrementally. Cells execute in parallel.
pub fn run_sweep_with(
    spec: &SweepSpec,
    existing: &[CellResult],
    on_cell: &(dyn Fn(&CellResult) + Sync),
) -> Result<BenchmarkTable> {
    spec.validate()?;
    let done = |m: Method, v: f64, s: u64| {
        existing
            .iter()
            .find(|c| c.method == m.as_str() && c.axis_value == v && c.seed == s)
    };
    let mut jobs = Vec::new();
    for &value in &spec.values {
        for &seed in &spec.seeds {
            for &method in &spec.methods {
                if done(method, value, seed).is_none() {
                    jobs.push((method, value, seed));
                }
            }
        }
    }
    let fresh: Vec<CellResult> = jobs
        .into_par_iter()
        .map(|(method, value, seed)| {
            let cell = run_cell(spec, method, value, seed);
            on_cell(&cell);
            cell
        })
        .collect();

    let mut rows = Vec::new();
    for &method in &spec.methods {
        for &value in &spec.values {
            let per_seed: Vec<Option<f64>> = spec
                .seeds
                .iter()
                .map(|&seed| {
                    done(method, value, seed)
                        .or_else(|| {
                            fresh.iter().find(|c| {
                                c.method == method.as_str()
                                    && c.axis_value == value
                                    && c.seed == seed
                            })
                        })
                        .and_then(|c| c.mape)
                })
                .collect();
            let ok: Vec<f64> = per_seed.iter().flatten().copied().collect();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            let std = mean.map(|mu| {
                if ok.len() < 2 {
                    0.0
                } else {
                    (ok.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
                        / (ok.len() - 1) as f64)
                        .sqrt()
                }
            });
            rows.push(BenchmarkRow {
                method: method.as_str().to_string(),
                axis_value: value,
                mean_mape: mean,
                std_mape: std,
                per_seed,
                n_failed: spec.seeds.len() - ok.len(),
            });
        }
    }
    Ok(BenchmarkTable { axis: spec.axis, seeds: spec.seeds.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            axis: SweepAxis::Ratio,
            values: vec![0.0],
            base: GenConfig { n_obs: 80, n_exp: 80, d_x: 5, ..GenConfig::default() },
            seeds: vec![0],
            methods: vec![Method::SindLinear],
            train: TrainConfig { epochs: 2, ..TrainConfig::default() },
            surrogate_total: 5,
        }
    }

    #[test]
    fn single_cell_table() {
        let table = run_sweep(&tiny_spec()).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.per_seed.len(), 1);
        assert_eq!(row.std_mape, Some(0.0));
        assert!(row.mean_mape.is_some());
    }

    #[test]
    fn seed_permutation_invariant_aggregates() {
        let mut spec = tiny_spec();
        spec.seeds = vec![0, 1, 2];
        let fwd = run_sweep(&spec).unwrap();
        spec.seeds = vec![2, 0, 1];
        let rev = run_sweep(&spec).unwrap();
        let (a, b) = (&fwd.rows[0], &rev.rows[0]);
        assert!((a.mean_mape.unwrap() - b.mean_mape.unwrap()).abs() <= 1e-12);
        assert!((a.std_mape.unwrap() - b.std_mape.unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn resume_skips_existing_cells() {
        let spec = tiny_spec();
        let mut ran = std::sync::atomic::AtomicUsize::new(0);
        let first = run_sweep_with(&spec, &[], &|_| {
            ran.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        })
        .unwrap();
        assert_eq!(*ran.get_mut(), 1);
        let existing = vec![CellResult {
            method: "sind-linear".into(),
            axis_value: 0.0,
            seed: 0,
            tau_true: Some(1.0),
            tau_hat: Some(1.0),
            mape: Some(0.0),
            error: None,
        }];
        let resumed = run_sweep_with(&spec, &existing, &|_| {
            panic!("no new cell expected");
        })
        .unwrap();
        assert_eq!(resumed.rows[0].per_seed, vec![Some(0.0)]);
        assert_ne!(resumed.rows[0].mean_mape, first.rows[0].mean_mape);
    }

    #[test]
    fn ratio_cell_layout() {
        let spec = SweepSpec { values: vec![0.0, 0.4, 1.0], ..tiny_spec() };
        let (g, t) = spec.cell_config(0.4, 7);
        assert_eq!((g.n_latent, g.n_obs_surr, g.n_proxies), (2, 3, 2));
        assert_eq!(g.graph_variant, GraphVariant::General);
        assert_eq!(t.latent_dim, 5);
        assert_eq!((g.seed, t.seed), (7, 7));
        let (g0, _) = spec.cell_config(0.0, 0);
        assert_eq!(g0.graph_variant, GraphVariant::AllObserved);
        let (g1, _) = spec.cell_config(1.0, 0);
        assert_eq!(g1.graph_variant, GraphVariant::ProxiesOnly);
    }

    #[test]
    fn fractional_ratio_rejected() {
        let spec = SweepSpec { values: vec![0.3], ..tiny_spec() };
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn failed_cell_recorded_not_fabricated() {
        // zero observational units is a generation error
        let mut spec = tiny_spec();
        spec.base.n_obs = 0;
        let table = run_sweep(&spec).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.per_seed, vec![None]);
        assert_eq!(row.mean_mape, None);
        assert_eq!(row.n_failed, 1);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let table = run_sweep(&tiny_spec()).unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "method,ratio,mean_mape,std_mape,seed_0");
        assert_eq!(lines.count(), 1);
    }
}
