//! ATE estimators: the trained-model pipeline plus the surrogate-index
//! (SInd) and back-door (BD) baselines, all funneled through IPW where
//! applicable.

mod ipw;
mod propensity;
mod regressor;

pub use ipw::ipw_ate;
pub use propensity::{fit_propensity, fit_propensity_with, PropensityModel};
pub use regressor::{fit_regressor, Regressor, RegressorKind};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{train, TrainConfig};
use crate::numeric::Matrix;
use crate::report::EstimateReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Laser,
    SindLinear,
    SindMlp,
    BdLinear,
    BdMlp,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Laser,
        Method::SindLinear,
        Method::SindMlp,
        Method::BdLinear,
        Method::BdMlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Laser => "laser",
            Method::SindLinear => "sind-linear",
            Method::SindMlp => "sind-mlp",
            Method::BdLinear => "bd-linear",
            Method::BdMlp => "bd-mlp",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_compatible(d_obs: &Dataset, d_exp: &Dataset) -> Result<()> {
    if d_obs.d_x() != d_exp.d_x() || d_obs.d_m() != d_exp.d_m() {
        return Err(Error::Dimension(format!(
            "observational ({}x, {}m) and experimental ({}x, {}m) schemas differ",
            d_obs.d_x(),
            d_obs.d_m(),
            d_exp.d_x(),
            d_exp.d_m()
        )));
    }
    Ok(())
}

/// Full pipeline: train the model on both samples, predict the long-term
/// outcome on the experimental units, and reweight by the fitted propensity.
pub fn estimate_laser(
    d_obs: &Dataset,
    d_exp: &Dataset,
    cfg: &TrainConfig,
) -> Result<EstimateReport> {
    let (model, trace) = train(d_obs, d_exp, cfg)?;
    let yhat = model.predict_y(d_exp)?;
    let prop = fit_propensity(&d_exp.x, &d_exp.t)?;
    let e = prop.predict(&d_exp.x)?;
    let tau_hat = ipw_ate(&yhat, &d_exp.t, &e)?;
    let mut report = EstimateReport::new(Method::Laser.as_str(), tau_hat, cfg.seed);
    report.loss_trace = Some(trace.iter().map(|b| b.total).collect());
    Ok(report)
}

fn sind_predictions(
    d_obs: &Dataset,
    d_exp: &Dataset,
    kind: RegressorKind,
    seed: u64,
) -> Result<Vec<f64>> {
    check_compatible(d_obs, d_exp)?;
    let y = d_obs.require_y()?;
    let feats_obs = Matrix::hcat(&[&d_obs.m, &d_obs.x])?;
    let reg = fit_regressor(&feats_obs, y, kind, seed)?;
    let feats_exp = Matrix::hcat(&[&d_exp.m, &d_exp.x])?;
    reg.predict(&feats_exp)
}

/// Surrogate-index baseline: regress y on (m, x) over all observational
/// rows, predict on the experimental sample, then IPW.
pub fn estimate_sind(
    d_obs: &Dataset,
    d_exp: &Dataset,
    kind: RegressorKind,
    seed: u64,
) -> Result<EstimateReport> {
    let yhat = sind_predictions(d_obs, d_exp, kind, seed)?;
    let prop = fit_propensity(&d_exp.x, &d_exp.t)?;
    let e = prop.predict(&d_exp.x)?;
    let tau_hat = ipw_ate(&yhat, &d_exp.t, &e)?;
    let method = match kind {
        RegressorKind::Linear => Method::SindLinear,
        RegressorKind::Mlp => Method::SindMlp,
    };
    Ok(EstimateReport::new(method.as_str(), tau_hat, seed))
}

/// Back-door baseline: take the SInd prediction on the experimental sample,
/// regress it on x within each arm, and average the fitted arm difference.
pub fn estimate_bd(
    d_obs: &Dataset,
    d_exp: &Dataset,
    kind: RegressorKind,
    seed: u64,
) -> Result<EstimateReport> {
    let yhat = sind_predictions(d_obs, d_exp, kind, seed)?;
    let tau_hat = backdoor_ate(&d_exp.x, &d_exp.t, &yhat, kind, seed)?;
    let method = match kind {
        RegressorKind::Linear => Method::BdLinear,
        RegressorKind::Mlp => Method::BdMlp,
    };
    Ok(EstimateReport::new(method.as_str(), tau_hat, seed))
}

/// Two per-arm regressions of `yhat` on `x`; returns the mean fitted
/// difference over all rows.
pub fn backdoor_ate(
    x: &Matrix,
    t: &[u8],
    yhat: &[f64],
    kind: RegressorKind,
    seed: u64,
) -> Result<f64> {
    if x.rows() != t.len() || t.len() != yhat.len() {
        return Err(Error::Dimension(format!(
            "backdoor lengths differ: {} rows, {} treatments, {} predictions",
            x.rows(),
            t.len(),
            yhat.len()
        )));
    }
    let treated: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 1).collect();
    let control: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 0).collect();
    if treated.is_empty() || control.is_empty() {
        return Err(Error::Degenerate(
            "back-door adjustment needs both treated and control units".into(),
        ));
    }
    let fit_arm = |idx: &[usize], arm_seed: u64| -> Result<Regressor> {
        let xs = x.select_rows(idx);
        let ys: Vec<f64> = idx.iter().map(|&i| yhat[i]).collect();
        fit_regressor(&xs, &ys, kind, arm_seed)
    };
    let g1 = fit_arm(&treated, seed)?;
    let g0 = fit_arm(&control, seed.wrapping_add(1))?;
    let mu1 = g1.predict(x)?;
    let mu0 = g0.predict(x)?;
    let n = x.rows() as f64;
    Ok(mu1.iter().zip(&mu0).map(|(a, b)| a - b).sum::<f64>() / n)
}

/// Dispatch a method name to its estimator.
pub fn estimate(
    method: Method,
    d_obs: &Dataset,
    d_exp: &Dataset,
    cfg: &TrainConfig,
) -> Result<EstimateReport> {
    match method {
        Method::Laser => estimate_laser(d_obs, d_exp, cfg),
        Method::SindLinear => estimate_sind(d_obs, d_exp, RegressorKind::Linear, cfg.seed),
        Method::SindMlp => estimate_sind(d_obs, d_exp, RegressorKind::Mlp, cfg.seed),
        Method::BdLinear => estimate_bd(d_obs, d_exp, RegressorKind::Linear, cfg.seed),
        Method::BdMlp => estimate_bd(d_obs, d_exp, RegressorKind::Mlp, cfg.seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate::{generate_world, GenConfig, GraphVariant};
    use crate::numeric::SeededRng;

    #[test]
    fn bd_linear_exact_on_linear_surface() {
        // yhat = x beta + t delta exactly: the per-arm linear fits recover
        // the surface, so the mean arm difference is delta.
        let mut rng = SeededRng::new(4);
        let n = 120;
        let x = rng.normal_matrix(n, 3);
        let t: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let beta = [1.5, -0.5, 2.0];
        let delta = 3.75;
        let yhat: Vec<f64> = (0..n)
            .map(|i| {
                x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
                    + delta * f64::from(t[i])
            })
            .collect();
        let tau = backdoor_ate(&x, &t, &yhat, RegressorKind::Linear, 0).unwrap();
        assert!((tau - delta).abs() <= 1e-8, "{tau} vs {delta}");
    }

    #[test]
    fn bd_constant_prediction_gives_zero() {
        let x = Matrix::from_fn(40, 2, |r, c| (r + c) as f64);
        let t: Vec<u8> = (0..40).map(|i| u8::from(i < 20)).collect();
        let yhat = vec![5.0; 40];
        let tau = backdoor_ate(&x, &t, &yhat, RegressorKind::Linear, 0).unwrap();
        assert!(tau.abs() <= 1e-8);
    }

    #[test]
    fn bd_single_arm_rejected() {
        let x = Matrix::zeros(10, 2);
        let t = vec![1u8; 10];
        let yhat = vec![0.0; 10];
        assert!(matches!(
            backdoor_ate(&x, &t, &yhat, RegressorKind::Linear, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert!(Method::parse("lasso").is_err());
    }

    #[test]
    fn sind_linear_close_on_all_observed_worlds() {
        let mut total = 0.0;
        for seed in 0..10u64 {
            let cfg = GenConfig {
                n_latent: 0,
                n_obs_surr: 5,
                n_proxies: 0,
                graph_variant: GraphVariant::AllObserved,
                seed,
                ..GenConfig::default()
            };
            let w = generate_world(&cfg).unwrap();
            let tau_true = crate::data::true_ate(&w.d_exp).unwrap();
            let rep = estimate_sind(&w.d_obs, &w.d_exp, RegressorKind::Linear, seed).unwrap();
            total += (rep.tau_hat - tau_true).abs() / tau_true.abs();
        }
        let mean = total / 10.0;
        assert!(mean < 0.1, "mean relative error {mean}");
    }
}
