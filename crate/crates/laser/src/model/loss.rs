//! Training objective: -ELBO over all rows plus the outcome likelihood
//! over observational rows, with reparameterized Monte Carlo expectations.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::graph::{Graph, NodeId};
use crate::numeric::{Matrix, MlpVars, SeededRng};

use super::{IvaeModel, LOGVAR_CLAMP};

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

/// Closed-form KL(N(mu, diag(exp logvar)) || N(0, I)).
pub fn kl_std_normal(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - lv - 1.0))
        .sum()
}

/// Negative log density of independent Gaussians with a shared fixed
/// variance, summed over components.
pub fn gaussian_nll(value: &[f64], mean: &[f64], variance: f64) -> Result<f64> {
    if variance <= 0.0 {
        return Err(Error::Config(format!("gaussian_nll variance {variance} must be positive")));
    }
    if value.len() != mean.len() {
        return Err(Error::Dimension(format!(
            "gaussian_nll over {} values vs {} means",
            value.len(),
            mean.len()
        )));
    }
    let quad: f64 = value
        .iter()
        .zip(mean)
        .map(|(&v, &m)| (v - m) * (v - m))
        .sum::<f64>()
        / (2.0 * variance);
    Ok(0.5 * (LN_2PI + variance.ln()) * value.len() as f64 + quad)
}

/// Per-component loss values for one evaluation of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub neg_elbo: f64,
    pub kl: f64,
    pub recon_m: f64,
    pub recon_y: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Standardized inputs for one batch.
pub(crate) struct Batch {
    pub enc_input: Matrix, // [m | x | t]
    pub m: Matrix,
    pub x: Matrix,
    pub y: Option<Matrix>, // column
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.enc_input.rows()
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            enc_input: self.enc_input.select_rows(idx),
            m: self.m.select_rows(idx),
            x: self.x.select_rows(idx),
            y: self.y.as_ref().map(|y| y.select_rows(idx)),
        }
    }
}

pub(crate) fn make_batch(model: &IvaeModel, d: &Dataset, need_y: bool) -> Result<Batch> {
    if d.d_m() != model.d_m() || d.d_x() != model.d_x() {
        return Err(Error::Dimension(format!(
            "batch ({} m cols, {} x cols) incompatible with model ({}, {})",
            d.d_m(),
            d.d_x(),
            model.d_m(),
            model.d_x()
        )));
    }
    let (m, x) = match &model.standardizer {
        Some(s) => (s.transform_m(&d.m), s.transform_x(&d.x)),
        None => (d.m.clone(), d.x.clone()),
    };
    let t = Matrix::from_fn(d.n_units(), 1, |r, _| f64::from(d.t[r]));
    let enc_input = Matrix::hcat(&[&m, &x, &t])?;
    let y = if need_y {
        let raw = d.require_y()?;
        let std = match &model.standardizer {
            Some(s) => s.transform_y(raw),
            None => raw.to_vec(),
        };
        Some(Matrix::column(&std))
    } else {
        None
    };
    Ok(Batch { enc_input, m, x, y })
}

pub(crate) struct ModelVars {
    pub enc: MlpVars,
    pub dec_m: MlpVars,
    pub dec_y: MlpVars,
}

pub(crate) fn register_model(model: &IvaeModel, g: &mut Graph) -> ModelVars {
    ModelVars {
        enc: model.encoder.register(g),
        dec_m: model.decoder_m.register(g),
        dec_y: model.decoder_y.register(g),
    }
}

pub(crate) struct LossNodes {
    pub kl: NodeId,
    pub recon_m: NodeId,
    pub recon_y: NodeId,
    pub neg_elbo: NodeId,
    pub total: NodeId,
}

/// Posterior nodes (mu, sigma) for a batch through registered parameters.
fn posterior(
    g: &mut Graph,
    model: &IvaeModel,
    vars: &ModelVars,
    batch: &Batch,
) -> Result<(NodeId, NodeId, NodeId)> {
    let input = g.leaf(batch.enc_input.clone());
    let enc_out = model.encoder.forward_on(g, &vars.enc, input)?;
    let mu = g.slice_cols(enc_out, 0, model.n);
    let lv_raw = g.slice_cols(enc_out, model.n, 2 * model.n);
    let lv = g.clamp(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP);
    let half_lv = g.scale(lv, 0.5);
    let sigma = g.exp(half_lv);
    Ok((mu, lv, sigma))
}

/// Build the full objective on the tape. `eps_all`/`eps_obs` carry one
/// rows x n standard-normal draw per Monte Carlo sample; passing the same
/// draws twice makes the loss a deterministic function of the parameters,
/// which the finite-difference checks rely on.
pub(crate) fn build_loss(
    g: &mut Graph,
    model: &IvaeModel,
    vars: &ModelVars,
    all: &Batch,
    obs: &Batch,
    eps_all: &[Matrix],
    eps_obs: &[Matrix],
) -> Result<LossNodes> {
    let y_obs = obs
        .y
        .as_ref()
        .ok_or_else(|| Error::Capability("observational batch lacks y".into()))?;
    let mc = eps_all.len();
    debug_assert_eq!(mc, eps_obs.len());
    let b_all = all.rows() as f64;
    let b_obs = obs.rows() as f64;
    let d_m = model.d_m() as f64;

    // KL over the union batch
    let (mu, lv, sigma) = posterior(g, model, vars, all)?;
    let mu_sq = g.square(mu);
    let var = g.exp(lv);
    let sum1 = g.add(mu_sq, var)?;
    let sum2 = g.sub(sum1, lv)?;
    let inner = g.add_scalar(sum2, -1.0);
    let total_kl = g.sum_all(inner);
    let kl = g.scale(total_kl, 0.5 / b_all);

    // reconstruction of m, averaged over mc draws
    let mut acc_m: Option<NodeId> = None;
    let m_target = g.leaf(all.m.clone());
    for eps in eps_all {
        let e = g.leaf(eps.clone());
        let noise = g.mul(sigma, e)?;
        let s = g.add(mu, noise)?;
        let mu_m = model.decoder_m.forward_on(g, &vars.dec_m, s)?;
        let diff = g.sub(m_target, mu_m)?;
        let sq = g.square(diff);
        let sum = g.sum_all(sq);
        acc_m = Some(match acc_m {
            Some(a) => g.add(a, sum)?,
            None => sum,
        });
    }
    let quad_m = g.scale(acc_m.unwrap(), 1.0 / (2.0 * model.v_m2 * b_all * mc as f64));
    let recon_m = g.add_scalar(quad_m, 0.5 * d_m * (LN_2PI + model.v_m2.ln()));

    let neg_elbo = g.add(kl, recon_m)?;

    // outcome likelihood over observational rows only
    let (mu_o, _lv_o, sigma_o) = posterior(g, model, vars, obs)?;
    let x_o = g.leaf(obs.x.clone());
    let y_target = g.leaf(y_obs.clone());
    let mut acc_y: Option<NodeId> = None;
    for eps in eps_obs {
        let e = g.leaf(eps.clone());
        let noise = g.mul(sigma_o, e)?;
        let s = g.add(mu_o, noise)?;
        let dec_in = g.concat_cols(s, x_o)?;
        let mu_y = model.decoder_y.forward_on(g, &vars.dec_y, dec_in)?;
        let diff = g.sub(y_target, mu_y)?;
        let sq = g.square(diff);
        let sum = g.sum_all(sq);
        acc_y = Some(match acc_y {
            Some(a) => g.add(a, sum)?,
            None => sum,
        });
    }
    let quad_y = g.scale(acc_y.unwrap(), 1.0 / (2.0 * model.v_y2 * b_obs * mc as f64));
    let recon_y = g.add_scalar(quad_y, 0.5 * (LN_2PI + model.v_y2.ln()));

    let total = g.add(neg_elbo, recon_y)?;
    Ok(LossNodes { kl, recon_m, recon_y, neg_elbo, total })
}

pub(crate) fn breakdown(g: &Graph, nodes: &LossNodes) -> LossBreakdown {
    LossBreakdown {
        neg_elbo: g.scalar(nodes.neg_elbo),
        kl: g.scalar(nodes.kl),
        recon_m: g.scalar(nodes.recon_m),
        recon_y: g.scalar(nodes.recon_y),
        total: g.scalar(nodes.total),
    }
}

pub(crate) fn draw_eps(rng: &mut SeededRng, rows: usize, n: usize, mc: usize) -> Vec<Matrix> {
    (0..mc).map(|_| rng.normal_matrix(rows, n)).collect()
}

/// Evaluate the objective on explicit batches. `batch_all` is drawn from
/// the union of both samples (y not needed); `batch_obs` must carry y.
pub fn loss(
    model: &IvaeModel,
    batch_all: &Dataset,
    batch_obs: &Dataset,
    rng: &mut SeededRng,
    mc_samples: usize,
) -> Result<LossBreakdown> {
    model.validate()?;
    if mc_samples == 0 {
        return Err(Error::Config("mc_samples must be >= 1".into()));
    }
    let all = make_batch(model, batch_all, false)?;
    let obs = make_batch(model, batch_obs, true)?;
    let eps_all = draw_eps(rng, all.rows(), model.n, mc_samples);
    let eps_obs = draw_eps(rng, obs.rows(), model.n, mc_samples);
    let mut g = Graph::new();
    let vars = register_model(model, &mut g);
    let nodes = build_loss(&mut g, model, &vars, &all, &obs, &eps_all, &eps_obs)?;
    Ok(breakdown(&g, &nodes))
}
