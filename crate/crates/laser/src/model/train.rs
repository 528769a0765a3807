use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{AdamState, Graph, Matrix, MlpParams, SeededRng, DEFAULT_SLOPE};

use super::loss::{
    breakdown, build_loss, draw_eps, make_batch, register_model, Batch, LossBreakdown,
};
use super::{IvaeModel, Standardizer, TrainConfig};

fn stack(a: &Batch, b: &Batch) -> Result<Batch> {
    fn vstack(x: &Matrix, y: &Matrix) -> Result<Matrix> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(x.rows() + y.rows());
        for r in 0..x.rows() {
            rows.push(x.row(r).to_vec());
        }
        for r in 0..y.rows() {
            rows.push(y.row(r).to_vec());
        }
        Matrix::from_rows(&rows)
    }
    Ok(Batch {
        enc_input: vstack(&a.enc_input, &b.enc_input)?,
        m: vstack(&a.m, &b.m)?,
        x: vstack(&a.x, &b.x)?,
        y: None,
    })
}

/// Fit the model by Adam on the combined objective. Returns the trained
/// model and the per-epoch loss trace. Deterministic given the config seed.
pub fn train(
    d_obs: &Dataset,
    d_exp: &Dataset,
    cfg: &TrainConfig,
) -> Result<(IvaeModel, Vec<LossBreakdown>)> {
    cfg.validate()?;
    d_obs.require_y()?;
    if d_obs.d_x() != d_exp.d_x() || d_obs.d_m() != d_exp.d_m() {
        return Err(Error::Dimension(format!(
            "observational ({}x, {}m) and experimental ({}x, {}m) schemas differ",
            d_obs.d_x(),
            d_obs.d_m(),
            d_exp.d_x(),
            d_exp.d_m()
        )));
    }
    let (d_m, d_x, n) = (d_obs.d_m(), d_obs.d_x(), cfg.latent_dim);

    let mut rng = SeededRng::new(cfg.seed);
    let enc_sizes: Vec<usize> = std::iter::once(d_m + d_x + 1)
        .chain(cfg.hidden_sizes.iter().copied())
        .chain(std::iter::once(2 * n))
        .collect();
    let dec_m_sizes: Vec<usize> = std::iter::once(n)
        .chain(cfg.hidden_sizes.iter().copied())
        .chain(std::iter::once(d_m))
        .collect();
    let dec_y_sizes: Vec<usize> = std::iter::once(n + d_x)
        .chain(cfg.hidden_sizes.iter().copied())
        .chain(std::iter::once(1))
        .collect();

    let mut model = IvaeModel {
        n,
        encoder: MlpParams::init(&enc_sizes, DEFAULT_SLOPE, &mut rng)?,
        decoder_m: MlpParams::init(&dec_m_sizes, DEFAULT_SLOPE, &mut rng)?,
        decoder_y: MlpParams::init(&dec_y_sizes, DEFAULT_SLOPE, &mut rng)?,
        v_m2: cfg.v_m2,
        v_y2: cfg.v_y2,
        standardizer: cfg.standardize.then(|| Standardizer::fit(d_obs, d_exp)).transpose()?,
    };
    model.validate()?;

    let obs_batch = make_batch(&model, d_obs, true)?;
    let exp_batch = make_batch(&model, d_exp, false)?;
    let all_batch = stack(&obs_batch, &exp_batch)?;

    let shapes: Vec<(usize, usize)> = model
        .encoder
        .tensors()
        .into_iter()
        .chain(model.decoder_m.tensors())
        .chain(model.decoder_y.tensors())
        .map(|m| (m.rows(), m.cols()))
        .collect();
    let mut adam = AdamState::new(&shapes, cfg.lr, cfg.beta1, cfg.beta2)?;

    let n_all = all_batch.rows();
    let n_obs = obs_batch.rows();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let steps: Vec<(Batch, Batch)> = if cfg.batch_size == 0 || cfg.batch_size >= n_all {
            Vec::new() // full batch, reuse the prebuilt batches
        } else {
            let mut all_idx: Vec<usize> = (0..n_all).collect();
            let mut obs_idx: Vec<usize> = (0..n_obs).collect();
            rng.shuffle(&mut all_idx);
            rng.shuffle(&mut obs_idx);
            let n_chunks = n_all.div_ceil(cfg.batch_size);
            let obs_chunk = n_obs.div_ceil(n_chunks).max(1);
            (0..n_chunks)
                .map(|k| {
                    let a = &all_idx[k * cfg.batch_size..((k + 1) * cfg.batch_size).min(n_all)];
                    let lo = (k * obs_chunk).min(n_obs.saturating_sub(1));
                    let hi = ((k + 1) * obs_chunk).min(n_obs);
                    let o = &obs_idx[lo..hi.max(lo + 1)];
                    (all_batch.select(a), obs_batch.select(o))
                })
                .collect()
        };

        let mut epoch_sum = LossBreakdown {
            neg_elbo: 0.0,
            kl: 0.0,
            recon_m: 0.0,
            recon_y: 0.0,
            total: 0.0,
        };
        let full_batch: [(&Batch, &Batch); 1] = [(&all_batch, &obs_batch)];
        let step_refs: Vec<(&Batch, &Batch)> = if steps.is_empty() {
            full_batch.to_vec()
        } else {
            steps.iter().map(|(a, o)| (a, o)).collect()
        };
        let n_steps = step_refs.len();

        for (all, obs) in step_refs {
            let eps_all = draw_eps(&mut rng, all.rows(), n, cfg.mc_samples);
            let eps_obs = draw_eps(&mut rng, obs.rows(), n, cfg.mc_samples);
            let mut g = Graph::new();
            let vars = register_model(&model, &mut g);
            let nodes = build_loss(&mut g, &model, &vars, all, obs, &eps_all, &eps_obs)?;
            let bd = breakdown(&g, &nodes);
            if !bd.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}: {bd:?}"
                )));
            }
            let grads = g.backward(nodes.total)?;
            let mut grad_list = vars.enc.collect_grads(&model.encoder, &grads);
            grad_list.extend(vars.dec_m.collect_grads(&model.decoder_m, &grads));
            grad_list.extend(vars.dec_y.collect_grads(&model.decoder_y, &grads));

            let mut params: Vec<&mut Matrix> = Vec::new();
            params.extend(model.encoder.tensors_mut());
            params.extend(model.decoder_m.tensors_mut());
            params.extend(model.decoder_y.tensors_mut());
            adam.step(&mut params, &grad_list)?;

            epoch_sum.neg_elbo += bd.neg_elbo;
            epoch_sum.kl += bd.kl;
            epoch_sum.recon_m += bd.recon_m;
            epoch_sum.recon_y += bd.recon_y;
            epoch_sum.total += bd.total;
        }
        let inv = 1.0 / n_steps as f64;
        trace.push(LossBreakdown {
            neg_elbo: epoch_sum.neg_elbo * inv,
            kl: epoch_sum.kl * inv,
            recon_m: epoch_sum.recon_m * inv,
            recon_y: epoch_sum.recon_y * inv,
            total: epoch_sum.total * inv,
        });
    }
    Ok((model, trace))
}
