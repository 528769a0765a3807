//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Tolerances are pinned as constants below.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use laser::data::{
    generate_world, generate_world_with_weights, true_ate, DgpWeights, GenConfig, GraphVariant,
};
use laser::estimators::{ipw_ate, Method};
use laser::evaluation::{align_latents, run_sweep, BenchmarkTable, SweepAxis, SweepSpec};
use laser::model::{kl_std_normal, train, TrainConfig};
use laser::numeric::{Graph, Matrix, MlpParams, SeededRng, DEFAULT_SLOPE};

const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_NETS: usize = 100;
const GRAD_BUDGET_SECS: f64 = 30.0;
const KL_POINT_TOL: f64 = 1e-12;
const KL_MC_SAMPLES: usize = 1_000_000;
const KL_MC_SIGMAS: f64 = 3.0;
const IPW_INSTANCES: usize = 1000;
const IPW_TOL: f64 = 1e-12;
const TRUTH_WORLDS: usize = 50;
const TRUTH_TOL: f64 = 1e-10;
const FIGURE_MAPE_MAX: f64 = 0.10;
const ALIGN_R2_MIN: f64 = 0.8;
const NULL_EFFECT_RATIO_MAX: f64 = 0.1;
const NULL_EFFECT_SEEDS: u64 = 10;

fn report(criterion: &str, pass: bool) {
    println!("criterion {criterion}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed");
}

// ---------------------------------------------------------------- criterion 1

/// Scalar losses over an MLP output, cycled per net.
fn build_scalar_loss(
    g: &mut Graph,
    out: laser::numeric::NodeId,
    target: &Matrix,
    variant: usize,
) -> laser::numeric::NodeId {
    match variant % 3 {
        0 => {
            // mean squared error against the target
            let t = g.leaf(target.clone());
            let d = g.sub(out, t).unwrap();
            let sq = g.square(d);
            g.mean_all(sq)
        }
        1 => {
            // mean of sigmoid(out) * target
            let s = g.sigmoid(out);
            let t = g.leaf(target.clone());
            let p = g.mul(s, t).unwrap();
            g.mean_all(p)
        }
        _ => {
            // mean softplus: log(1 + exp(out))
            let e = g.exp(out);
            let e1 = g.add_scalar(e, 1.0);
            let l = g.log(e1);
            g.mean_all(l)
        }
    }
}

fn net_loss_value(params: &MlpParams, input: &Matrix, target: &Matrix, variant: usize) -> f64 {
    let mut g = Graph::new();
    let vars = params.register(&mut g);
    let inp = g.leaf(input.clone());
    let out = params.forward_on(&mut g, &vars, inp).unwrap();
    let loss = build_scalar_loss(&mut g, out, target, variant);
    g.scalar(loss)
}

#[test]
fn criterion_1_gradient_oracle() {
    let started = Instant::now();
    let mut rng = SeededRng::new(101);
    let mut worst = 0.0f64;
    for net in 0..GRAD_NETS {
        let sizes = [
            1 + (net % 4),       // input width 1..4
            2 + (net % 3),       // hidden width 2..4
            1 + (net % 2),       // output width 1..2
        ];
        let mut params = MlpParams::init(&sizes, DEFAULT_SLOPE, &mut rng).unwrap();
        let input = rng.normal_matrix(6, sizes[0]);
        let target = rng.normal_matrix(6, sizes[2]);

        // reverse-mode gradients
        let mut g = Graph::new();
        let vars = params.register(&mut g);
        let inp = g.leaf(input.clone());
        let out = params.forward_on(&mut g, &vars, inp).unwrap();
        let loss = build_scalar_loss(&mut g, out, &target, net);
        let grads = g.backward(loss).unwrap();
        let analytic = vars.collect_grads(&params, &grads);

        // central finite differences over every parameter
        let h = 1e-5;
        let n_tensors = params.tensors().len();
        for ti in 0..n_tensors {
            let (rows, cols) = {
                let t = params.tensors()[ti];
                (t.rows(), t.cols())
            };
            for r in 0..rows {
                for c in 0..cols {
                    let orig = params.tensors()[ti].get(r, c);
                    params.tensors_mut()[ti].set(r, c, orig + h);
                    let up = net_loss_value(&params, &input, &target, net);
                    params.tensors_mut()[ti].set(r, c, orig - h);
                    let down = net_loss_value(&params, &input, &target, net);
                    params.tensors_mut()[ti].set(r, c, orig);
                    let fd = (up - down) / (2.0 * h);
                    let an = analytic[ti].get(r, c);
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                    worst = worst.max(rel);
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "1 (gradient oracle)",
        worst <= GRAD_REL_TOL && elapsed < GRAD_BUDGET_SECS,
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_analytic_kl() {
    let zero = kl_std_normal(&[0.0], &[0.0]);
    let half = kl_std_normal(&[1.0], &[0.0]);
    let exact = zero == 0.0 && (half - 0.5).abs() <= KL_POINT_TOL;

    // Monte-Carlo agreement: KL = E_q[log q(z) - log p(z)], z ~ N(mu, s2)
    let mut rng = SeededRng::new(2);
    let mut ok_mc = true;
    for &(mu, lv) in &[(0.7f64, -0.4f64), (-1.2, 0.8), (0.0, 0.0)] {
        let s2 = lv.exp();
        let s = s2.sqrt();
        let analytic = kl_std_normal(&[mu], &[lv]);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..KL_MC_SAMPLES {
            let z = mu + s * rng.normal();
            let term = -0.5 * ((z - mu) * (z - mu) / s2 + lv) + 0.5 * z * z;
            sum += term;
            sum_sq += term * term;
        }
        let n = KL_MC_SAMPLES as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean) / n).sqrt();
        ok_mc &= (mean - analytic).abs() <= KL_MC_SIGMAS * se;
    }
    report("2 (analytic KL)", exact && ok_mc);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_ipw_oracle() {
    let mut rng = SeededRng::new(3);
    let mut ok = true;
    for _ in 0..IPW_INSTANCES {
        let n = 5 + (rng.next_u64() % 60) as usize;
        let yhat: Vec<f64> = (0..n).map(|_| rng.normal() * 4.0).collect();
        let t: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
        let e: Vec<f64> = (0..n).map(|_| 0.02 + 0.96 * rng.uniform()).collect();
        let got = ipw_ate(&yhat, &t, &e).unwrap();
        // independent loop recomputation
        let mut acc = 0.0;
        for i in 0..n {
            acc += if t[i] == 1 { yhat[i] / e[i] } else { -yhat[i] / (1.0 - e[i]) };
        }
        ok &= (got - acc / n as f64).abs() <= IPW_TOL;
    }
    // constant propensity 0.5: tau = 2 * (mean of signed predictions)
    let yhat = [1.0, 2.0, 3.0, 4.0];
    let t = [1u8, 0, 1, 0];
    let e = [0.5; 4];
    let closed = 2.0 * (1.0 - 2.0 + 3.0 - 4.0) / 4.0;
    ok &= ipw_ate(&yhat, &t, &e).unwrap() == closed;
    report("3 (IPW oracle)", ok);
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_dgp_truth_oracle() {
    let mut ok = true;
    for seed in 0..TRUTH_WORLDS as u64 {
        let cfg = GenConfig {
            n_obs: 40,
            n_exp: 120,
            n_latent: 1 + (seed % 3) as usize,
            n_obs_surr: 1 + (seed % 2) as usize,
            n_proxies: 1 + (seed % 4) as usize,
            seed,
            ..GenConfig::default()
        };
        let w = generate_world(&cfg).unwrap();
        // analytic per-unit effect: shared noise cancels, leaving
        // x ((W2 - W3 + 2J) W5 + (W0 - W1 + 2J) W6)
        let dl = w.weights.w2.sub(&w.weights.w3).unwrap().map(|v| v + 2.0);
        let dob = w.weights.w0.sub(&w.weights.w1).unwrap().map(|v| v + 2.0);
        let per_unit = w
            .d_exp
            .x
            .matmul(&dl.matmul(&w.weights.w5).unwrap().add(&dob.matmul(&w.weights.w6).unwrap()).unwrap())
            .unwrap();
        let analytic = per_unit.mean();
        ok &= (analytic - true_ate(&w.d_exp).unwrap()).abs() <= TRUTH_TOL;
        ok &= (analytic - w.tau_true).abs() <= TRUTH_TOL;
    }
    report("4 (generator truth oracle)", ok);
}

// ------------------------------------------------------- criteria 5, 6 and 7

fn fig4a_table() -> &'static BenchmarkTable {
    static TABLE: OnceLock<BenchmarkTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let spec = SweepSpec {
            axis: SweepAxis::Ratio,
            values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            base: GenConfig::default(),
            seeds: (0..10).collect(),
            methods: vec![Method::Laser, Method::SindLinear],
            train: TrainConfig::default(),
            surrogate_total: 5,
        };
        run_sweep(&spec).unwrap()
    })
}

#[test]
fn criterion_5_ratio_sweep() {
    let table = fig4a_table();
    let mut ok = true;
    for &r in &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let row = table.row(Method::Laser, r).unwrap();
        let mean = row.mean_mape.unwrap_or(f64::INFINITY);
        println!("  ratio {r}: laser mean mape {mean:.4} (failed cells: {})", row.n_failed);
        ok &= row.n_failed == 0 && mean <= FIGURE_MAPE_MAX;
    }
    let laser_r1 = table.row(Method::Laser, 1.0).unwrap().mean_mape.unwrap_or(f64::INFINITY);
    let sind_r1 = table
        .row(Method::SindLinear, 1.0)
        .unwrap()
        .mean_mape
        .unwrap_or(f64::NEG_INFINITY);
    println!("  at ratio 1.0: laser {laser_r1:.4} vs sind-linear {sind_r1:.4}");
    ok &= laser_r1 < sind_r1;
    report("5 (ratio sweep reproduction)", ok);
}

#[test]
fn criterion_6_proxy_count_sweep() {
    let spec = SweepSpec {
        axis: SweepAxis::ProxyCount,
        values: vec![10.0, 15.0, 20.0, 25.0, 30.0],
        base: GenConfig {
            n_latent: 5,
            n_obs_surr: 0,
            n_proxies: 10,
            graph_variant: GraphVariant::ProxiesOnly,
            ..GenConfig::default()
        },
        seeds: (0..10).collect(),
        methods: vec![Method::Laser],
        train: TrainConfig::default(),
        surrogate_total: 5,
    };
    let table = run_sweep(&spec).unwrap();
    let mut ok = true;
    for &c in &[10.0, 15.0, 20.0, 25.0, 30.0] {
        let row = table.row(Method::Laser, c).unwrap();
        let mean = row.mean_mape.unwrap_or(f64::INFINITY);
        println!("  {c} proxies: laser mean mape {mean:.4} (failed cells: {})", row.n_failed);
        ok &= row.n_failed == 0 && mean <= FIGURE_MAPE_MAX;
    }
    report("6 (proxy-count sweep reproduction)", ok);
}

#[test]
fn criterion_7_special_case_graphs() {
    // the ratio sweep's endpoints run the all-observed and proxies-only
    // graph variants; the same threshold must hold on both
    let table = fig4a_table();
    let all_obs = table.row(Method::Laser, 0.0).unwrap();
    let proxies = table.row(Method::Laser, 1.0).unwrap();
    let ok = all_obs.n_failed == 0
        && proxies.n_failed == 0
        && all_obs.mean_mape.unwrap_or(f64::INFINITY) <= FIGURE_MAPE_MAX
        && proxies.mean_mape.unwrap_or(f64::INFINITY) <= FIGURE_MAPE_MAX;
    report("7 (special-case graph variants)", ok);
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_latent_recovery() {
    let gen = GenConfig {
        n_latent: 2,
        n_obs_surr: 0,
        n_proxies: 10,
        graph_variant: GraphVariant::ProxiesOnly,
        ..GenConfig::default()
    };
    let train_cfg = TrainConfig { latent_dim: 2, ..TrainConfig::default() };
    let world = generate_world(&gen).unwrap();
    let (model, _) = train(&world.d_obs, &world.d_exp, &train_cfg).unwrap();
    let s_hat = model.extract_latents(&world.d_exp).unwrap();
    let alignment = align_latents(world.d_exp.s_true.as_ref().unwrap(), &s_hat).unwrap();
    println!("  alignment r2 per dimension: {:?}", alignment.r2_per_dim);
    let ok = alignment.r2_per_dim.len() == 2
        && alignment.r2_per_dim.iter().all(|&r| r >= ALIGN_R2_MIN);
    report("8 (latent recovery alignment)", ok);
}

// ---------------------------------------------------------------- criterion 9

fn run_cli(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_laser"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn criterion_9_determinism() {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "[gen]\nn_obs = 80\nn_exp = 80\nd_x = 5\n\n[train]\nepochs = 30\nlatent_dim = 5\n\n\
         [estimate]\nmethods = laser, sind-linear\n\n\
         [sweep]\nvalues = 0, 1\nseeds = 0\nmethods = sind-linear, bd-linear\n",
    )
    .unwrap();
    let cfg = cfg_path.to_string_lossy().into_owned();

    let mut ok = true;
    let mut runs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for pass in 0..2 {
        let out = root.path().join(format!("out{pass}"));
        let out_s = out.to_string_lossy().into_owned();
        ok &= run_cli(&["generate", "--config", &cfg, "--out", &out_s], root.path());
        ok &= run_cli(&["estimate", "--config", &cfg, "--out", &out_s], root.path());
        ok &= run_cli(&["benchmark", "--config", &cfg, "--out", &out_s], root.path());
        runs.push(dir_bytes(&out));
    }
    ok &= runs[0] == runs[1];
    // also: rerunning benchmark in place (resume path) must not change bytes
    let out0 = root.path().join("out0");
    let before = dir_bytes(&out0);
    ok &= run_cli(
        &["benchmark", "--config", &cfg, "--out", &out0.to_string_lossy()],
        root.path(),
    );
    ok &= before == dir_bytes(&out0);
    report("9 (byte-identical determinism)", ok);
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_null_effect() {
    let mut ok = true;
    for seed in 0..NULL_EFFECT_SEEDS {
        let gen = GenConfig { seed, ..GenConfig::default() };
        let mut rng = SeededRng::new(seed);
        let mut weights =
            DgpWeights::sample(&mut rng, gen.d_x, gen.n_latent, gen.n_obs_surr, gen.n_proxies);
        // cancel both arm shifts: W0 = W1 - 2J and W2 = W3 - 2J make the
        // per-unit potential-outcome difference identically zero
        weights.w0 = weights.w1.map(|v| v - 2.0);
        weights.w2 = weights.w3.map(|v| v - 2.0);
        let world = generate_world_with_weights(&gen, weights).unwrap();
        assert!(world.tau_true.abs() < 1e-9, "constructed world is not null");

        let train_cfg = TrainConfig { seed, ..TrainConfig::default() };
        let rep =
            laser::estimators::estimate(Method::Laser, &world.d_obs, &world.d_exp, &train_cfg)
                .unwrap();
        let y = world.d_exp.y.as_ref().unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64).sqrt();
        println!("  seed {seed}: tau_hat {:.4}, 0.1 sd(y) = {:.4}", rep.tau_hat, 0.1 * sd);
        ok &= rep.tau_hat.abs() < NULL_EFFECT_RATIO_MAX * sd;
    }
    report("10 (null-effect sanity)", ok);
}
