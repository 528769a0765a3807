//! Run configuration: a flat INI-style file with `[section]` headers and
//! `key = value` entries. Every key has a default, so an empty file is a
//! valid configuration; unknown keys are rejected by name.
//!
//! Sections and keys:
//!
//! ```text
//! [gen]      n_obs=747 n_exp=747 d_x=25 n_latent=2 n_obs_surr=3 n_proxies=2
//!            proxy_noise_scale=5.0 covariate_file= obs_treatment=logistic
//!            logit_bound=2.1972245773362196 obs_treatment_p=0.5
//!            exp_treatment_p=0.5 seed=0 graph_variant=general
//! [train]    epochs=3000 batch_size=0 lr=0.003 beta1=0.9 beta2=0.999
//!            mc_samples=1 seed=0 hidden_sizes=8 latent_dim=5
//!            standardize=true v_m2=0.01 v_y2=0.01
//! [estimate] methods=laser clip_lo=0.01 clip_hi=0.99 r2_threshold=0.8
//! [sweep]    axis=ratio values=0,0.2,0.4,0.6,0.8,1.0 seeds=0,1,2,3,4,5,6,7,8,9
//!            methods=laser,sind-linear surrogate_total=5
//! [io]       out_dir=out data_dir=out
//! ```

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{CovariateSource, GenConfig, GraphVariant, ObsTreatment};
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::evaluation::{SweepAxis, SweepSpec};
use crate::model::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub methods: Vec<Method>,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub r2_threshold: f64,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
    pub sweep_methods: Vec<Method>,
    pub surrogate_total: usize,
    pub out_dir: PathBuf,
    pub data_dir: PathBuf,
    /// SHA-256 of the configuration file bytes, stamped into outputs.
    pub digest: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gen: GenConfig::default(),
            train: TrainConfig { latent_dim: 5, ..TrainConfig::default() },
            methods: vec![Method::Laser],
            clip_lo: 0.01,
            clip_hi: 0.99,
            r2_threshold: 0.8,
            sweep_axis: SweepAxis::Ratio,
            sweep_values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            sweep_seeds: (0..10).collect(),
            sweep_methods: vec![Method::Laser, Method::SindLinear],
            surrogate_total: 5,
            out_dir: PathBuf::from("out"),
            data_dir: PathBuf::from("out"),
            digest: digest_of(""),
        }
    }
}

pub fn digest_of(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

struct Entry<'a> {
    section: String,
    key: &'a str,
    value: &'a str,
    location: String,
}

fn split_entries<'a>(text: &'a str, origin: &str) -> Result<Vec<Entry<'a>>> {
    let mut section = String::new();
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let location = format!("{origin}:{}", lineno + 1);
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(&location, "unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&location, format!("expected key = value, found '{line}'")))?;
        if section.is_empty() {
            return Err(Error::parse(&location, format!("key '{}' outside any section", key.trim())));
        }
        entries.push(Entry { section: section.clone(), key: key.trim(), value: value.trim(), location });
    }
    Ok(entries)
}

fn bad(e: &Entry, msg: impl std::fmt::Display) -> Error {
    Error::parse(&e.location, format!("key '{}': {msg}", e.key))
}

fn parse_num<T: std::str::FromStr>(e: &Entry) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    e.value.parse().map_err(|err| bad(e, err))
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(e, format!("expected true or false, found '{other}'"))),
    }
}

fn parse_list<T: std::str::FromStr>(e: &Entry) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|err| bad(e, format!("'{s}': {err}"))))
        .collect()
}

fn parse_methods(e: &Entry) -> Result<Vec<Method>> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Method::parse(s).map_err(|err| bad(e, err)))
        .collect()
}

/// Parse configuration text; `origin` labels parse errors (usually the file
/// path). The digest covers the raw text.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.digest = digest_of(text);
    let mut obs_treatment_kind: Option<String> = None;
    let mut logit_bound = (0.9f64 / 0.1).ln();
    let mut obs_treatment_p = 0.5;

    for e in split_entries(text, origin)? {
        match (e.section.as_str(), e.key) {
            ("gen", "n_obs") => cfg.gen.n_obs = parse_num(&e)?,
            ("gen", "n_exp") => cfg.gen.n_exp = parse_num(&e)?,
            ("gen", "d_x") => cfg.gen.d_x = parse_num(&e)?,
            ("gen", "n_latent") => cfg.gen.n_latent = parse_num(&e)?,
            ("gen", "n_obs_surr") => cfg.gen.n_obs_surr = parse_num(&e)?,
            ("gen", "n_proxies") => cfg.gen.n_proxies = parse_num(&e)?,
            ("gen", "proxy_noise_scale") => cfg.gen.proxy_noise_scale = parse_num(&e)?,
            ("gen", "covariate_file") => {
                cfg.gen.covariate_source = if e.value.is_empty() {
                    CovariateSource::Simulated
                } else {
                    CovariateSource::File(PathBuf::from(e.value))
                };
            }
            ("gen", "obs_treatment") => match e.value {
                "logistic" | "bernoulli" => obs_treatment_kind = Some(e.value.to_string()),
                other => {
                    return Err(bad(&e, format!("expected logistic or bernoulli, found '{other}'")))
                }
            },
            ("gen", "logit_bound") => logit_bound = parse_num(&e)?,
            ("gen", "obs_treatment_p") => obs_treatment_p = parse_num(&e)?,
            ("gen", "exp_treatment_p") => cfg.gen.exp_treatment_p = parse_num(&e)?,
            ("gen", "seed") => cfg.gen.seed = parse_num(&e)?,
            ("gen", "graph_variant") => {
                cfg.gen.graph_variant = match e.value {
                    "general" => GraphVariant::General,
                    "all-observed" => GraphVariant::AllObserved,
                    "proxies-only" => GraphVariant::ProxiesOnly,
                    other => return Err(bad(&e, format!("unknown graph variant '{other}'"))),
                };
            }
            ("train", "epochs") => cfg.train.epochs = parse_num(&e)?,
            ("train", "batch_size") => cfg.train.batch_size = parse_num(&e)?,
            ("train", "lr") => cfg.train.lr = parse_num(&e)?,
            ("train", "beta1") => cfg.train.beta1 = parse_num(&e)?,
            ("train", "beta2") => cfg.train.beta2 = parse_num(&e)?,
            ("train", "mc_samples") => cfg.train.mc_samples = parse_num(&e)?,
            ("train", "seed") => cfg.train.seed = parse_num(&e)?,
            ("train", "hidden_sizes") => cfg.train.hidden_sizes = parse_list(&e)?,
            ("train", "latent_dim") => cfg.train.latent_dim = parse_num(&e)?,
            ("train", "standardize") => cfg.train.standardize = parse_bool(&e)?,
            ("train", "v_m2") => cfg.train.v_m2 = parse_num(&e)?,
            ("train", "v_y2") => cfg.train.v_y2 = parse_num(&e)?,
            ("estimate", "methods") => cfg.methods = parse_methods(&e)?,
            ("estimate", "clip_lo") => cfg.clip_lo = parse_num(&e)?,
            ("estimate", "clip_hi") => cfg.clip_hi = parse_num(&e)?,
            ("estimate", "r2_threshold") => cfg.r2_threshold = parse_num(&e)?,
            ("sweep", "axis") => {
                cfg.sweep_axis = match e.value {
                    "ratio" => SweepAxis::Ratio,
                    "proxy_count" => SweepAxis::ProxyCount,
                    other => return Err(bad(&e, format!("unknown sweep axis '{other}'"))),
                };
            }
            ("sweep", "values") => cfg.sweep_values = parse_list(&e)?,
            ("sweep", "seeds") => cfg.sweep_seeds = parse_list(&e)?,
            ("sweep", "methods") => cfg.sweep_methods = parse_methods(&e)?,
            ("sweep", "surrogate_total") => cfg.surrogate_total = parse_num(&e)?,
            ("io", "out_dir") => cfg.out_dir = PathBuf::from(e.value),
            ("io", "data_dir") => cfg.data_dir = PathBuf::from(e.value),
            ("gen" | "train" | "estimate" | "sweep" | "io", key) => {
                return Err(Error::parse(
                    &e.location,
                    format!("unknown key '{key}' in section [{}]", e.section),
                ));
            }
            (section, _) => {
                return Err(Error::parse(&e.location, format!("unknown section [{section}]")));
            }
        }
    }

    if let Some(kind) = obs_treatment_kind {
        cfg.gen.obs_treatment = match kind.as_str() {
            "logistic" => ObsTreatment::Logistic { logit_bound },
            _ => ObsTreatment::Bernoulli { p: obs_treatment_p },
        };
    } else {
        cfg.gen.obs_treatment = ObsTreatment::Logistic { logit_bound };
    }
    if !(0.0 < cfg.clip_lo && cfg.clip_lo < cfg.clip_hi && cfg.clip_hi < 1.0) {
        return Err(Error::Config(format!(
            "clip bounds ({}, {}) invalid",
            cfg.clip_lo, cfg.clip_hi
        )));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config(&text, &path.display().to_string())
}

impl RunConfig {
    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            axis: self.sweep_axis,
            values: self.sweep_values.clone(),
            base: self.gen.clone(),
            seeds: self.sweep_seeds.clone(),
            methods: self.sweep_methods.clone(),
            train: self.train.clone(),
            surrogate_total: self.surrogate_total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_defaults() {
        let cfg = parse_config("", "test").unwrap();
        assert_eq!(cfg.gen, GenConfig::default());
        assert_eq!(cfg.sweep_seeds, (0..10).collect::<Vec<u64>>());
        assert_eq!(cfg.methods, vec![Method::Laser]);
    }

    #[test]
    fn unknown_key_named_in_error() {
        let err = parse_config("[gen]\nn_latnet = 3\n", "test").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("n_latnet"), "{msg}");
        assert!(msg.contains("test:2"), "{msg}");
    }

    #[test]
    fn unknown_section_rejected() {
        let err = parse_config("[general]\nn_obs = 5\n", "t").unwrap_err();
        assert!(err.to_string().contains("[general]"));
    }

    #[test]
    fn full_round_trip_of_values() {
        let text = "\
[gen]
n_obs = 100
n_exp = 50
graph_variant = proxies-only
n_obs_surr = 0
obs_treatment = bernoulli
obs_treatment_p = 0.3

[train]
epochs = 7
hidden_sizes = 8, 4

[estimate]
methods = laser, bd-mlp

[sweep]
axis = proxy_count
values = 10, 15
seeds = 1, 2

[io]
out_dir = /tmp/somewhere
";
        let cfg = parse_config(text, "t").unwrap();
        assert_eq!(cfg.gen.n_obs, 100);
        assert_eq!(cfg.gen.n_exp, 50);
        assert_eq!(cfg.gen.graph_variant, GraphVariant::ProxiesOnly);
        assert_eq!(cfg.gen.obs_treatment, ObsTreatment::Bernoulli { p: 0.3 });
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.hidden_sizes, vec![8, 4]);
        assert_eq!(cfg.methods, vec![Method::Laser, Method::BdMlp]);
        assert_eq!(cfg.sweep_axis, SweepAxis::ProxyCount);
        assert_eq!(cfg.sweep_values, vec![10.0, 15.0]);
        assert_eq!(cfg.sweep_seeds, vec![1, 2]);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/somewhere"));
    }

    #[test]
    fn digest_depends_on_content() {
        let a = parse_config("[gen]\nseed = 1\n", "t").unwrap();
        let b = parse_config("[gen]\nseed = 2\n", "t").unwrap();
        assert_ne!(a.digest, b.digest);
        assert_eq!(a.digest.len(), 64);
        let again = parse_config("[gen]\nseed = 1\n", "elsewhere").unwrap();
        assert_eq!(a.digest, again.digest);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse_config("# comment\n\n[gen]\n; more\nseed = 9\n", "t").unwrap();
        assert_eq!(cfg.gen.seed, 9);
    }
}
