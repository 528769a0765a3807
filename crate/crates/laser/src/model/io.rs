//! Model persistence as a decimal text dump: shape headers followed by
//! values in shortest round-trip formatting, so save/load is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{Matrix, MlpParams};

use super::{IvaeModel, Standardizer};

const MAGIC: &str = "laser-ivae-v1";

fn write_vec(out: &mut String, name: &str, v: &[f64]) {
    let _ = write!(out, "{name}");
    for x in v {
        let _ = write!(out, " {x}");
    }
    out.push('\n');
}

fn write_net(out: &mut String, name: &str, net: &MlpParams) {
    let _ = writeln!(out, "net {name}");
    let _ = writeln!(out, "slope {}", net.activation_slope);
    let _ = write!(out, "layers");
    for s in &net.layer_sizes {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    for (w, b) in net.weights.iter().zip(&net.biases) {
        let _ = writeln!(out, "matrix {} {}", w.rows(), w.cols());
        for r in 0..w.rows() {
            write_vec(out, "row", w.row(r));
        }
        write_vec(out, "bias", b.row(0));
    }
}

pub fn save_model(model: &IvaeModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "n {}", model.n);
    let _ = writeln!(out, "v_m2 {}", model.v_m2);
    let _ = writeln!(out, "v_y2 {}", model.v_y2);
    match &model.standardizer {
        Some(s) => {
            let _ = writeln!(out, "standardizer 1");
            write_vec(&mut out, "x_mean", &s.x_mean);
            write_vec(&mut out, "x_std", &s.x_std);
            write_vec(&mut out, "m_mean", &s.m_mean);
            write_vec(&mut out, "m_std", &s.m_std);
            let _ = writeln!(out, "y_mean {}", s.y_mean);
            let _ = writeln!(out, "y_std {}", s.y_std);
        }
        None => {
            let _ = writeln!(out, "standardizer 0");
        }
    }
    write_net(&mut out, "encoder", &model.encoder);
    write_net(&mut out, "decoder_m", &model.decoder_m);
    write_net(&mut out, "decoder_y", &model.decoder_y);
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Reader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next_line(&mut self, expect: &str) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(self.path.display().to_string(), format!("missing {expect}")))
    }

    fn tagged(&mut self, tag: &str) -> Result<Vec<f64>> {
        let (lineno, line) = self.next_line(tag)?;
        let mut parts = line.split_whitespace();
        let got = parts.next().unwrap_or("");
        if got != tag {
            return Err(Error::parse(
                format!("{}:{}", self.path.display(), lineno),
                format!("expected '{tag}', found '{got}'"),
            ));
        }
        parts
            .map(|v| {
                v.parse::<f64>().map_err(|e| {
                    Error::parse(format!("{}:{}", self.path.display(), lineno), e.to_string())
                })
            })
            .collect()
    }

    fn tagged_scalar(&mut self, tag: &str) -> Result<f64> {
        let v = self.tagged(tag)?;
        if v.len() != 1 {
            return Err(Error::parse(
                self.path.display().to_string(),
                format!("'{tag}' expects one value, found {}", v.len()),
            ));
        }
        Ok(v[0])
    }
}

fn read_net(r: &mut Reader, name: &str) -> Result<MlpParams> {
    let (lineno, line) = r.next_line("net header")?;
    if line != format!("net {name}") {
        return Err(Error::parse(
            format!("{}:{}", r.path.display(), lineno),
            format!("expected 'net {name}', found '{line}'"),
        ));
    }
    let slope = r.tagged_scalar("slope")?;
    let layer_sizes: Vec<usize> = r.tagged("layers")?.iter().map(|&v| v as usize).collect();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for _ in 0..layer_sizes.len().saturating_sub(1) {
        let dims = r.tagged("matrix")?;
        let (rows, cols) = (dims[0] as usize, dims[1] as usize);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(r.tagged("row")?);
        }
        weights.push(Matrix::from_vec(rows, cols, data)?);
        let bias = r.tagged("bias")?;
        biases.push(Matrix::row_vec(&bias));
    }
    Ok(MlpParams { layer_sizes, weights, biases, activation_slope: slope })
}

pub fn load_model(path: &Path) -> Result<IvaeModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader { path, lines: text.lines().enumerate() };
    let (_, magic) = r.next_line("magic header")?;
    if magic != MAGIC {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            format!("unrecognized model header '{magic}'"),
        ));
    }
    let n = r.tagged_scalar("n")? as usize;
    let v_m2 = r.tagged_scalar("v_m2")?;
    let v_y2 = r.tagged_scalar("v_y2")?;
    let has_std = r.tagged_scalar("standardizer")? != 0.0;
    let standardizer = if has_std {
        Some(Standardizer {
            x_mean: r.tagged("x_mean")?,
            x_std: r.tagged("x_std")?,
            m_mean: r.tagged("m_mean")?,
            m_std: r.tagged("m_std")?,
            y_mean: r.tagged_scalar("y_mean")?,
            y_std: r.tagged_scalar("y_std")?,
        })
    } else {
        None
    };
    let model = IvaeModel {
        n,
        encoder: read_net(&mut r, "encoder")?,
        decoder_m: read_net(&mut r, "decoder_m")?,
        decoder_y: read_net(&mut r, "decoder_y")?,
        v_m2,
        v_y2,
        standardizer,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate::{generate_world, GenConfig};
    use crate::model::{train, TrainConfig};

    #[test]
    fn round_trip_exact() {
        let cfg = GenConfig { n_obs: 30, n_exp: 30, d_x: 4, seed: 2, ..GenConfig::default() };
        let w = generate_world(&cfg).unwrap();
        let tcfg = TrainConfig {
            epochs: 3,
            latent_dim: 5,
            hidden_sizes: vec![6],
            ..TrainConfig::default()
        };
        let (model, _) = train(&w.d_obs, &w.d_exp, &tcfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn corrupt_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "not-a-model\n").unwrap();
        assert!(load_model(&path).is_err());
    }
}
