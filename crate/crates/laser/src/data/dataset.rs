use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Unit-level table: covariates `x`, binary treatment `t`, short-term
/// outcomes `m`, and (when available) the long-term outcome `y`. Synthetic
/// worlds additionally carry both potential outcomes and the true surrogates
/// for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub t: Vec<u8>,
    pub m: Matrix,
    pub y: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub y1: Option<Vec<f64>>,
    pub s_true: Option<Matrix>,
}

impl Dataset {
    pub fn n_units(&self) -> usize {
        self.x.rows()
    }

    pub fn d_x(&self) -> usize {
        self.x.cols()
    }

    pub fn d_m(&self) -> usize {
        self.m.cols()
    }

    /// Check the row-count and consistency invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_units();
        if self.t.len() != n || self.m.rows() != n {
            return Err(Error::Dimension(format!(
                "row counts differ: x {}, t {}, m {}",
                n,
                self.t.len(),
                self.m.rows()
            )));
        }
        if let Some(v) = self.t.iter().find(|&&t| t > 1) {
            return Err(Error::Dimension(format!("treatment value {v} is not binary")));
        }
        for (name, col) in [(self.y.as_ref(), "y"), (self.y0.as_ref(), "y0"), (self.y1.as_ref(), "y1")]
            .map(|(c, n)| (c, n))
        {
            if let Some(c) = name {
                if c.len() != n {
                    return Err(Error::Dimension(format!("column {col} has {} rows, expected {n}", c.len())));
                }
            }
        }
        if let Some(s) = &self.s_true {
            if s.rows() != n {
                return Err(Error::Dimension(format!("s_true has {} rows, expected {n}", s.rows())));
            }
        }
        if let (Some(y), Some(y0), Some(y1)) = (&self.y, &self.y0, &self.y1) {
            for i in 0..n {
                let expect = if self.t[i] == 1 { y1[i] } else { y0[i] };
                if y[i] != expect {
                    return Err(Error::Dimension(format!(
                        "consistency violated at unit {i}: y = {}, expected {}",
                        y[i], expect
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn require_y(&self) -> Result<&[f64]> {
        self.y
            .as_deref()
            .ok_or_else(|| Error::Capability("dataset has no long-term outcome column y".into()))
    }
}

/// Mean difference of the stored potential outcomes.
pub fn true_ate(d: &Dataset) -> Result<f64> {
    let (y0, y1) = match (&d.y0, &d.y1) {
        (Some(y0), Some(y1)) => (y0, y1),
        _ => {
            return Err(Error::Capability(
                "true ATE needs potential outcomes y0/y1 (synthetic data only)".into(),
            ))
        }
    };
    if y0.is_empty() {
        return Err(Error::Degenerate("true ATE over an empty dataset".into()));
    }
    let n = y0.len() as f64;
    Ok(y0.iter().zip(y1).map(|(a, b)| b - a).sum::<f64>() / n)
}
