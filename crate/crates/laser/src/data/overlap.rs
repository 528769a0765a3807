use super::dataset::Dataset;

/// Treated/control counts per equal-width covariate bin.
#[derive(Debug, Clone)]
pub struct CovariateOverlap {
    pub covariate: usize,
    /// (treated, control) per bin.
    pub counts: Vec<(usize, usize)>,
    /// Bins that contain units from only one arm.
    pub flagged_bins: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct OverlapReport {
    pub per_covariate: Vec<CovariateOverlap>,
    pub flagged_cells: usize,
}

impl OverlapReport {
    pub fn has_flags(&self) -> bool {
        self.flagged_cells > 0
    }
}

/// Report-only diagnostic for the positivity requirement behind inverse
/// propensity weights: within each covariate bin both arms should appear.
pub fn check_overlap(d: &Dataset, bins: usize) -> OverlapReport {
    let bins = bins.max(1);
    let mut per_covariate = Vec::with_capacity(d.d_x());
    let mut flagged_cells = 0;
    for j in 0..d.d_x() {
        let col = d.x.col(j);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = hi - lo;
        let mut counts = vec![(0usize, 0usize); bins];
        for (i, &v) in col.iter().enumerate() {
            let b = if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            };
            if d.t[i] == 1 {
                counts[b].0 += 1;
            } else {
                counts[b].1 += 1;
            }
        }
        let flagged_bins: Vec<usize> = counts
            .iter()
            .enumerate()
            .filter(|(_, &(t, c))| (t + c > 0) && (t == 0 || c == 0))
            .map(|(b, _)| b)
            .collect();
        flagged_cells += flagged_bins.len();
        per_covariate.push(CovariateOverlap { covariate: j, counts, flagged_bins });
    }
    OverlapReport { per_covariate, flagged_cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate::{generate_world, GenConfig};
    use crate::numeric::Matrix;

    #[test]
    fn randomized_large_sample_has_no_flags() {
        // Bernoulli(0.5) treatment, n = 10^4: with 4 bins of ~2500 units the
        // chance a bin misses an arm is below 2*0.5^2500 per cell.
        let cfg = GenConfig {
            n_obs: 10_000,
            n_exp: 10,
            obs_treatment: crate::data::generate::ObsTreatment::Bernoulli { p: 0.5 },
            seed: 8,
            ..GenConfig::default()
        };
        let w = generate_world(&cfg).unwrap();
        let report = check_overlap(&w.d_obs, 4);
        assert!(!report.has_flags());
    }

    #[test]
    fn all_treated_flags_every_cell() {
        let d = Dataset {
            x: Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            t: vec![1, 1, 1, 1],
            m: Matrix::zeros(4, 1),
            y: None,
            y0: None,
            y1: None,
            s_true: None,
        };
        let report = check_overlap(&d, 2);
        assert_eq!(report.per_covariate[0].flagged_bins, vec![0, 1]);
    }

    #[test]
    fn single_unit_is_flagged() {
        let d = Dataset {
            x: Matrix::from_vec(1, 1, vec![0.5]).unwrap(),
            t: vec![0],
            m: Matrix::zeros(1, 1),
            y: None,
            y0: None,
            y1: None,
            s_true: None,
        };
        assert!(check_overlap(&d, 3).has_flags());
    }
}
