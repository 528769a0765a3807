use crate::error::{Error, Result};

use super::matrix::Matrix;

/// Adam optimizer state for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)], lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0) {
            return Err(Error::Config(format!("adam betas ({beta1}, {beta2}) outside (0, 1)")));
        }
        let zeros: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Ok(AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            lr,
            beta1,
            beta2,
            epsilon: 1e-8,
        })
    }

    pub fn for_params(params: &[&Matrix], lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let shapes: Vec<_> = params.iter().map(|m| (m.rows(), m.cols())).collect();
        Self::new(&shapes, lr, beta1, beta2)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Dimension(format!(
                "adam step over {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient for parameter {i}")));
            }
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            let g = &grads[i];
            if !m.same_shape(g) || !params[i].same_shape(g) {
                return Err(Error::Dimension(format!("parameter {i} shape mismatch in adam step")));
            }
            let md = m.data_mut();
            let vd = v.data_mut();
            let pd = params[i].data_mut();
            let gd = g.data();
            for j in 0..gd.len() {
                md[j] = self.beta1 * md[j] + (1.0 - self.beta1) * gd[j];
                vd[j] = self.beta2 * vd[j] + (1.0 - self.beta2) * gd[j] * gd[j];
                let mhat = md[j] / bc1;
                let vhat = vd[j] / bc2;
                pd[j] -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Matrix::row_vec(&[1.0, -2.0]);
        let mut state = AdamState::new(&[(1, 2)], 1e-3, 0.9, 0.999).unwrap();
        let g = Matrix::zeros(1, 2);
        let before = p.clone();
        state.step(&mut [&mut p], &[g]).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_calculation() {
        // t=1: mhat = g, vhat = g^2, update = -lr * g / (|g| + eps)
        let lr = 0.01;
        let g = Matrix::row_vec(&[0.5, -3.0]);
        let mut p = Matrix::row_vec(&[1.0, 1.0]);
        let mut state = AdamState::new(&[(1, 2)], lr, 0.9, 0.999).unwrap();
        state.step(&mut [&mut p], &[g.clone()]).unwrap();
        for j in 0..2 {
            let gj = g.get(0, j);
            let expected = 1.0 - lr * gj / (gj.abs() + 1e-8);
            assert!((p.get(0, j) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_repeated_steps() {
        let g = Matrix::row_vec(&[0.3]);
        let run = || {
            let mut p = Matrix::row_vec(&[2.0]);
            let mut state = AdamState::new(&[(1, 1)], 1e-3, 0.9, 0.999).unwrap();
            state.step(&mut [&mut p], &[g.clone()]).unwrap();
            state.step(&mut [&mut p], &[g.clone()]).unwrap();
            (p.get(0, 0), state.step_count())
        };
        assert_eq!(run(), run());
        assert_eq!(run().1, 2);
    }

    #[test]
    fn non_finite_gradient_reports_location() {
        let mut p = Matrix::row_vec(&[0.0]);
        let mut state = AdamState::new(&[(1, 1)], 1e-3, 0.9, 0.999).unwrap();
        let g = Matrix::row_vec(&[f64::NAN]);
        let err = state.step(&mut [&mut p], &[g]).unwrap_err();
        assert!(err.to_string().contains("parameter 0"));
    }

    #[test]
    fn loss_scaling_invariance_near_zero_epsilon() {
        // Scaling the loss by c > 0 scales g by c; with epsilon ~ 0 the
        // bias-corrected first update is unchanged.
        let g = Matrix::row_vec(&[0.7, -0.2, 5.0]);
        let update = |scale: f64| {
            let mut p = Matrix::row_vec(&[0.0, 0.0, 0.0]);
            let mut state = AdamState::new(&[(1, 3)], 1e-3, 0.9, 0.999).unwrap();
            state.epsilon = 1e-12;
            state.step(&mut [&mut p], &[g.scale(scale)]).unwrap();
            p
        };
        let a = update(1.0);
        let b = update(37.5);
        for j in 0..3 {
            assert!((a.get(0, j) - b.get(0, j)).abs() < 1e-6);
        }
    }
}
