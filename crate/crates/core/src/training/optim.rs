//! Global-norm gradient clipping and Adam.

use crate::autodiff::{ParamSet, Tensor};
use crate::error::{Error, Result};

/// Scale all gradients jointly so their combined Euclidean norm is at most
/// `clip`. Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut ParamSet, clip: f64) -> Result<f64> {
    if clip <= 0.0 {
        return Err(Error::Config(format!("clip_norm must be positive, got {clip}")));
    }
    let mut sq = 0.0;
    for (name, g) in grads.iter() {
        if !g.all_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in `{name}`")));
        }
        sq += g.sq_norm();
    }
    let norm = sq.sqrt();
    if norm > clip {
        let scale = clip / norm;
        for (_, g) in grads.iter_mut() {
            for v in &mut g.data {
                *v *= scale;
            }
        }
    }
    Ok(norm)
}

#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamSet,
    v: ParamSet,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let mut m = ParamSet::new();
        let mut v = ParamSet::new();
        for (name, t) in params.iter() {
            m.insert(name, Tensor::zeros(&t.shape));
            v.insert(name, Tensor::zeros(&t.shape));
        }
        AdamState { m, v, t: 0, lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update. Gradients must already be clipped.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, g) in grads.iter() {
            let p = params.get_mut(name)?;
            if p.shape != g.shape {
                return Err(Error::Shape(format!(
                    "adam: gradient shape {:?} != parameter shape {:?} for `{name}`",
                    g.shape, p.shape
                )));
            }
            let m = self.m.get_mut(name)?;
            let v = self.v.get_mut(name)?;
            for i in 0..g.data.len() {
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * g.data[i];
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * g.data[i] * g.data[i];
                let m_hat = m.data[i] / bc1;
                let v_hat = v.data[i] / bc2;
                p.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(pairs: &[(&str, Vec<f64>)]) -> ParamSet {
        let mut p = ParamSet::new();
        for (name, data) in pairs {
            p.insert(name, Tensor::vector(data.clone()));
        }
        p
    }

    #[test]
    fn clip_scales_a_long_gradient() {
        let mut g = set(&[("w", vec![3.0, 4.0])]);
        let norm = clip_global_norm(&mut g, 2.0).unwrap();
        assert_eq!(norm, 5.0);
        let data = &g.get("w").unwrap().data;
        assert!((data[0] - 1.2).abs() < 1e-15 && (data[1] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn clip_leaves_a_short_gradient_alone() {
        let mut g = set(&[("w", vec![0.6, 0.8])]);
        let norm = clip_global_norm(&mut g, 2.0).unwrap();
        assert_eq!(norm, 1.0);
        assert_eq!(g.get("w").unwrap().data, vec![0.6, 0.8]);
    }

    #[test]
    fn post_clip_norm_is_min_of_original_and_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let mut g = ParamSet::new();
            for name in ["a", "b", "c"] {
                let n = rng.gen_range(1..6);
                let data = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                g.insert(name, Tensor::vector(data));
            }
            let before = clip_global_norm(&mut g, 2.0).unwrap();
            let after: f64 = g.iter().map(|(_, t)| t.sq_norm()).sum::<f64>().sqrt();
            assert!((after - before.min(2.0)).abs() < 1e-12);
            assert!(after <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut g = set(&[("ok", vec![1.0]), ("lstm0.wx", vec![f64::NAN])]);
        let err = clip_global_norm(&mut g, 2.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(err.to_string().contains("lstm0.wx"));
    }

    #[test]
    fn first_step_magnitude_matches_closed_form() {
        let mut p = set(&[("x", vec![0.0])]);
        let g = set(&[("x", vec![1.0])]);
        let mut adam = AdamState::new(&p);
        adam.step(&mut p, &g).unwrap();
        let expect = -1e-4 * 1.0 / (1.0 + 1e-8);
        assert!((p.get("x").unwrap().data[0] - expect).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_with_fresh_state_is_a_noop() {
        let mut p = set(&[("x", vec![0.3, -0.7])]);
        let g = set(&[("x", vec![0.0, 0.0])]);
        let before = p.clone();
        let mut adam = AdamState::new(&p);
        adam.step(&mut p, &g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn matches_independent_scalar_recurrence() {
        // reference Adam coded directly from the update equations
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x0: f64 = rng.gen_range(-2.0..2.0);
            let gs: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();

            let (lr, b1, b2, eps) = (1e-4, 0.9, 0.999, 1e-8);
            let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
            for (t, &g) in gs.iter().enumerate() {
                let t = (t + 1) as i32;
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
                x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            }

            let mut p = set(&[("x", vec![x0])]);
            let mut adam = AdamState::new(&p);
            for &g in &gs {
                adam.step(&mut p, &set(&[("x", vec![g])])).unwrap();
            }
            assert!((p.get("x").unwrap().data[0] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = set(&[("x", vec![1.0, 2.0])]);
        let g = set(&[("x", vec![1.0])]);
        let mut adam = AdamState::new(&p);
        assert!(matches!(adam.step(&mut p, &g), Err(Error::Shape(_))));
    }
}
