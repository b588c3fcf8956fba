use crate::error::{Error, Result};

use super::params::ParamSet;

/// Central-difference validation of an analytic gradient.
///
/// `f` evaluates the scalar objective at a parameter point; `analytic` holds
/// the gradient to check, one tensor per parameter name. Returns the max
/// relative error over all coordinates, with denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, params: &ParamSet, analytic: &ParamSet, eps: f64) -> Result<f64>
where
    F: Fn(&ParamSet) -> Result<f64>,
{
    if eps <= 0.0 {
        return Err(Error::Config(format!("grad_check eps must be positive, got {eps}")));
    }
    let mut max_rel = 0.0f64;
    let mut work = params.clone();
    for (name, grad) in analytic.iter() {
        let n_coords = params.get(name)?.len();
        if grad.len() != n_coords {
            return Err(Error::Shape(format!("gradient shape mismatch for `{name}`")));
        }
        for c in 0..n_coords {
            let orig = work.get(name)?.data[c];
            work.get_mut(name)?.data[c] = orig + eps;
            let f_plus = f(&work)?;
            work.get_mut(name)?.data[c] = orig - eps;
            let f_minus = f(&work)?;
            work.get_mut(name)?.data[c] = orig;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite objective while perturbing `{name}`[{c}]"
                )));
            }
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = grad.data[c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
