//! Central-difference gradient verification for tape programs.

use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::AdError;

/// Compares analytic gradients against central differences.
///
/// `f` rebuilds the computation from scratch on a fresh tape given the current
/// inputs and returns (input node ids, scalar loss id). Returns the maximum
/// over all input coordinates of |analytic - numeric| / max(1, |analytic|).
pub fn grad_check<F>(inputs: &[Tensor], eps: f64, mut f: F) -> Result<f64, AdError>
where
    F: FnMut(&mut Tape, &[Tensor]) -> Result<(Vec<NodeId>, NodeId), AdError>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(AdError::BadArg(format!("gradcheck eps {eps} outside [1e-6, 1e-3]")));
    }
    let mut tape = Tape::new();
    let (ids, loss) = f(&mut tape, inputs)?;
    if ids.len() != inputs.len() {
        return Err(AdError::BadArg("gradcheck: f returned wrong number of inputs".into()));
    }
    if !tape.value(loss).is_finite() {
        return Err(AdError::NonFinite("gradcheck loss"));
    }
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = ids
        .iter()
        .zip(inputs)
        .map(|(&id, x)| tape.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(x.shape())))
        .collect();

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (pi, x) in inputs.iter().enumerate() {
        for j in 0..x.numel() {
            let orig = x.data()[j];
            probe[pi].data_mut()[j] = orig + eps;
            let hi = eval(&probe, &mut f)?;
            probe[pi].data_mut()[j] = orig - eps;
            let lo = eval(&probe, &mut f)?;
            probe[pi].data_mut()[j] = orig;
            let numeric = (hi - lo) / (2.0 * eps);
            if !numeric.is_finite() {
                return Err(AdError::NonFinite("gradcheck probe"));
            }
            let a = analytic[pi].data()[j];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn eval<F>(inputs: &[Tensor], f: &mut F) -> Result<f64, AdError>
where
    F: FnMut(&mut Tape, &[Tensor]) -> Result<(Vec<NodeId>, NodeId), AdError>,
{
    let mut tape = Tape::new();
    let (_, loss) = f(&mut tape, inputs)?;
    let v = tape.value(loss).item();
    if !v.is_finite() {
        return Err(AdError::NonFinite("gradcheck probe"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_two_x() {
        // f(x) = sum x_i^2 via mse against zero; at x = 3 the derivative is 6.
        let x = Tensor::scalar(3.0);
        let err = grad_check(&[x], 1e-5, |tape, xs| {
            let x = tape.input(xs[0].clone(), true);
            let zero = tape.constant(Tensor::zeros(xs[0].shape()));
            let sq = tape.mse_loss(x, zero)?;
            Ok((vec![x], sq))
        })
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn rejects_out_of_range_eps() {
        let x = Tensor::scalar(1.0);
        let r = grad_check(&[x], 1e-2, |tape, xs| {
            let x = tape.input(xs[0].clone(), true);
            Ok((vec![x], x))
        });
        assert!(matches!(r, Err(AdError::BadArg(_))));
    }
}
