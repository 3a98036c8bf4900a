//! Classical (heavy-ball) momentum.

use super::{NumericsError, Tensor};

/// One momentum step for a single tensor:
/// `v ← mom·v − lr·g`, then `θ ← θ + v`.
///
/// Ascent is obtained by negating `grad` before the call.
pub fn sgd_momentum_step(
    param: &mut Tensor,
    grad: &Tensor,
    velocity: &mut Tensor,
    lr: f64,
    mom: f64,
) -> Result<(), NumericsError> {
    if !param.same_shape(grad) || !param.same_shape(velocity) {
        return Err(NumericsError::Shape(format!(
            "momentum step: param {:?}, grad {:?}, velocity {:?}",
            param.shape(),
            grad.shape(),
            velocity.shape()
        )));
    }
    for ((p, v), g) in param.data_mut().iter_mut().zip(velocity.data_mut()).zip(grad.data()) {
        *v = mom * *v - lr * g;
        *p += *v;
    }
    if !param.is_finite() || !velocity.is_finite() {
        return Err(NumericsError::NonFinite("momentum step"));
    }
    Ok(())
}
