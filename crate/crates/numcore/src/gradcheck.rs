//! Central-difference gradient checking.

use crate::{NumError, Params, Result, Tape, Tensor, Var};

/// Max over coordinates of `|analytic − numeric| / max(1, |analytic|)` where
/// `numeric` is the central difference of `f` at `point` with step `eps`.
pub fn finite_diff_check<F>(f: F, point: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if point.len() != analytic.len() {
        return Err(NumError::InvalidArgument(format!(
            "gradient has {} entries for a {}-dimensional point",
            analytic.len(),
            point.len()
        )));
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x)?;
        x[i] = orig - eps;
        let down = f(&x)?;
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(NumError::NonFinite {
                op: "finite_diff_check",
            });
        }
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Gradient check of a scalar function of one tensor input.
///
/// `build` records the function on a fresh tape given the input leaf.
pub fn check_tensor_fn<F>(build: F, point: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let loss = build(&mut tape, x)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.get(&tape, x);
    let shape = point.shape().to_vec();
    finite_diff_check(
        |flat| {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::new(shape.clone(), flat.to_vec())?);
            let loss = build(&mut tape, x)?;
            tape.value(loss).item()
        },
        point.data(),
        &analytic,
        eps,
    )
}

/// Gradient check of a scalar loss with respect to every scalar of `params`.
pub fn check_params_fn<F>(build: F, params: &Params, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &crate::Bound) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind(params);
    let loss = build(&mut tape, &bound)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<f64> = grads.for_params(&tape, &bound).concat();
    finite_diff_check(
        |flat| {
            let mut p = params.clone();
            p.assign_flat(flat)?;
            let mut tape = Tape::new();
            let bound = tape.bind(&p);
            let loss = build(&mut tape, &bound)?;
            tape.value(loss).item()
        },
        &params.flatten(),
        &analytic,
        eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_is_exact() {
        // f(x) = xᵀ Q x with Q symmetric; grad = 2 Q x.
        let q = [2.0, 0.5, 0.5, 1.0];
        let f = |x: &[f64]| -> Result<f64> {
            Ok(q[0] * x[0] * x[0] + 2.0 * q[1] * x[0] * x[1] + q[3] * x[1] * x[1])
        };
        let x = [0.7, -1.3];
        let g = [2.0 * (q[0] * x[0] + q[1] * x[1]), 2.0 * (q[2] * x[0] + q[3] * x[1])];
        assert!(finite_diff_check(f, &x, &g, 1e-5).unwrap() <= 1e-7);
    }

    #[test]
    fn relu_away_from_kink() {
        let x = Tensor::matrix(1, 3, vec![0.8, -0.6, 1.9]).unwrap();
        let err = check_tensor_fn(
            |t, x| {
                let r = t.relu(x)?;
                t.sum(r)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6);
    }

    #[test]
    fn non_finite_evaluation_is_rejected() {
        let g = |_: &[f64]| -> Result<f64> { Ok(f64::NAN) };
        assert!(matches!(
            finite_diff_check(g, &[1.0], &[0.0], 1e-5),
            Err(NumError::NonFinite { .. })
        ));
    }
}
