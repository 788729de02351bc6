//! Central-difference gradient oracle, evaluated at double precision.

use super::Tensor;
use crate::error::{Error, Result};

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central differences `(f(p + h·eᵢ) − f(p − h·eᵢ)) / 2h` for every coordinate of `p`.
pub fn numerical_gradient<F>(mut f: F, p: &Tensor<f64>, h: f64) -> Result<Tensor<f64>>
where
    F: FnMut(&Tensor<f64>) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    let mut probe = p.clone();
    let mut grad = p.zeros_like();
    for i in 0..p.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "objective is not finite around coordinate {i} (f+ = {plus}, f- = {minus})"
            )));
        }
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Maximum relative error between `analytic` and the central-difference
/// gradient of `f` at `p`.
pub fn finite_diff_gradcheck<F>(f: F, p: &Tensor<f64>, analytic: &Tensor<f64>, h: f64) -> Result<f64>
where
    F: FnMut(&Tensor<f64>) -> Result<f64>,
{
    if analytic.shape() != p.shape() {
        return Err(Error::Dimension(format!(
            "analytic gradient {:?} does not match parameter {:?}",
            analytic.shape(),
            p.shape()
        )));
    }
    let numeric = numerical_gradient(f, p, h)?;
    Ok(analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

/// Result of checking one differentiable input of one primitive.
#[derive(Clone, Debug)]
pub struct PrimitiveCheck {
    pub op: &'static str,
    pub input: &'static str,
    pub max_rel_error: f64,
}

/// Runs the central-difference oracle against the backward rule of every
/// primitive, for every differentiable input, on seeded unit-scale data.
///
/// Each primitive is reduced to a scalar through a fixed random projection
/// `Σ r ⊙ op(x)`, so the upstream gradient fed to the backward rule is `r`.
pub fn check_primitives(seed: u64, h: f64) -> Result<Vec<PrimitiveCheck>> {
    use super::ops::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_t = |shape: &[usize]| -> Result<Tensor<f64>> {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let project = |y: &Tensor<f64>, r: &Tensor<f64>| -> f64 {
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };
    let mut out = Vec::new();
    let mut record = |op, input, err| {
        out.push(PrimitiveCheck {
            op,
            input,
            max_rel_error: err,
        })
    };

    // matmul
    let (a, b) = (rand_t(&[3, 4])?, rand_t(&[4, 2])?);
    let r = rand_t(&[3, 2])?;
    let (_, ctx) = matmul(&a, &b)?;
    let (da, db) = ctx.backward(&r)?;
    record("matmul", "a", finite_diff_gradcheck(|p| Ok(project(&matmul(p, &b)?.0, &r)), &a, &da, h)?);
    record("matmul", "b", finite_diff_gradcheck(|p| Ok(project(&matmul(&a, p)?.0, &r)), &b, &db, h)?);

    // conv2d, both the padded stride-1 case and a strided unpadded one
    for (stride, pad, name) in [(1, 1, "conv2d"), (2, 0, "conv2d/stride2")] {
        let x = rand_t(&[2, 2, 5, 5])?;
        let w = rand_t(&[3, 2, 3, 3])?;
        let bias = rand_t(&[3])?;
        let (y, ctx) = conv2d(&x, &w, &bias, stride, pad)?;
        let r = rand_t(y.shape())?;
        let g = ctx.backward(&r)?;
        let f = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| -> Result<f64> {
            Ok(project(&conv2d(x, w, b, stride, pad)?.0, &r))
        };
        record(name, "x", finite_diff_gradcheck(|p| f(p, &w, &bias), &x, &g.input, h)?);
        record(name, "weight", finite_diff_gradcheck(|p| f(&x, p, &bias), &w, &g.weight, h)?);
        record(name, "bias", finite_diff_gradcheck(|p| f(&x, &w, p), &bias, &g.bias, h)?);
    }

    // maxpool2: distinct, well-separated values keep the argmax away from ties
    let mut x = rand_t(&[1, 2, 4, 4])?;
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        *v = (i as f64 * 0.613).sin() * 0.5 + 0.01 * i as f64;
    }
    let (y, ctx) = maxpool2(&x)?;
    let r = rand_t(y.shape())?;
    let dx = ctx.backward(&r)?;
    record("maxpool2", "x", finite_diff_gradcheck(|p| Ok(project(&maxpool2(p)?.0, &r)), &x, &dx, h)?);

    // relu: inputs bounded away from the kink
    let x = rand_t(&[2, 6])?.map(|v| if v.abs() < 0.1 { v + 0.2 } else { v });
    let r = rand_t(&[2, 6])?;
    let dx = relu(&x).1.backward(&r)?;
    record("relu", "x", finite_diff_gradcheck(|p| Ok(project(&relu(p).0, &r)), &x, &dx, h)?);

    let x = rand_t(&[1, 2, 2, 3])?;
    let r = rand_t(&[1, 2, 4, 6])?;
    let dx = upsample2(&x)?.1.backward(&r)?;
    record("upsample2", "x", finite_diff_gradcheck(|p| Ok(project(&upsample2(p)?.0, &r)), &x, &dx, h)?);

    let (a, b) = (rand_t(&[2, 2, 3, 3])?, rand_t(&[2, 1, 3, 3])?);
    let r = rand_t(&[2, 3, 3, 3])?;
    let (da, db) = concat_channels(&a, &b)?.1.backward(&r)?;
    record("concat_channels", "a", finite_diff_gradcheck(|p| Ok(project(&concat_channels(p, &b)?.0, &r)), &a, &da, h)?);
    record("concat_channels", "b", finite_diff_gradcheck(|p| Ok(project(&concat_channels(&a, p)?.0, &r)), &b, &db, h)?);

    let x = rand_t(&[2, 3, 4, 4])?;
    let r = rand_t(&[2, 3])?;
    let dx = global_avg_pool(&x)?.1.backward(&r)?;
    record("global_avg_pool", "x", finite_diff_gradcheck(|p| Ok(project(&global_avg_pool(p)?.0, &r)), &x, &dx, h)?);

    let (x, w, bias) = (rand_t(&[3, 4])?, rand_t(&[4, 3])?, rand_t(&[3])?);
    let r = rand_t(&[3, 3])?;
    let g = dense(&x, &w, &bias)?.1.backward(&r)?;
    record("dense", "x", finite_diff_gradcheck(|p| Ok(project(&dense(p, &w, &bias)?.0, &r)), &x, &g.input, h)?);
    record("dense", "weight", finite_diff_gradcheck(|p| Ok(project(&dense(&x, p, &bias)?.0, &r)), &w, &g.weight, h)?);
    record("dense", "bias", finite_diff_gradcheck(|p| Ok(project(&dense(&x, &w, p)?.0, &r)), &bias, &g.bias, h)?);

    let logits = rand_t(&[3, 4])?;
    let targets = [0, 3, 1];
    let (_, grad) = softmax_xent(&logits, &targets)?;
    record("softmax_xent", "logits", finite_diff_gradcheck(|p| Ok(softmax_xent(p, &targets)?.0), &logits, &grad, h)?);

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_is_exact() {
        let p = Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap();
        let analytic = Tensor::from_f64(&[2], &[2.0, 4.0]).unwrap();
        let err =
            finite_diff_gradcheck(|t| Ok(t.squared_norm()), &p, &analytic, 1e-4).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn constant_objective_has_zero_error() {
        let p = Tensor::from_f64(&[3], &[0.3, -1.0, 5.0]).unwrap();
        let err = finite_diff_gradcheck(|_| Ok(4.2), &p, &p.zeros_like(), 1e-3).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let p = Tensor::from_f64(&[1], &[0.0]).unwrap();
        let res = numerical_gradient(|t| Ok(1.0 / t.data()[0].abs().min(0.0)), &p, 1e-3);
        assert!(matches!(res, Err(Error::Numeric(_))));
    }

    #[test]
    fn every_primitive_passes() {
        for check in check_primitives(3, 1e-3).unwrap() {
            assert!(check.max_rel_error < 1e-4, "{check:?}");
        }
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let p = Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap();
        let wrong = Tensor::from_f64(&[2], &[2.0, 5.0]).unwrap();
        let err = finite_diff_gradcheck(|t| Ok(t.squared_norm()), &p, &wrong, 1e-4).unwrap();
        assert!(err > 0.1);
    }
}
