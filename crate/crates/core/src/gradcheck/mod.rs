//! Central finite-difference gradient checking.
//!
//! Used by the test suites and the `gradient_check` example. The numeric side
//! only ever calls forward evaluations, so it stays independent of the
//! backward closures it checks.

pub mod suite;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{no_grad, Element, Tensor};

/// Relative error with the denominator floored at `floor`, so that entries
/// whose true gradient is ~0 are compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// `(f(+h) − f(−h)) / 2h` where `f(delta)` evaluates the loss with one
/// coordinate displaced by `delta`.
pub fn central_difference(mut f: impl FnMut(f64) -> Result<f64>, step: f64) -> Result<f64> {
    let plus = f(step)?;
    let minus = f(-step)?;
    Ok((plus - minus) / (2.0 * step))
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    pub floor: f64,
    /// Check at most this many coordinates per input (all when `None`).
    pub samples_per_input: Option<usize>,
    pub seed: u64,
    /// When set, each coordinate is also differenced with half the step; if
    /// the two estimates disagree by more than this (relative, same floor)
    /// the function is not smooth within the step there (an activation
    /// crossed a kink), so the coordinate is skipped and another is drawn.
    pub nonsmooth_tolerance: Option<f64>,
}

impl GradCheckOptions {
    /// Double-precision defaults: step 1e-4.
    pub fn double() -> Self {
        GradCheckOptions {
            step: 1e-4,
            floor: 1e-3,
            samples_per_input: None,
            seed: 0,
            nonsmooth_tolerance: None,
        }
    }

    /// Settings for single-precision gradients checked against
    /// double-precision differences (`check_gradients_with`).
    pub fn single() -> Self {
        GradCheckOptions {
            step: 1e-4,
            floor: 1e-3,
            samples_per_input: Some(20),
            seed: 0,
            nonsmooth_tolerance: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates skipped as non-smooth within the step.
    pub nonsmooth: usize,
    pub max_rel_error: f64,
    pub worst: Option<Mismatch>,
}

impl GradCheckReport {
    pub fn record(&mut self, m: Mismatch) {
        self.checked += 1;
        if m.rel_error >= self.max_rel_error {
            self.max_rel_error = m.rel_error;
            self.worst = Some(m);
        }
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        self.nonsmooth += other.nonsmooth;
        if other.max_rel_error >= self.max_rel_error && other.worst.is_some() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
    }
}

/// Compares the gradients `backward` produces for each of `inputs` with
/// central differences of the scalar `f`.
pub fn check_gradients<T, F>(inputs: &[Tensor<T>], f: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    T: Element,
    F: Fn(&[Tensor<T>]) -> Result<Tensor<T>>,
{
    check_gradients_with(inputs, &f, &f, opts)
}

/// Like `check_gradients`, but the central differences evaluate `reference`
/// (the same function in precision `U`) on the inputs converted to `U`.
/// With `U = f64` this measures the error of single-precision backward
/// passes without single-precision forward round-off in the numeric side.
pub fn check_gradients_with<T, U, F, G>(
    inputs: &[Tensor<T>],
    f: F,
    reference: G,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    T: Element,
    U: Element,
    F: Fn(&[Tensor<T>]) -> Result<Tensor<T>>,
    G: Fn(&[Tensor<U>]) -> Result<Tensor<U>>,
{
    let leaves: Vec<Tensor<T>> = inputs
        .iter()
        .map(|t| Tensor::parameter(t.shape(), t.to_vec()))
        .collect::<Result<_>>()?;
    f(&leaves)?.backward()?;
    let ref_inputs: Vec<Tensor<U>> = inputs
        .iter()
        .map(|t| Tensor::new(t.shape(), t.data().iter().map(|v| U::from_f64(v.as_f64())).collect()))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport::default();
    for (which, leaf) in leaves.iter().enumerate() {
        let analytic = leaf.grad().unwrap_or_else(|| vec![T::zero(); leaf.numel()]);
        let wanted = opts.samples_per_input.unwrap_or(leaf.numel()).min(leaf.numel());
        let order: Vec<usize> = if wanted < leaf.numel() {
            sample(&mut rng, leaf.numel(), leaf.numel()).into_vec()
        } else {
            (0..leaf.numel()).collect()
        };
        let numeric_at = |index: usize, step: f64| {
            central_difference(
                |delta| {
                    let _g = no_grad();
                    let mut shifted: Vec<Tensor<U>> = ref_inputs.clone();
                    let mut values = ref_inputs[which].to_vec();
                    values[index] = U::from_f64(values[index].as_f64() + delta);
                    shifted[which] = Tensor::new(ref_inputs[which].shape(), values)?;
                    Ok(reference(&shifted)?.item()?.as_f64())
                },
                step,
            )
        };
        let mut taken = 0;
        for index in order {
            if taken == wanted {
                break;
            }
            let numeric = numeric_at(index, opts.step)?;
            if let Some(tol) = opts.nonsmooth_tolerance {
                let half = numeric_at(index, opts.step / 2.0)?;
                if relative_error(numeric, half, opts.floor) > tol {
                    report.nonsmooth += 1;
                    continue;
                }
            }
            taken += 1;
            let a = analytic[index].as_f64();
            report.record(Mismatch {
                input: which,
                index,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric, opts.floor),
            });
        }
    }
    Ok(report)
}

/// `Σ out ⊙ weights`: turns an op output into a scalar with a non-uniform
/// upstream gradient.
pub fn weighted_sum<T: Element>(out: &Tensor<T>, weights: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(out.mul(weights)?.sum())
}
