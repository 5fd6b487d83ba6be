//! Full-batch gradient descent for L2-regularized linear models.
//!
//! Objective: `mean_i loss(w·x_i + b, y_i) + (lambda / 2) * |w|^2`, bias not
//! regularized. Step size at iteration `t` (1-based) is `learning_rate / sqrt(t)`.
//! Iteration stops when the infinity norm of the gradient drops below the
//! tolerance or after `max_iterations` steps.

use crate::corpus::Label;
use crate::textfeat::SparseRow;

use super::{sigmoid, ClassifierKind, ClassifierSpec, ClassifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Logistic,
    Hinge,
}

impl Loss {
    pub fn for_kind(kind: ClassifierKind) -> Loss {
        match kind {
            ClassifierKind::LinearSvm => Loss::Hinge,
            _ => Loss::Logistic,
        }
    }

    /// Loss value and its derivative with respect to the margin score `z`.
    fn value_and_slope(self, z: f64, label: Label) -> (f64, f64) {
        let y = f64::from(label.as_u8());
        match self {
            Loss::Logistic => {
                // softplus(z) - y z, written to avoid overflow.
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                (softplus - y * z, sigmoid(z) - y)
            }
            Loss::Hinge => {
                let sign = 2.0 * y - 1.0;
                let slack = 1.0 - sign * z;
                if slack > 0.0 {
                    (slack, -sign)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}

/// Objective value and its gradient `(d/dw, d/db)` at `(weights, bias)`.
pub fn objective(
    loss: Loss,
    weights: &[f64],
    bias: f64,
    rows: &[&SparseRow],
    labels: &[Label],
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2_lambda * w).collect();
    let mut grad_bias = 0.0;
    let mut total = 0.0;
    for (row, &label) in rows.iter().zip(labels) {
        let z = row.dot(weights) + bias;
        let (value, slope) = loss.value_and_slope(z, label);
        total += value;
        let scaled = slope / n;
        for (col, v) in row.iter() {
            grad[col] += scaled * v;
        }
        grad_bias += scaled;
    }
    let penalty = 0.5 * l2_lambda * weights.iter().map(|w| w * w).sum::<f64>();
    (total / n + penalty, grad, grad_bias)
}

pub(super) fn train(
    loss: Loss,
    rows: &[&SparseRow],
    labels: &[Label],
    n_features: usize,
    spec: &ClassifierSpec,
) -> Result<(Vec<f64>, f64), ClassifyError> {
    let mut weights = vec![0.0; n_features];
    let mut bias = 0.0;
    for iteration in 1..=spec.max_iterations {
        let (value, grad, grad_bias) = objective(loss, &weights, bias, rows, labels, spec.l2_lambda);
        if !value.is_finite() {
            return Err(ClassifyError::NonFiniteLoss { iteration });
        }
        let largest = grad.iter().fold(grad_bias.abs(), |m, g| m.max(g.abs()));
        if largest < spec.tolerance {
            break;
        }
        let step = spec.learning_rate / (iteration as f64).sqrt();
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= step * g;
        }
        bias -= step * grad_bias;
    }
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(ClassifyError::NonFiniteLoss {
            iteration: spec.max_iterations,
        });
    }
    Ok((weights, bias))
}
