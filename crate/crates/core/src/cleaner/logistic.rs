//! Multinomial logistic regression by full-batch gradient descent.
//!
//! Objective: mean cross-entropy plus `(l2 / 2n) · ‖W‖²` over the feature
//! rows of `W`; the bias row is not penalized. Steps are chosen by
//! backtracking (Armijo) line search, so every accepted step lowers the loss.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1.0,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// (d+1)×K; the last row holds the biases.
    pub weights: Array2<f64>,
    /// Loss at the start and after every accepted step.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = logits(x, &self.weights);
        softmax_rows(&mut z);
        z
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        let p = self.predict_proba(x);
        p.rows()
            .into_iter()
            .map(|r| crate::model::argmax(r.as_slice().expect("row is contiguous")).unwrap_or(0))
            .collect()
    }
}

fn logits(x: ArrayView2<'_, f64>, w: &Array2<f64>) -> Array2<f64> {
    let d = x.ncols();
    let mut z = x.dot(&w.slice(s![..d, ..]));
    z += &w.row(d);
    z
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Objective value and its gradient with respect to `w`.
pub fn loss_and_gradient(x: ArrayView2<'_, f64>, labels: &[usize], w: &Array2<f64>, l2: f64) -> (f64, Array2<f64>) {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut z = logits(x, w);

    let mut loss = 0.0;
    for (mut row, &y) in z.rows_mut().into_iter().zip(labels) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        row.mapv_inplace(|v| (v - lse).exp());
        row[y] -= 1.0;
    }
    // z now holds P - Y
    let feature_w = w.slice(s![..d, ..]);
    loss = loss / n + l2 / (2.0 * n) * feature_w.iter().map(|v| v * v).sum::<f64>();

    let mut grad = Array2::<f64>::zeros(w.raw_dim());
    let mut gw = grad.slice_mut(s![..d, ..]);
    gw.assign(&x.t().dot(&z));
    gw /= n;
    gw.scaled_add(l2 / n, &feature_w);
    grad.row_mut(d).assign(&(z.sum_axis(Axis(0)) / n));
    (loss, grad)
}

pub fn fit_logistic(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    config: &LogisticConfig,
) -> Result<LogisticModel> {
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit on zero examples"));
    }
    if labels.len() != x.nrows() {
        return Err(Error::invalid(format!(
            "{} labels for {} feature rows",
            labels.len(),
            x.nrows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::invalid(format!("label {bad} outside [0, {num_classes})")));
    }

    let mut w = Array2::<f64>::zeros((x.ncols() + 1, num_classes));
    let (mut loss, mut grad) = loss_and_gradient(x, labels, &w, config.l2);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("initial loss {loss}")));
    }
    let mut history = vec![loss];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let gmax = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        if gmax < config.tol {
            converged = true;
            break;
        }
        let gnorm2 = grad.iter().map(|g| g * g).sum::<f64>();
        let mut accepted = None;
        while step >= MIN_STEP {
            let candidate = &w - &(&grad * step);
            let (new_loss, new_grad) = loss_and_gradient(x, labels, &candidate, config.l2);
            if !new_loss.is_finite() {
                return Err(Error::NonFinite(format!("loss {new_loss} at iteration {iterations}")));
            }
            if new_loss <= loss - ARMIJO_C * step * gnorm2 {
                accepted = Some((candidate, new_loss, new_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((next_w, next_loss, next_grad)) = accepted else {
            // no step decreases the loss any further
            break;
        };
        w = next_w;
        loss = next_loss;
        grad = next_grad;
        history.push(loss);
        iterations += 1;
        step *= 2.0;
    }

    Ok(LogisticModel {
        weights: w,
        loss_history: history,
        iterations,
        converged,
    })
}
