//! Forecast evaluation: per-repository RMSE, per-window RMSE, total average
//! RMSE, and multi-model comparison reports.

use ndarray::Array2;
use thiserror::Error;

/// Actual and predicted count matrices over the same repositories and windows.
#[derive(Debug, Clone)]
pub struct EvaluationPanel {
    actual: Array2<f64>,
    predicted: Array2<f64>,
    repo_ids: Vec<String>,
    window_labels: Vec<String>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("actual is {actual:?} but predicted is {predicted:?}")]
    ShapeMismatch { actual: (usize, usize), predicted: (usize, usize) },
    #[error("labels disagree with matrix shape: {0} repo ids, {1} window labels for {2:?}")]
    LabelMismatch(usize, usize, (usize, usize)),
    #[error("non-finite value in {which} at ({r}, {t})")]
    NonFinite { which: &'static str, r: usize, t: usize },
}

impl EvaluationPanel {
    pub fn new(
        actual: Array2<f64>,
        predicted: Array2<f64>,
        repo_ids: Vec<String>,
        window_labels: Vec<String>,
    ) -> Result<Self, EvalError> {
        if actual.dim() != predicted.dim() {
            return Err(EvalError::ShapeMismatch { actual: actual.dim(), predicted: predicted.dim() });
        }
        if repo_ids.len() != actual.nrows() || window_labels.len() != actual.ncols() {
            return Err(EvalError::LabelMismatch(repo_ids.len(), window_labels.len(), actual.dim()));
        }
        for (which, m) in [("actual", &actual), ("predicted", &predicted)] {
            for ((r, t), &v) in m.indexed_iter() {
                if !v.is_finite() {
                    return Err(EvalError::NonFinite { which, r, t });
                }
            }
        }
        Ok(EvaluationPanel { actual, predicted, repo_ids, window_labels })
    }

    pub fn num_repos(&self) -> usize {
        self.actual.nrows()
    }

    pub fn num_windows(&self) -> usize {
        self.actual.ncols()
    }

    pub fn repo_ids(&self) -> &[String] {
        &self.repo_ids
    }

    pub fn window_labels(&self) -> &[String] {
        &self.window_labels
    }

    /// Root mean squared error of one repository across all windows:
    /// sqrt((1/T) Σ_t (Y_{r,t} − Ŷ_{r,t})²).
    pub fn rmse_r(&self, r: usize) -> f64 {
        let t = self.num_windows() as f64;
        let ss: f64 = (0..self.num_windows())
            .map(|c| {
                let e = self.actual[[r, c]] - self.predicted[[r, c]];
                e * e
            })
            .sum();
        (ss / t).sqrt()
    }

    /// Root mean squared error of one window across all repositories:
    /// sqrt((1/R) Σ_r (Y_{r,t} − Ŷ_{r,t})²).
    pub fn rmse_t(&self, t: usize) -> f64 {
        let r = self.num_repos() as f64;
        let ss: f64 = (0..self.num_repos())
            .map(|row| {
                let e = self.actual[[row, t]] - self.predicted[[row, t]];
                e * e
            })
            .sum();
        (ss / r).sqrt()
    }

    /// Total average RMSE over every cell:
    /// sqrt((1/(R·T)) Σ_r Σ_t (Y_{r,t} − Ŷ_{r,t})²).
    pub fn rmse_total(&self) -> f64 {
        let n = (self.num_repos() * self.num_windows()) as f64;
        let ss: f64 = self
            .actual
            .iter()
            .zip(self.predicted.iter())
            .map(|(&y, &p)| (y - p) * (y - p))
            .sum();
        (ss / n).sqrt()
    }

    pub fn rmse_r_series(&self) -> Vec<f64> {
        (0..self.num_repos()).map(|r| self.rmse_r(r)).collect()
    }

    pub fn rmse_t_series(&self) -> Vec<f64> {
        (0..self.num_windows()).map(|t| self.rmse_t(t)).collect()
    }
}

/// All three metric families for one named model.
#[derive(Debug, Clone)]
pub struct ModelMetrics {
    pub name: String,
    pub total: f64,
    pub per_repo: Vec<f64>,
    pub per_window: Vec<f64>,
}

/// Side-by-side metrics for several models against one actual panel.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub models: Vec<ModelMetrics>,
    /// Model with the smallest total average RMSE; `None` when only one
    /// model was compared. Ties go to the earlier model in input order.
    pub winner: Option<String>,
    repo_ids: Vec<String>,
    window_labels: Vec<String>,
}

/// Evaluates every named prediction panel against the shared actuals.
pub fn compare(
    predictions: &[(String, Array2<f64>)],
    actual: &Array2<f64>,
    repo_ids: &[String],
    window_labels: &[String],
) -> Result<ComparisonReport, EvalError> {
    let mut models = Vec::with_capacity(predictions.len());
    for (name, pred) in predictions {
        let panel = EvaluationPanel::new(
            actual.clone(),
            pred.clone(),
            repo_ids.to_vec(),
            window_labels.to_vec(),
        )?;
        models.push(ModelMetrics {
            name: name.clone(),
            total: panel.rmse_total(),
            per_repo: panel.rmse_r_series(),
            per_window: panel.rmse_t_series(),
        });
    }
    let winner = if models.len() >= 2 {
        models
            .iter()
            .min_by(|a, b| a.total.partial_cmp(&b.total).expect("totals are finite"))
            .map(|m| m.name.clone())
    } else {
        None
    };
    Ok(ComparisonReport {
        models,
        winner,
        repo_ids: repo_ids.to_vec(),
        window_labels: window_labels.to_vec(),
    })
}

impl ComparisonReport {
    /// Plot-ready CSV: `metric,model,index,value` with index = repo id for
    /// rmse_r rows, window label for rmse_t rows, empty for totals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,model,index,value\n");
        for m in &self.models {
            out.push_str(&format!("rmse_total,{},,{}\n", m.name, m.total));
        }
        for m in &self.models {
            for (r, v) in m.per_repo.iter().enumerate() {
                out.push_str(&format!("rmse_r,{},{},{v}\n", m.name, self.repo_ids[r]));
            }
        }
        for m in &self.models {
            for (t, v) in m.per_window.iter().enumerate() {
                out.push_str(&format!("rmse_t,{},{},{v}\n", m.name, self.window_labels[t]));
            }
        }
        out
    }
}
