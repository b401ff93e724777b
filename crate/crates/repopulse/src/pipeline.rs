//! End-to-end orchestration: shared train/validation planning, the joint
//! LSTM run, the per-series ARIMA benchmark run, and their comparison over
//! an identical validation span.

use crate::arima::{self, ArimaError, ArimaModel};
use crate::dataset::{build_sequences, standardize, train_count, DatasetError, SequenceSample};
use crate::eval::{compare, ComparisonReport, EvalError};
use crate::lstm::{init_model, train, LstmError, LstmModel, TrainConfig, TrainingHistory};
use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error(transparent)]
    Arima(#[from] ArimaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{num_windows} windows with loop-back {loopback} leave no validation span")]
    EmptyValidation { num_windows: usize, loopback: usize },
    #[error("runs cover different validation windows and cannot be compared")]
    MismatchedRuns,
}

/// How a panel's windows divide into training and validation.
///
/// Sample j consumes input windows [j, j+L) and targets window j+L. The
/// first `n_train` samples train; every later sample is validation. All
/// training-visible windows — inputs and targets alike — lie inside
/// [0, train_window_count), which is also the span that normalization
/// statistics and ARIMA fits may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub loopback: usize,
    pub num_windows: usize,
    pub num_samples: usize,
    pub n_train: usize,
    /// Windows visible during training: n_train + loopback.
    pub train_window_count: usize,
}

impl SplitPlan {
    /// Global indices of the validation target windows, in forecast order.
    pub fn val_windows(&self) -> Vec<usize> {
        (self.train_window_count..self.num_windows).collect()
    }

    pub fn num_val(&self) -> usize {
        self.num_windows - self.train_window_count
    }
}

/// Plans the chronological split for `num_windows` panel windows.
pub fn plan_split(num_windows: usize, loopback: usize, ratio: f64) -> Result<SplitPlan, PipelineError> {
    if loopback == 0 {
        return Err(DatasetError::ZeroLoopback.into());
    }
    if num_windows < loopback + 2 {
        return Err(DatasetError::SeriesTooShort { t: num_windows, l: loopback }.into());
    }
    let num_samples = num_windows - loopback;
    let n_train = train_count(num_samples, ratio)?;
    if n_train == 0 || n_train >= num_samples {
        return Err(PipelineError::EmptyValidation { num_windows, loopback });
    }
    Ok(SplitPlan {
        loopback,
        num_windows,
        num_samples,
        n_train,
        train_window_count: n_train + loopback,
    })
}

/// Configuration of one joint-LSTM run.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmRunConfig {
    pub hidden_sizes: Vec<usize>,
    pub loopback: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for LstmRunConfig {
    fn default() -> Self {
        LstmRunConfig {
            hidden_sizes: vec![16, 16],
            loopback: 8,
            split_ratio: 0.8,
            seed: 42,
            train: TrainConfig::default(),
        }
    }
}

/// Trained model plus its rolling validation forecasts in count units.
#[derive(Debug)]
pub struct LstmRun {
    pub model: LstmModel,
    pub history: TrainingHistory,
    /// R x V forecasts for the validation windows.
    pub predictions: Array2<f64>,
    /// R x V observed counts for the same windows.
    pub actuals: Array2<f64>,
    pub val_windows: Vec<usize>,
    /// Repos whose training series was constant (std floored).
    pub degenerate_repos: Vec<usize>,
}

/// Standardizes counts on the training span, builds sequences with the
/// component size-share features, trains the joint model, and forecasts
/// every validation window one step ahead (inputs are observed actuals, so
/// this matches the ARIMA run's rolling protocol).
pub fn run_lstm(
    counts: &Array2<f64>,
    comp_shares: &Array2<f64>,
    cfg: &LstmRunConfig,
) -> Result<LstmRun, PipelineError> {
    let (num_repos, num_windows) = counts.dim();
    let plan = plan_split(num_windows, cfg.loopback, cfg.split_ratio)?;
    let (z, scaler, degenerate_repos) = standardize(counts, plan.train_window_count)?;
    let samples = build_sequences(&z, comp_shares, cfg.loopback)?;
    debug_assert_eq!(samples.len(), plan.num_samples);
    let (train_samples, val_samples) = samples.split_at(plan.n_train);

    let mut model = init_model(num_repos, 2 * num_repos, &cfg.hidden_sizes, cfg.loopback, cfg.seed);
    model.scaler = scaler;
    let (model, history) = train(model, train_samples, val_samples, &cfg.train)?;

    let mut predictions = Array2::zeros((num_repos, val_samples.len()));
    let mut actuals = Array2::zeros((num_repos, val_samples.len()));
    for (v, sample) in val_samples.iter().enumerate() {
        let forecast = model.predict_next(&sample.inputs)?;
        predictions.column_mut(v).assign(&forecast);
        actuals.column_mut(v).assign(&counts.column(sample.target_window));
    }
    Ok(LstmRun {
        model,
        history,
        predictions,
        actuals,
        val_windows: plan.val_windows(),
        degenerate_repos,
    })
}

/// Configuration of the per-series ARIMA benchmark run. Loop-back and split
/// ratio exist only to pin the validation span to the LSTM's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArimaRunConfig {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
    pub loopback: usize,
    pub split_ratio: f64,
}

impl Default for ArimaRunConfig {
    fn default() -> Self {
        ArimaRunConfig { p_max: 5, d_max: 2, q_max: 5, loopback: 8, split_ratio: 0.8 }
    }
}

/// Per-repo fitted models plus their rolling validation forecasts.
#[derive(Debug)]
pub struct ArimaRun {
    pub models: Vec<ArimaModel>,
    pub predictions: Array2<f64>,
    pub actuals: Array2<f64>,
    pub val_windows: Vec<usize>,
}

/// Fits one auto-selected ARIMA per repository on the training windows and
/// rolls one-step forecasts (parameters frozen, actuals appended) across the
/// validation windows. Repos fit in parallel; results keep panel order.
pub fn run_arima(counts: &Array2<f64>, cfg: &ArimaRunConfig) -> Result<ArimaRun, PipelineError> {
    let (num_repos, num_windows) = counts.dim();
    let plan = plan_split(num_windows, cfg.loopback, cfg.split_ratio)?;
    let twc = plan.train_window_count;

    let per_repo: Result<Vec<(ArimaModel, Vec<f64>)>, ArimaError> = (0..num_repos)
        .into_par_iter()
        .map(|r| {
            let series: Vec<f64> = counts.row(r).to_vec();
            let model = arima::select_order(&series[..twc], cfg.p_max, cfg.d_max, cfg.q_max)?;
            let forecasts = arima::rolling_forecast(&model, &series[..twc], &series[twc..]);
            Ok((model, forecasts))
        })
        .collect();
    let per_repo = per_repo?;

    let num_val = plan.num_val();
    let mut predictions = Array2::zeros((num_repos, num_val));
    let mut actuals = Array2::zeros((num_repos, num_val));
    let mut models = Vec::with_capacity(num_repos);
    for (r, (model, forecasts)) in per_repo.into_iter().enumerate() {
        for (v, &f) in forecasts.iter().enumerate() {
            predictions[[r, v]] = f;
            actuals[[r, v]] = counts[[r, twc + v]];
        }
        models.push(model);
    }
    Ok(ArimaRun { models, predictions, actuals, val_windows: plan.val_windows() })
}

/// Evaluates both runs against the shared actuals, in count units.
pub fn compare_lstm_arima(
    lstm: &LstmRun,
    arima: &ArimaRun,
    repo_ids: &[String],
) -> Result<ComparisonReport, PipelineError> {
    if lstm.val_windows != arima.val_windows || lstm.actuals != arima.actuals {
        return Err(PipelineError::MismatchedRuns);
    }
    let labels: Vec<String> = lstm.val_windows.iter().map(|w| w.to_string()).collect();
    let report = compare(
        &[
            ("lstm".to_string(), lstm.predictions.clone()),
            ("arima".to_string(), arima.predictions.clone()),
        ],
        &lstm.actuals,
        repo_ids,
        &labels,
    )?;
    Ok(report)
}

/// The same comparison in standardized units (diagnostic view): both models'
/// forecasts and the actuals pushed through the LSTM's fitted scaler.
pub fn compare_lstm_arima_standardized(
    lstm: &LstmRun,
    arima: &ArimaRun,
    repo_ids: &[String],
) -> Result<ComparisonReport, PipelineError> {
    if lstm.val_windows != arima.val_windows || lstm.actuals != arima.actuals {
        return Err(PipelineError::MismatchedRuns);
    }
    let scaler = &lstm.model.scaler;
    let labels: Vec<String> = lstm.val_windows.iter().map(|w| w.to_string()).collect();
    let report = compare(
        &[
            ("lstm".to_string(), scaler.transform(&lstm.predictions)),
            ("arima".to_string(), scaler.transform(&arima.predictions)),
        ],
        &scaler.transform(&lstm.actuals),
        repo_ids,
        &labels,
    )?;
    Ok(report)
}

/// One validation sample's forecast origin: used by callers that need the
/// standardized inputs for a given validation window.
pub fn sample_for_window<'a>(samples: &'a [SequenceSample], window: usize) -> Option<&'a SequenceSample> {
    samples.iter().find(|s| s.target_window == window)
}
