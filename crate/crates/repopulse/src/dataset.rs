//! Windowed training data: top-k repo selection, per-repo standardization,
//! sequence construction, and the chronological train/validation split.
//!
//! Feature layout is fixed: with R tracked repositories the per-window feature
//! vector has F = 2R columns — `[0, R)` standardized counts and `[R, 2R)`
//! component size-shares, both in panel row order.

use crate::ingest::CountPanel;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied to per-repo standard deviations so constant series stay
/// finite under transform.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-repo affine normalization fitted on training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Scaler {
    /// The do-nothing scaler (mean 0, std 1), used before a real fit exists.
    pub fn identity(num_repos: usize) -> Scaler {
        Scaler {
            mean: vec![0.0; num_repos],
            std: vec![1.0; num_repos],
        }
    }

    /// Fits means and population standard deviations on the first
    /// `train_window_count` columns of an R x T count matrix. Returns the
    /// scaler plus the indices of degenerate (constant-in-training) rows,
    /// whose std is floored.
    pub fn fit(counts: &Array2<f64>, train_window_count: usize) -> Result<(Scaler, Vec<usize>), DatasetError> {
        if train_window_count < 2 {
            return Err(DatasetError::TooFewTrainingWindows(train_window_count));
        }
        if train_window_count > counts.ncols() {
            return Err(DatasetError::TooFewTrainingWindows(counts.ncols()));
        }
        let train = counts.slice(ndarray::s![.., ..train_window_count]);
        let n = train_window_count as f64;
        let mut mean = Vec::with_capacity(counts.nrows());
        let mut std = Vec::with_capacity(counts.nrows());
        let mut degenerate = Vec::new();
        for (r, row) in train.axis_iter(Axis(0)).enumerate() {
            let m = row.sum() / n;
            let var = row.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            if s < STD_FLOOR {
                degenerate.push(r);
                std.push(STD_FLOOR);
            } else {
                std.push(s);
            }
        }
        Ok((Scaler { mean, std }, degenerate))
    }

    pub fn num_repos(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Standardizes a full R x T matrix: (x - mean[r]) / std[r] per row.
    pub fn transform(&self, counts: &Array2<f64>) -> Array2<f64> {
        let mut out = counts.clone();
        for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|x| (x - self.mean[r]) / self.std[r]);
        }
        out
    }

    /// Maps a standardized per-repo vector back to the count scale.
    pub fn inverse_transform(&self, z: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(z.iter().enumerate().map(|(r, &v)| v * self.std[r] + self.mean[r]))
    }
}

/// One supervised example: `loopback` consecutive feature windows as input,
/// the standardized counts of the following window as target.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    /// L x F input matrix; row t holds the features of window `first_window + t`.
    pub inputs: Array2<f64>,
    /// Standardized next-window counts, length R.
    pub target: Array1<f64>,
    pub first_window: usize,
    pub target_window: usize,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("top-k of {k} requested but panel has only {r} repos")]
    TopKTooLarge { k: usize, r: usize },
    #[error("k must be positive")]
    TopKZero,
    #[error("standardization needs at least 2 training windows, got {0}")]
    TooFewTrainingWindows(usize),
    #[error("matrices disagree: counts {counts:?} vs component features {comp:?}")]
    FeatureShapeMismatch { counts: (usize, usize), comp: (usize, usize) },
    #[error("series of {t} windows too short for loop-back {l} (needs at least {min})", min = .l + 1)]
    SeriesTooShort { t: usize, l: usize },
    #[error("loop-back must be at least 1")]
    ZeroLoopback,
    #[error("non-finite value in feature matrix at row {row}, window {window}")]
    NonFinite { row: usize, window: usize },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    BadRatio(f64),
}

/// Keeps the `k` repositories with the largest total event counts.
///
/// Output row order is descending total, ties broken by repo id
/// lexicographically, so identical panels always select identically.
pub fn select_top_k(panel: &CountPanel, k: usize) -> Result<CountPanel, DatasetError> {
    if k == 0 {
        return Err(DatasetError::TopKZero);
    }
    if k > panel.num_repos() {
        return Err(DatasetError::TopKTooLarge { k, r: panel.num_repos() });
    }
    let mut order: Vec<usize> = (0..panel.num_repos()).collect();
    order.sort_by(|&a, &b| {
        panel
            .total_for_row(b)
            .cmp(&panel.total_for_row(a))
            .then_with(|| panel.repo_ids()[a].cmp(&panel.repo_ids()[b]))
    });
    order.truncate(k);
    let repo_ids: Vec<String> = order.iter().map(|&r| panel.repo_ids()[r].clone()).collect();
    let mut counts = Array2::zeros((k, panel.num_windows()));
    for (new_r, &old_r) in order.iter().enumerate() {
        counts.row_mut(new_r).assign(&panel.counts().row(old_r));
    }
    CountPanel::new(repo_ids, *panel.grid(), counts).map_err(|_| unreachable!("source panel was valid"))
}

/// Fits a scaler on the leading training windows and transforms the whole
/// matrix. Degenerate rows come back as warning indices, not errors.
pub fn standardize(
    counts: &Array2<f64>,
    train_window_count: usize,
) -> Result<(Array2<f64>, Scaler, Vec<usize>), DatasetError> {
    let (scaler, degenerate) = Scaler::fit(counts, train_window_count)?;
    Ok((scaler.transform(counts), scaler, degenerate))
}

/// Slides a length-`loopback` window over the feature columns, producing one
/// sample per position: inputs from windows `[j, j+L)`, target column `j+L`.
pub fn build_sequences(
    standardized: &Array2<f64>,
    comp_features: &Array2<f64>,
    loopback: usize,
) -> Result<Vec<SequenceSample>, DatasetError> {
    if loopback == 0 {
        return Err(DatasetError::ZeroLoopback);
    }
    if standardized.dim() != comp_features.dim() {
        return Err(DatasetError::FeatureShapeMismatch {
            counts: standardized.dim(),
            comp: comp_features.dim(),
        });
    }
    let (r, t) = standardized.dim();
    if t < loopback + 1 {
        return Err(DatasetError::SeriesTooShort { t, l: loopback });
    }
    for matrix in [standardized, comp_features] {
        for ((row, window), &v) in matrix.indexed_iter() {
            if !v.is_finite() {
                return Err(DatasetError::NonFinite { row, window });
            }
        }
    }
    let num_samples = t - loopback;
    let f = 2 * r;
    let mut samples = Vec::with_capacity(num_samples);
    for j in 0..num_samples {
        let mut inputs = Array2::zeros((loopback, f));
        for step in 0..loopback {
            let w = j + step;
            for repo in 0..r {
                inputs[[step, repo]] = standardized[[repo, w]];
                inputs[[step, r + repo]] = comp_features[[repo, w]];
            }
        }
        let target = standardized.column(j + loopback).to_owned();
        samples.push(SequenceSample {
            inputs,
            target,
            first_window: j,
            target_window: j + loopback,
        });
    }
    Ok(samples)
}

/// Number of training samples under the chronological ceil(ratio x N) split.
pub fn train_count(num_samples: usize, ratio: f64) -> Result<usize, DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::BadRatio(ratio));
    }
    // nudge below the exact product so mathematically-integer ratios survive
    // float rounding (0.8 x 10 must give 8, not 9)
    let raw = ratio * num_samples as f64;
    Ok(((raw - 1e-9).ceil().max(0.0)) as usize)
}

/// Chronological split: the first ceil(ratio x N) samples train, the rest
/// validate. No shuffling, so every validation target postdates every
/// training target.
pub fn split_train_val(
    samples: Vec<SequenceSample>,
    ratio: f64,
) -> Result<(Vec<SequenceSample>, Vec<SequenceSample>), DatasetError> {
    let n_train = train_count(samples.len(), ratio)?.min(samples.len());
    let mut train = samples;
    let val = train.split_off(n_train);
    Ok((train, val))
}

/// Dataset manifest CSV: `sample_index,first_window,target_window,split`.
pub fn manifest_csv(train: &[SequenceSample], val: &[SequenceSample]) -> String {
    let mut out = String::from("sample_index,first_window,target_window,split\n");
    for (i, s) in train.iter().chain(val.iter()).enumerate() {
        let split = if i < train.len() { "train" } else { "val" };
        out.push_str(&format!("{i},{},{},{split}\n", s.first_window, s.target_window));
    }
    out
}
