//! From-scratch multi-layer LSTM forecaster.
//!
//! The model maps a loop-back window of L feature vectors to a joint
//! prediction for all R repositories at the next window. Forward, exact
//! backpropagation through time, Adam training with early stopping, a
//! finite-difference gradient checker, and a loop-back sweep all live here.

mod backward;
mod check;
mod checkpoint;
mod sweep;
mod train;

pub use backward::{backward, LstmGradients};
pub use check::grad_check;
pub use checkpoint::CheckpointError;
pub use sweep::{sweep_loopback, SweepConfig, SweepReport, SweepRow};
pub use train::{train, EarlyStopTracker, StopDecision, TrainConfig, TrainingHistory};

use crate::dataset::Scaler;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Parameters of one LSTM layer: for each gate an input-to-hidden matrix
/// (H x F_l), a hidden-to-hidden matrix (H x H), and a bias vector (H).
///
/// Gate naming: `i` input, `f` forget, `g` cell candidate, `o` output. The
/// same struct doubles as the per-layer gradient holder, since gradients
/// share every shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub wi: Array2<f64>,
    pub ui: Array2<f64>,
    pub bi: Array1<f64>,
    pub wf: Array2<f64>,
    pub uf: Array2<f64>,
    pub bf: Array1<f64>,
    pub wg: Array2<f64>,
    pub ug: Array2<f64>,
    pub bg: Array1<f64>,
    pub wo: Array2<f64>,
    pub uo: Array2<f64>,
    pub bo: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmLayerParams {
            wi: Array2::zeros((hidden, input)),
            ui: Array2::zeros((hidden, hidden)),
            bi: Array1::zeros(hidden),
            wf: Array2::zeros((hidden, input)),
            uf: Array2::zeros((hidden, hidden)),
            bf: Array1::zeros(hidden),
            wg: Array2::zeros((hidden, input)),
            ug: Array2::zeros((hidden, hidden)),
            bg: Array1::zeros(hidden),
            wo: Array2::zeros((hidden, input)),
            uo: Array2::zeros((hidden, hidden)),
            bo: Array1::zeros(hidden),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.bi.len()
    }

    pub fn input_size(&self) -> usize {
        self.wi.ncols()
    }

    /// Visits every entry in the canonical order (wi, ui, bi, wf, uf, bf,
    /// wg, ug, bg, wo, uo, bo; matrices row-major). All flattening,
    /// optimizer state, and numeric checks rely on this single ordering.
    pub(crate) fn for_each(&self, f: &mut impl FnMut(f64)) {
        for m in [&self.wi, &self.ui] {
            m.iter().for_each(|&v| f(v));
        }
        self.bi.iter().for_each(|&v| f(v));
        for m in [&self.wf, &self.uf] {
            m.iter().for_each(|&v| f(v));
        }
        self.bf.iter().for_each(|&v| f(v));
        for m in [&self.wg, &self.ug] {
            m.iter().for_each(|&v| f(v));
        }
        self.bg.iter().for_each(|&v| f(v));
        for m in [&self.wo, &self.uo] {
            m.iter().for_each(|&v| f(v));
        }
        self.bo.iter().for_each(|&v| f(v));
    }

    pub(crate) fn for_each_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for m in [&mut self.wi, &mut self.ui] {
            m.iter_mut().for_each(&mut *f);
        }
        self.bi.iter_mut().for_each(&mut *f);
        for m in [&mut self.wf, &mut self.uf] {
            m.iter_mut().for_each(&mut *f);
        }
        self.bf.iter_mut().for_each(&mut *f);
        for m in [&mut self.wg, &mut self.ug] {
            m.iter_mut().for_each(&mut *f);
        }
        self.bg.iter_mut().for_each(&mut *f);
        for m in [&mut self.wo, &mut self.uo] {
            m.iter_mut().for_each(&mut *f);
        }
        self.bo.iter_mut().for_each(&mut *f);
    }
}

/// Stacked LSTM with a linear readout on the final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub layers: Vec<LstmLayerParams>,
    /// Readout weight, R x H_last.
    pub readout_w: Array2<f64>,
    /// Readout bias, length R.
    pub readout_b: Array1<f64>,
    /// Number of past windows consumed per prediction.
    pub loopback: usize,
    /// Normalization used to map predictions back to count units.
    pub scaler: Scaler,
    /// Seed that produced the initial weights (and drives mini-batch order).
    pub rng_seed: u64,
}

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("input is {got_rows}x{got_cols} but the model expects {want_rows}x{want_cols}")]
    ShapeMismatch { got_rows: usize, got_cols: usize, want_rows: usize, want_cols: usize },
    #[error("target has length {got}, model outputs {want}")]
    TargetLength { got: usize, want: usize },
    #[error("non-finite value in model input")]
    NonFiniteInput,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("row count times col count entries")
}

/// Builds a model with uniform [-s, s] weights, s = 1/sqrt(fan_in), zero
/// biases except forget-gate biases at 1.0. Deterministic in `seed`.
pub fn init_model(
    output_dim: usize,
    input_dim: usize,
    hidden_sizes: &[usize],
    loopback: usize,
    seed: u64,
) -> LstmModel {
    assert!(!hidden_sizes.is_empty(), "at least one hidden layer required");
    assert!(loopback >= 1, "loop-back must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(hidden_sizes.len());
    let mut fan_in = input_dim;
    for &hidden in hidden_sizes {
        let sw = 1.0 / (fan_in as f64).sqrt();
        let su = 1.0 / (hidden as f64).sqrt();
        let mut layer = LstmLayerParams::zeros(hidden, fan_in);
        layer.wi = uniform_matrix(&mut rng, hidden, fan_in, sw);
        layer.ui = uniform_matrix(&mut rng, hidden, hidden, su);
        layer.wf = uniform_matrix(&mut rng, hidden, fan_in, sw);
        layer.uf = uniform_matrix(&mut rng, hidden, hidden, su);
        layer.bf.fill(1.0);
        layer.wg = uniform_matrix(&mut rng, hidden, fan_in, sw);
        layer.ug = uniform_matrix(&mut rng, hidden, hidden, su);
        layer.wo = uniform_matrix(&mut rng, hidden, fan_in, sw);
        layer.uo = uniform_matrix(&mut rng, hidden, hidden, su);
        layers.push(layer);
        fan_in = hidden;
    }
    let sr = 1.0 / (fan_in as f64).sqrt();
    LstmModel {
        readout_w: uniform_matrix(&mut rng, output_dim, fan_in, sr),
        readout_b: Array1::zeros(output_dim),
        layers,
        loopback,
        scaler: Scaler::identity(output_dim),
        rng_seed: seed,
    }
}

/// Everything the backward pass needs: per-step, per-layer activations.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Indexed `steps[t][l]`.
    pub(crate) steps: Vec<Vec<CellCache>>,
    pub(crate) prediction: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct CellCache {
    pub input: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
}

impl LstmModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_dim(&self) -> usize {
        self.readout_b.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden_size()).collect()
    }

    pub fn count_params(&self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |_| n += 1);
        n
    }

    pub(crate) fn for_each_param(&self, f: &mut impl FnMut(f64)) {
        for layer in &self.layers {
            layer.for_each(f);
        }
        self.readout_w.iter().for_each(|&v| f(v));
        self.readout_b.iter().for_each(|&v| f(v));
    }

    pub(crate) fn for_each_param_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            layer.for_each_mut(f);
        }
        self.readout_w.iter_mut().for_each(&mut *f);
        self.readout_b.iter_mut().for_each(&mut *f);
    }

    pub(crate) fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count_params());
        self.for_each_param(&mut |v| out.push(v));
        out
    }

    pub(crate) fn load_flat_params(&mut self, flat: &[f64]) {
        let mut idx = 0;
        self.for_each_param_mut(&mut |p| {
            *p = flat[idx];
            idx += 1;
        });
        assert_eq!(idx, flat.len(), "flat parameter vector length mismatch");
    }

    /// Runs the stacked recurrence over an L x F input window and returns the
    /// readout of the final top-layer hidden state plus the activation cache.
    ///
    /// Per layer and step: gates i, f, o through the logistic sigmoid, the
    /// candidate g through tanh, then c_t = f*c_{t-1} + i*g and
    /// h_t = o*tanh(c_t), with h_0 = c_0 = 0.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<(Array1<f64>, ForwardCache), LstmError> {
        let (rows, cols) = inputs.dim();
        if rows != self.loopback || cols != self.input_dim() {
            return Err(LstmError::ShapeMismatch {
                got_rows: rows,
                got_cols: cols,
                want_rows: self.loopback,
                want_cols: self.input_dim(),
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFiniteInput);
        }
        let nl = self.layers.len();
        let mut h: Vec<Array1<f64>> = self.layers.iter().map(|l| Array1::zeros(l.hidden_size())).collect();
        let mut c = h.clone();
        let mut steps = Vec::with_capacity(rows);
        for t in 0..rows {
            let mut x = inputs.row(t).to_owned();
            let mut cells = Vec::with_capacity(nl);
            for (l, layer) in self.layers.iter().enumerate() {
                let h_prev = h[l].clone();
                let c_prev = c[l].clone();
                let i = (layer.wi.dot(&x) + layer.ui.dot(&h_prev) + &layer.bi).mapv(sigmoid);
                let f = (layer.wf.dot(&x) + layer.uf.dot(&h_prev) + &layer.bf).mapv(sigmoid);
                let g = (layer.wg.dot(&x) + layer.ug.dot(&h_prev) + &layer.bg).mapv(f64::tanh);
                let o = (layer.wo.dot(&x) + layer.uo.dot(&h_prev) + &layer.bo).mapv(sigmoid);
                let c_new = &f * &c_prev + &i * &g;
                let tanh_c = c_new.mapv(f64::tanh);
                let h_new = &o * &tanh_c;
                cells.push(CellCache {
                    input: x,
                    h_prev,
                    c_prev,
                    i,
                    f,
                    g,
                    o,
                    tanh_c,
                    h: h_new.clone(),
                });
                h[l] = h_new.clone();
                c[l] = c_new;
                x = h_new;
            }
            steps.push(cells);
        }
        let prediction = self.readout_w.dot(&h[nl - 1]) + &self.readout_b;
        let cache = ForwardCache { steps, prediction: prediction.clone() };
        Ok((prediction, cache))
    }

    /// Forecast in original count units: forward pass, inverse-standardize,
    /// clamp negatives to zero.
    pub fn predict_next(&self, recent: &Array2<f64>) -> Result<Array1<f64>, LstmError> {
        let (z, _) = self.forward(recent)?;
        let mut counts = self.scaler.inverse_transform(&z);
        counts.mapv_inplace(|v| v.max(0.0));
        Ok(counts)
    }
}

/// Mean squared error between a prediction and its target.
pub fn loss(prediction: &Array1<f64>, target: &Array1<f64>) -> f64 {
    assert_eq!(prediction.len(), target.len(), "prediction/target length mismatch");
    let n = prediction.len() as f64;
    prediction
        .iter()
        .zip(target.iter())
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum::<f64>()
        / n
}
