//! Model checkpoints: one JSON document holding config, seed, scaler, and
//! every weight array, reloadable to bit-identical parameters.

use super::{LstmLayerParams, LstmModel};
use crate::dataset::Scaler;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint is not valid json: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error("checkpoint would contain a non-finite parameter")]
    NonFinite,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    config: CheckpointConfig,
    seed: u64,
    scaler: Scaler,
    layers: Vec<LayerFile>,
    readout: ReadoutFile,
}

#[derive(Serialize, Deserialize)]
struct CheckpointConfig {
    loopback: usize,
    hidden_sizes: Vec<usize>,
    input_dim: usize,
    output_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    #[serde(rename = "Wi")]
    wi: Vec<Vec<f64>>,
    #[serde(rename = "Ui")]
    ui: Vec<Vec<f64>>,
    bi: Vec<f64>,
    #[serde(rename = "Wf")]
    wf: Vec<Vec<f64>>,
    #[serde(rename = "Uf")]
    uf: Vec<Vec<f64>>,
    bf: Vec<f64>,
    #[serde(rename = "Wg")]
    wg: Vec<Vec<f64>>,
    #[serde(rename = "Ug")]
    ug: Vec<Vec<f64>>,
    bg: Vec<f64>,
    #[serde(rename = "Wo")]
    wo: Vec<Vec<f64>>,
    #[serde(rename = "Uo")]
    uo: Vec<Vec<f64>>,
    bo: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ReadoutFile {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], want: (usize, usize), what: &str) -> Result<Array2<f64>, CheckpointError> {
    if rows.len() != want.0 || rows.iter().any(|r| r.len() != want.1) {
        return Err(CheckpointError::Inconsistent(format!(
            "{what}: expected {}x{} matrix",
            want.0, want.1
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec(want, flat).expect("validated shape"))
}

fn vector(v: &[f64], want: usize, what: &str) -> Result<Array1<f64>, CheckpointError> {
    if v.len() != want {
        return Err(CheckpointError::Inconsistent(format!("{what}: expected length {want}")));
    }
    Ok(Array1::from_vec(v.to_vec()))
}

impl LstmModel {
    /// Serializes the model as a pretty-printed JSON checkpoint. Identical
    /// models always produce identical bytes.
    pub fn to_checkpoint_json(&self) -> Result<String, CheckpointError> {
        let mut finite = true;
        self.for_each_param(&mut |v| finite &= v.is_finite());
        if !finite {
            return Err(CheckpointError::NonFinite);
        }
        let file = CheckpointFile {
            config: CheckpointConfig {
                loopback: self.loopback,
                hidden_sizes: self.hidden_sizes(),
                input_dim: self.input_dim(),
                output_dim: self.output_dim(),
            },
            seed: self.rng_seed,
            scaler: self.scaler.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    wi: matrix_to_rows(&l.wi),
                    ui: matrix_to_rows(&l.ui),
                    bi: l.bi.to_vec(),
                    wf: matrix_to_rows(&l.wf),
                    uf: matrix_to_rows(&l.uf),
                    bf: l.bf.to_vec(),
                    wg: matrix_to_rows(&l.wg),
                    ug: matrix_to_rows(&l.ug),
                    bg: l.bg.to_vec(),
                    wo: matrix_to_rows(&l.wo),
                    uo: matrix_to_rows(&l.uo),
                    bo: l.bo.to_vec(),
                })
                .collect(),
            readout: ReadoutFile {
                w: matrix_to_rows(&self.readout_w),
                b: self.readout_b.to_vec(),
            },
        };
        Ok(serde_json::to_string_pretty(&file).expect("checkpoint structs always serialize"))
    }

    /// Reconstructs a model from checkpoint JSON, validating every declared
    /// shape against the stored arrays.
    pub fn from_checkpoint_json(text: &str) -> Result<LstmModel, CheckpointError> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        let cfg = &file.config;
        if cfg.hidden_sizes.is_empty() {
            return Err(CheckpointError::Inconsistent("no hidden layers".into()));
        }
        if cfg.hidden_sizes.len() != file.layers.len() {
            return Err(CheckpointError::Inconsistent(format!(
                "config declares {} layers, checkpoint stores {}",
                cfg.hidden_sizes.len(),
                file.layers.len()
            )));
        }
        if file.scaler.num_repos() != cfg.output_dim {
            return Err(CheckpointError::Inconsistent("scaler length differs from output_dim".into()));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut fan_in = cfg.input_dim;
        for (k, l) in file.layers.iter().enumerate() {
            let h = cfg.hidden_sizes[k];
            layers.push(LstmLayerParams {
                wi: rows_to_matrix(&l.wi, (h, fan_in), &format!("layers[{k}].Wi"))?,
                ui: rows_to_matrix(&l.ui, (h, h), &format!("layers[{k}].Ui"))?,
                bi: vector(&l.bi, h, &format!("layers[{k}].bi"))?,
                wf: rows_to_matrix(&l.wf, (h, fan_in), &format!("layers[{k}].Wf"))?,
                uf: rows_to_matrix(&l.uf, (h, h), &format!("layers[{k}].Uf"))?,
                bf: vector(&l.bf, h, &format!("layers[{k}].bf"))?,
                wg: rows_to_matrix(&l.wg, (h, fan_in), &format!("layers[{k}].Wg"))?,
                ug: rows_to_matrix(&l.ug, (h, h), &format!("layers[{k}].Ug"))?,
                bg: vector(&l.bg, h, &format!("layers[{k}].bg"))?,
                wo: rows_to_matrix(&l.wo, (h, fan_in), &format!("layers[{k}].Wo"))?,
                uo: rows_to_matrix(&l.uo, (h, h), &format!("layers[{k}].Uo"))?,
                bo: vector(&l.bo, h, &format!("layers[{k}].bo"))?,
            });
            fan_in = h;
        }
        Ok(LstmModel {
            layers,
            readout_w: rows_to_matrix(&file.readout.w, (cfg.output_dim, fan_in), "readout.W")?,
            readout_b: vector(&file.readout.b, cfg.output_dim, "readout.b")?,
            loopback: cfg.loopback,
            scaler: file.scaler,
            rng_seed: file.seed,
        })
    }
}
