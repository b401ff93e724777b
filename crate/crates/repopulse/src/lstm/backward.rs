//! Exact gradients of the mean-squared-error loss via backpropagation
//! through time, across all loop-back steps and all stacked layers.

use super::{ForwardCache, LstmError, LstmLayerParams, LstmModel};
use ndarray::{Array1, Array2, Axis};

/// Gradient of the loss with respect to every model parameter; shapes mirror
/// the model exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGradients {
    pub layers: Vec<LstmLayerParams>,
    pub readout_w: Array2<f64>,
    pub readout_b: Array1<f64>,
}

impl LstmGradients {
    pub fn zeros_like(model: &LstmModel) -> Self {
        LstmGradients {
            layers: model
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.hidden_size(), l.input_size()))
                .collect(),
            readout_w: Array2::zeros(model.readout_w.dim()),
            readout_b: Array1::zeros(model.readout_b.len()),
        }
    }

    /// Accumulates another gradient set cell-wise.
    pub fn add(&mut self, other: &LstmGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.wi += &b.wi;
            a.ui += &b.ui;
            a.bi += &b.bi;
            a.wf += &b.wf;
            a.uf += &b.uf;
            a.bf += &b.bf;
            a.wg += &b.wg;
            a.ug += &b.ug;
            a.bg += &b.bg;
            a.wo += &b.wo;
            a.uo += &b.uo;
            a.bo += &b.bo;
        }
        self.readout_w += &other.readout_w;
        self.readout_b += &other.readout_b;
    }

    /// Multiplies every entry by `s` (used to average over a batch).
    pub fn scale(&mut self, s: f64) {
        self.for_each_mut(&mut |v| *v *= s);
    }

    /// Same canonical entry order as the model's parameter iteration.
    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.for_each(&mut |v| out.push(v));
        }
        self.readout_w.iter().for_each(|&v| out.push(v));
        self.readout_b.iter().for_each(|&v| out.push(v));
        out
    }

    pub(crate) fn for_each_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            layer.for_each_mut(f);
        }
        self.readout_w.iter_mut().for_each(&mut *f);
        self.readout_b.iter_mut().for_each(&mut *f);
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    col.dot(&row)
}

/// Gradients of `loss(readout(cache), target)` with respect to all parameters.
///
/// The cache must come from [`LstmModel::forward`] on this same model. Works
/// backwards through time (t = L-1 .. 0) and, within each step, from the top
/// layer down, threading recurrent hidden/cell gradients per layer and
/// passing input gradients down the stack.
pub fn backward(model: &LstmModel, cache: &ForwardCache, target: &Array1<f64>) -> Result<LstmGradients, LstmError> {
    let r = model.output_dim();
    if target.len() != r {
        return Err(LstmError::TargetLength { got: target.len(), want: r });
    }
    let nl = model.layers.len();
    let steps = cache.steps.len();
    let mut grads = LstmGradients::zeros_like(model);

    // d(loss)/d(prediction) for MSE = mean_k (p_k - y_k)^2
    let dpred = (&cache.prediction - target) * (2.0 / r as f64);
    let h_final = &cache.steps[steps - 1][nl - 1].h;
    grads.readout_w += &outer(&dpred, h_final);
    grads.readout_b += &dpred;

    // recurrent gradients flowing from step t+1 into step t, per layer;
    // the readout contribution enters the top layer at the final step
    let mut dh_rec: Vec<Array1<f64>> = model.layers.iter().map(|l| Array1::zeros(l.hidden_size())).collect();
    let mut dc_rec = dh_rec.clone();
    dh_rec[nl - 1] = model.readout_w.t().dot(&dpred);

    for t in (0..steps).rev() {
        // gradient arriving at layer l's hidden output from layer l+1's input
        let mut dh_from_above: Option<Array1<f64>> = None;
        for l in (0..nl).rev() {
            let cell = &cache.steps[t][l];
            let params = &model.layers[l];

            let mut dh = dh_rec[l].clone();
            if let Some(above) = dh_from_above.take() {
                dh += &above;
            }

            let do_ = &dh * &cell.tanh_c;
            let dc = &dc_rec[l] + &(&dh * &cell.o * cell.tanh_c.mapv(|v| 1.0 - v * v));
            let di = &dc * &cell.g;
            let dg = &dc * &cell.i;
            let df = &dc * &cell.c_prev;
            dc_rec[l] = &dc * &cell.f;

            // back through the gate nonlinearities to pre-activations
            let da_i = &di * &cell.i * &cell.i.mapv(|v| 1.0 - v);
            let da_f = &df * &cell.f * &cell.f.mapv(|v| 1.0 - v);
            let da_o = &do_ * &cell.o * &cell.o.mapv(|v| 1.0 - v);
            let da_g = &dg * &cell.g.mapv(|v| 1.0 - v * v);

            let gl = &mut grads.layers[l];
            gl.wi += &outer(&da_i, &cell.input);
            gl.ui += &outer(&da_i, &cell.h_prev);
            gl.bi += &da_i;
            gl.wf += &outer(&da_f, &cell.input);
            gl.uf += &outer(&da_f, &cell.h_prev);
            gl.bf += &da_f;
            gl.wg += &outer(&da_g, &cell.input);
            gl.ug += &outer(&da_g, &cell.h_prev);
            gl.bg += &da_g;
            gl.wo += &outer(&da_o, &cell.input);
            gl.uo += &outer(&da_o, &cell.h_prev);
            gl.bo += &da_o;

            dh_rec[l] = params.ui.t().dot(&da_i)
                + params.uf.t().dot(&da_f)
                + params.ug.t().dot(&da_g)
                + params.uo.t().dot(&da_o);

            if l > 0 {
                dh_from_above = Some(
                    params.wi.t().dot(&da_i)
                        + params.wf.t().dot(&da_f)
                        + params.wg.t().dot(&da_g)
                        + params.wo.t().dot(&da_o),
                );
            }
        }
    }
    Ok(grads)
}
