//! Per-series ARIMA(p,d,q) benchmark: differencing, conditional-sum-of-
//! squares fitting with a simplex optimizer, AIC-based order selection, and
//! rolling one-step forecasts with frozen parameters.

mod optim;
mod roots;

pub use roots::{near_common_factor, reflect_to_unit_exterior, roots_outside_unit_circle};

use optim::minimize;
use thiserror::Error;

/// Root-distance tolerance below which an ARMA fit's AR and MA polynomials
/// are treated as sharing a factor. Order selection skips such fits: the
/// shared factor cancels, so the extra parameters buy no real structure.
const COMMON_FACTOR_TOL: f64 = 0.1;

/// A fitted ARIMA model. AR and MA coefficient vectors have lengths `p` and
/// `q`; `d` counts differencing passes applied before the ARMA core.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    /// Innovation variance estimate (conditional sum of squares / n).
    pub sigma2: f64,
    pub aic: f64,
    /// Whether the simplex collapsed below tolerance rather than hitting
    /// its iteration cap.
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum ArimaError {
    #[error("series of length {len} is too short (need at least {needed})")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("optimizer failed to reach a finite loss for orders ({p},{q})")]
    FitDiverged { p: usize, q: usize },
    #[error("no (p,q) candidate produced a successful fit")]
    AllFitsFailed,
    #[error("non-finite value in input series")]
    NonFiniteInput,
}

/// Innovation-variance floor: a perfect in-sample fit would otherwise send
/// ln(sigma2), and with it the AIC, to negative infinity.
const SIGMA2_FLOOR: f64 = 1e-12;

/// Applies the first-difference operator `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if series.len() <= d {
        return Err(ArimaError::SeriesTooShort { len: series.len(), needed: d + 1 });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverts [`difference`]: `initials[k]` must hold the first value of the
/// k-times-differenced original (k = 0 .. d-1).
pub fn integrate(diffed: &[f64], initials: &[f64]) -> Vec<f64> {
    let mut out = diffed.to_vec();
    for &init in initials.iter().rev() {
        let mut acc = init;
        let mut level = Vec::with_capacity(out.len() + 1);
        level.push(acc);
        for &v in &out {
            acc += v;
            level.push(acc);
        }
        out = level;
    }
    out
}

/// Conditional sum of squares: residuals
/// e_t = y_t - c - Σ φ_i (y_{t-i} - c) - Σ θ_j e_{t-j}
/// for t = 0 .. n-1, with pre-sample deviations and residuals fixed at
/// zero (terms whose lag reaches before the series simply drop out).
/// Returns Σ e_t² — always a sum over exactly n residuals, so losses of
/// different (p, q) fits on the same series are directly comparable.
pub fn css_loss(phi: &[f64], theta: &[f64], intercept: f64, series: &[f64]) -> f64 {
    let p = phi.len();
    let q = theta.len();
    let n = series.len();
    assert!(n > p.max(q), "series length must exceed max(p, q)");
    let mut e = vec![0.0; n];
    let mut loss = 0.0;
    for t in 0..n {
        let mut pred = intercept;
        for (i, &ph) in phi.iter().enumerate() {
            if t > i {
                pred += ph * (series[t - 1 - i] - intercept);
            }
        }
        for (j, &th) in theta.iter().enumerate() {
            if t > j {
                pred += th * e[t - 1 - j];
            }
        }
        let resid = series[t] - pred;
        e[t] = resid;
        loss += resid * resid;
    }
    loss
}

/// Moment-based AR starting point: Levinson–Durbin on the sample
/// autocovariances (the Yule–Walker solution).
fn yule_walker(series: &[f64], p: usize) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut gamma = vec![0.0; p + 1];
    for (k, g) in gamma.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in k..n {
            acc += (series[t] - mean) * (series[t - k] - mean);
        }
        *g = acc / n as f64;
    }
    if gamma[0] < 1e-12 {
        return vec![0.0; p];
    }
    let mut phi = vec![0.0; p];
    let mut prev = vec![0.0; p];
    let mut err = gamma[0];
    for k in 1..=p {
        let mut acc = gamma[k];
        for j in 1..k {
            acc -= prev[j - 1] * gamma[k - j];
        }
        let reflection = acc / err;
        phi[k - 1] = reflection;
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - reflection * prev[k - 1 - j];
        }
        err *= 1.0 - reflection * reflection;
        if err < 1e-12 {
            break;
        }
        prev[..k].copy_from_slice(&phi[..k]);
    }
    phi
}

pub(crate) fn aic_value(n_eff: usize, sigma2: f64, p: usize, q: usize) -> f64 {
    n_eff as f64 * sigma2.ln() + 2.0 * (p + q + 1) as f64
}

/// Fits an ARMA(p, q) model (d = 0) by minimizing the conditional sum of
/// squares with Nelder–Mead from a Yule–Walker start. Coefficients are
/// projected to the stationary/invertible region by root reflection, both
/// during optimization and in the returned model.
pub fn fit_arma(series: &[f64], p: usize, q: usize) -> Result<ArimaModel, ArimaError> {
    let n = series.len();
    if n <= p.max(q) + 1 {
        return Err(ArimaError::SeriesTooShort { len: n, needed: p.max(q) + 2 });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFiniteInput);
    }

    let mean = series.iter().sum::<f64>() / n as f64;
    let mut start = yule_walker(series, p);
    start.extend(std::iter::repeat(0.0).take(q));
    start.push(mean);

    let objective = |v: &[f64]| {
        let phi = reflect_to_unit_exterior(&v[..p], -1.0);
        let theta = reflect_to_unit_exterior(&v[p..p + q], 1.0);
        let loss = css_loss(&phi, &theta, v[p + q], series);
        if loss.is_finite() {
            loss
        } else {
            f64::INFINITY
        }
    };
    let outcome = minimize(objective, &start, 400);
    if !outcome.value.is_finite() {
        return Err(ArimaError::FitDiverged { p, q });
    }

    let ar = reflect_to_unit_exterior(&outcome.x[..p], -1.0);
    let ma = reflect_to_unit_exterior(&outcome.x[p..p + q], 1.0);
    let intercept = outcome.x[p + q];
    let loss = css_loss(&ar, &ma, intercept, series);
    // the loss always sums n residual terms, so every fit on the same
    // series is scored over the same effective sample
    let sigma2 = (loss / n as f64).max(SIGMA2_FLOOR);
    Ok(ArimaModel {
        p,
        d: 0,
        q,
        ar,
        ma,
        intercept,
        sigma2,
        aic: aic_value(n, sigma2, p, q),
        converged: outcome.converged,
    })
}

/// Automatic order selection in the spirit of auto-ARIMA: the differencing
/// order d minimizes the variance of the differenced series (ties to the
/// smaller d), then a full (p, q) grid search keeps the minimum-AIC fit
/// (ties to smaller p+q, then smaller p). Failed cells are skipped, as are
/// fits whose AR and MA polynomials nearly share a root.
pub fn select_order(series: &[f64], p_max: usize, d_max: usize, q_max: usize) -> Result<ArimaModel, ArimaError> {
    if series.len() < 20 {
        return Err(ArimaError::SeriesTooShort { len: series.len(), needed: 20 });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFiniteInput);
    }

    let variance = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };
    let mut best_d = 0;
    let mut best_var = f64::INFINITY;
    for d in 0..=d_max {
        let Ok(diffed) = difference(series, d) else { break };
        let var = variance(&diffed);
        if var < best_var {
            best_var = var;
            best_d = d;
        }
    }

    let diffed = difference(series, best_d)?;
    let mut best: Option<ArimaModel> = None;
    for p in 0..=p_max {
        for q in 0..=q_max {
            let Ok(candidate) = fit_arma(&diffed, p, q) else { continue };
            if near_common_factor(&candidate.ar, &candidate.ma, COMMON_FACTOR_TOL) {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    candidate.aic < b.aic
                        || (candidate.aic == b.aic
                            && (candidate.p + candidate.q, candidate.p) < (b.p + b.q, b.p))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    let mut model = best.ok_or(ArimaError::AllFitsFailed)?;
    model.d = best_d;
    Ok(model)
}

fn binomial(n: usize, k: usize) -> u64 {
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Forecast for the time step immediately after `history`, in original
/// (undifferenced) units, clamped at zero.
pub fn one_step_forecast(model: &ArimaModel, history: &[f64]) -> f64 {
    let w = difference(history, model.d).expect("history longer than d");
    let m = w.len();
    let c = model.intercept;

    // replay the residual recursion over the differenced history, with the
    // same zeroed pre-sample convention the fitter used
    let mut e = vec![0.0; m];
    for t in 0..m {
        let mut pred = c;
        for (i, &ph) in model.ar.iter().enumerate() {
            if t > i {
                pred += ph * (w[t - 1 - i] - c);
            }
        }
        for (j, &th) in model.ma.iter().enumerate() {
            if t > j {
                pred += th * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }

    // one step past the end of w
    let mut fw = c;
    for (i, &ph) in model.ar.iter().enumerate() {
        if m > i {
            fw += ph * (w[m - 1 - i] - c);
        }
    }
    for (j, &th) in model.ma.iter().enumerate() {
        if m > j {
            fw += th * e[m - 1 - j];
        }
    }

    // integrate back through the d differences:
    // y_t = w_t + Σ_{k=1..d} (-1)^{k+1} C(d,k) y_{t-k}
    let mut y = fw;
    let n = history.len();
    for k in 1..=model.d {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        y += sign * binomial(model.d, k) as f64 * history[n - k];
    }
    y.max(0.0)
}

/// One-step-ahead forecasts over `actuals.len()` steps with parameters
/// frozen: after each step the observed actual (not the forecast) is
/// appended to the history.
pub fn rolling_forecast(model: &ArimaModel, history: &[f64], actuals: &[f64]) -> Vec<f64> {
    let mut hist = history.to_vec();
    let mut out = Vec::with_capacity(actuals.len());
    for &actual in actuals {
        out.push(one_step_forecast(model, &hist));
        hist.push(actual);
    }
    out
}

/// Per-repository fit report: `repo_id,p,d,q,aic,sigma2,converged`.
pub fn report_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a ArimaModel)>) -> String {
    let mut out = String::from("repo_id,p,d,q,aic,sigma2,converged\n");
    for (id, m) in rows {
        out.push_str(&format!(
            "{id},{},{},{},{},{},{}\n",
            m.p, m.d, m.q, m.aic, m.sigma2, m.converged
        ));
    }
    out
}
