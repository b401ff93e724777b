//! Derivative-free minimization: Nelder–Mead simplex descent with a few
//! deterministic restarts at different simplex scales.

/// Result of a simplex run: the best point found and whether the simplex
/// collapsed below tolerance (as opposed to hitting the iteration cap).
#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const VALUE_TOL: f64 = 1e-10;

fn simplex_run(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, max_iters: usize) -> MinimizeOutcome {
    let n = x0.len();
    // initial simplex: x0 plus one vertex displaced along each axis
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    points.push(x0.to_vec());
    for k in 0..n {
        let mut p = x0.to_vec();
        p[k] += if p[k].abs() > 1e-8 { step * p[k].abs() } else { step };
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let mut converged = false;

    for _ in 0..max_iters {
        // order vertices best..worst
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let points_sorted: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        points = points_sorted;
        values = values_sorted;

        if (values[n] - values[0]).abs() < VALUE_TOL * (1.0 + values[0].abs()) {
            converged = true;
            break;
        }

        // centroid of the n best vertices
        let mut centroid = vec![0.0; n];
        for p in points.iter().take(n) {
            for (c, &v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let blend = |a: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&points[n])
                .map(|(&c, &w)| c + a * (c - w))
                .collect()
        };

        let reflected = blend(REFLECT);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = blend(EXPAND);
            let fe = f(&expanded);
            if fe < fr {
                points[n] = expanded;
                values[n] = fe;
            } else {
                points[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            points[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] {
                blend(REFLECT * CONTRACT)
            } else {
                blend(-CONTRACT)
            };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                points[n] = contracted;
                values[n] = fc;
            } else {
                // shrink everything toward the best vertex
                let best = points[0].clone();
                for k in 1..=n {
                    for (pv, &bv) in points[k].iter_mut().zip(&best) {
                        *pv = bv + SHRINK * (*pv - bv);
                    }
                    values[k] = f(&points[k]);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    MinimizeOutcome { x: points[best].clone(), value: values[best], converged }
}

/// Minimizes `f` starting from `x0`, re-seeding the simplex from the
/// incumbent best at three different scales. Deterministic.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], max_iters_per_run: usize) -> MinimizeOutcome {
    if x0.is_empty() {
        let value = f(x0);
        return MinimizeOutcome { x: Vec::new(), value, converged: true };
    }
    let mut best = MinimizeOutcome { x: x0.to_vec(), value: f(x0), converged: false };
    for step in [0.1, 0.5, 0.02] {
        let run = simplex_run(&mut f, &best.x, step, max_iters_per_run);
        if run.value <= best.value {
            best = run;
        }
    }
    best
}
