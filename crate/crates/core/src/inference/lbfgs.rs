//! Limited-memory BFGS with a backtracking Armijo line search.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    /// No acceptable step along steepest descent.
    Stalled,
    /// The objective could not be evaluated at the starting point.
    Failed,
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Stop when `‖g‖∞ ≤ tol_grad · max(1, |f|)`.
    pub tol_grad: f64,
    pub memory: usize,
    /// Largest change of any coordinate in one step.
    pub max_step: f64,
    /// Stop after five consecutive iterations that each lower `f` by at most
    /// `tol_progress · max(1, |f|)`.
    pub tol_progress: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_grad: 1e-6,
            memory: 10,
            max_step: 2.0,
            tol_progress: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    /// Objective after each accepted iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

impl LbfgsOutcome {
    pub fn grad_norm(&self) -> f64 {
        inf_norm(&self.grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and gradient or `None` where the
/// objective is undefined (such steps are rejected and shortened).
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut evaluations = 1;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x).filter(|(v, g)| v.is_finite() && g.iter().all(|x| x.is_finite()))
    };
    let (mut fx, mut g) = match eval(x0, &mut 0) {
        Some(v) => v,
        None => {
            return LbfgsOutcome {
                x: x0.to_vec(),
                f: f64::INFINITY,
                grad: vec![f64::NAN; x0.len()],
                iterations: 0,
                evaluations,
                status: Status::Failed,
                trace: vec![],
            }
        }
    };
    let mut x = x0.to_vec();
    let mut trace = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut small_progress = 0;

    if x.is_empty() {
        return LbfgsOutcome {
            x,
            f: fx,
            grad: g,
            iterations: 0,
            evaluations,
            status: Status::Converged,
            trace,
        };
    }

    while iterations < opts.max_iters {
        if inf_norm(&g) <= opts.tol_grad * fx.abs().max(1.0) {
            status = Status::Converged;
            break;
        }
        // Two-loop recursion for d = −H g.
        let mut q: Vec<f64> = g.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut step = if s_hist.is_empty() {
            (1.0 / inf_norm(&d)).min(1.0)
        } else {
            1.0
        };
        let biggest = inf_norm(&d) * step;
        if biggest > opts.max_step {
            step *= opts.max_step / biggest;
        }

        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            match eval(&trial, &mut evaluations) {
                Some((ft, gt)) if ft <= fx + 1e-4 * step * slope => {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                Some(_) => step *= 0.5,
                None => step *= 0.1,
            }
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            if s_hist.is_empty() {
                status = Status::Stalled;
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        iterations += 1;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let progress = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        trace.push(fx);
        if progress <= opts.tol_progress * fx.abs().max(1.0) {
            small_progress += 1;
            if small_progress >= 5 {
                status = Status::Converged;
                break;
            }
        } else {
            small_progress = 0;
        }
    }

    LbfgsOutcome {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
        status,
        trace,
    }
}
