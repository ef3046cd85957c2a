//! Limited-memory BFGS minimizer with a bracketing weak-Wolfe line search.
//!
//! Only the minimal contract needed by the penalty loop: monotone decrease,
//! termination on a small gradient, and explicit failure reasons so the
//! caller can reshape the objective and retry.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.9;
const MAX_LINE_SEARCH_STEPS: usize = 60;
/// Relative value slack of the approximate Wolfe test.
const APPROX_WOLFE_SLACK: f64 = 1e-12;
/// Consecutive iterations with negligible relative progress before the
/// iterate is declared stationary.
const STALL_ITERATIONS: usize = 8;
const STALL_RELATIVE_DECREASE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the max-norm of the gradient falls below this.
    pub gradient_tolerance: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            memory: 10,
            max_iterations: 2000,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// Gradient below tolerance.
    Converged,
    /// No representable progress for several iterations.
    Stalled,
    NonFinite,
    LineSearchFailed,
    IterationCap,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(self, Termination::Converged | Termination::Stalled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    /// Best point seen; always finite when the start was.
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    depth: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let scale = dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if !(sy > 1e-12 * scale) || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.depth {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: returns `-H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }
}

struct Step {
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the value.
pub fn minimize<F>(mut objective: F, x0: Vec<f64>, settings: &LbfgsSettings) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut evaluations = 1;
    let finish = |x, value, g: &[f64], iterations, evaluations, termination| Minimum {
        x,
        value,
        gradient_norm: inf_norm(g),
        iterations,
        evaluations,
        termination,
    };
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, f, &g, 0, evaluations, Termination::NonFinite);
    }

    let mut memory = Memory {
        pairs: VecDeque::with_capacity(settings.memory),
        depth: settings.memory.max(1),
    };
    let mut stalled = 0;
    for iteration in 0..settings.max_iterations {
        if inf_norm(&g) <= settings.gradient_tolerance {
            return finish(x, f, &g, iteration, evaluations, Termination::Converged);
        }
        let mut attempt = 0;
        let step = loop {
            let (d, t0) = if memory.pairs.is_empty() {
                let norm = dot(&g, &g).sqrt();
                (g.iter().map(|v| -v).collect::<Vec<_>>(), (1.0 / norm).min(1.0))
            } else {
                let d = memory.direction(&g);
                if dot(&d, &g) < 0.0 {
                    (d, 1.0)
                } else {
                    memory.pairs.clear();
                    continue;
                }
            };
            let (found, used) = line_search(&mut objective, &x, f, &g, &d, t0);
            evaluations += used;
            match found {
                Some(step) => break Some(step),
                None if !memory.pairs.is_empty() && attempt == 0 => {
                    // Retry once along steepest descent.
                    memory.pairs.clear();
                    attempt += 1;
                }
                None => break None,
            }
        };
        let Some(step) = step else {
            return finish(x, f, &g, iteration, evaluations, Termination::LineSearchFailed);
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        memory.push(s, y);

        let decrease = f - step.value;
        if decrease <= STALL_RELATIVE_DECREASE * f.abs().max(1.0) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        x = step.x;
        f = step.value;
        g = step.grad;
        if stalled >= STALL_ITERATIONS {
            return finish(x, f, &g, iteration + 1, evaluations, Termination::Stalled);
        }
    }
    if inf_norm(&g) <= settings.gradient_tolerance {
        return finish(x, f, &g, settings.max_iterations, evaluations, Termination::Converged);
    }
    finish(
        x,
        f,
        &g,
        settings.max_iterations,
        evaluations,
        Termination::IterationCap,
    )
}

/// Bracketing search for a step satisfying the weak Wolfe conditions.
///
/// Near a minimizer the Armijo test drowns in rounding error, so a step is
/// also accepted under the approximate Wolfe conditions: the value may not
/// exceed `f0` by more than a few ulps-worth and the directional derivative
/// must have shrunk to `[c2 slope, (2 c1 - 1) slope]`. Falls back to the best
/// strictly decreasing step when neither can be met.
fn line_search<F>(objective: &mut F, x: &[f64], f0: f64, g0: &[f64], d: &[f64], t0: f64) -> (Option<Step>, usize)
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let slope = dot(g0, d);
    let slack = APPROX_WOLFE_SLACK * f0.abs().max(1.0);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut t = t0;
    let mut best: Option<Step> = None;
    let mut evaluations = 0;
    for _ in 0..MAX_LINE_SEARCH_STEPS {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
        let mut gt = vec![0.0; x.len()];
        let ft = objective(&xt, &mut gt);
        evaluations += 1;
        if !ft.is_finite() || gt.iter().any(|v| !v.is_finite()) {
            hi = t;
        } else {
            let dphi = dot(&gt, d);
            let curvature = dphi >= CURVATURE * slope;
            let armijo = ft <= f0 + ARMIJO * t * slope;
            let approx = ft <= f0 + slack && dphi <= (2.0 * ARMIJO - 1.0) * slope;
            if curvature && (armijo || approx) {
                return (
                    Some(Step {
                        x: xt,
                        value: ft,
                        grad: gt,
                    }),
                    evaluations,
                );
            }
            if dphi >= 0.0 || ft > f0 + slack {
                hi = t;
            } else {
                lo = t;
            }
            if ft < f0 && best.as_ref().is_none_or(|b| ft < b.value) {
                best = Some(Step {
                    x: xt,
                    value: ft,
                    grad: gt,
                });
            }
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
        if hi.is_finite() && (hi - lo) <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    (best, evaluations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let m = minimize(rosen, vec![-1.2, 1.0], &LbfgsSettings::default());
        assert!(m.termination.is_success(), "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 1e3, 1e5];
        let quad = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..x.len() {
                g[i] = scales[i] * (x[i] - i as f64);
                v += 0.5 * scales[i] * (x[i] - i as f64).powi(2);
            }
            v
        };
        let settings = LbfgsSettings {
            gradient_tolerance: 1e-8,
            ..Default::default()
        };
        let m = minimize(quad, vec![5.0; 4], &settings);
        assert!(m.termination.is_success(), "{m:?}");
        for (i, xi) in m.x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn reports_non_finite_start() {
        let m = minimize(
            |_x: &[f64], _g: &mut [f64]| f64::NAN,
            vec![0.0],
            &LbfgsSettings::default(),
        );
        assert_eq!(m.termination, Termination::NonFinite);
    }

    #[test]
    fn reports_iteration_cap() {
        let settings = LbfgsSettings {
            max_iterations: 2,
            gradient_tolerance: 0.0,
            ..Default::default()
        };
        let rosen = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let m = minimize(rosen, vec![-1.2, 1.0], &settings);
        assert_eq!(m.termination, Termination::IterationCap);
        assert_eq!(m.iterations, 2);
    }

    #[test]
    fn finds_the_minimum_of_a_quartic() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 4.0 * x[0].powi(3) - 3.0;
            g[1] = 2.0 * (x[1] + 1.0);
            x[0].powi(4) - 3.0 * x[0] + (x[1] + 1.0).powi(2)
        };
        let m = minimize(f, vec![3.0, 3.0], &LbfgsSettings::default());
        assert!(m.termination.is_success());
        assert!((m.x[0] - 0.75f64.cbrt()).abs() < 1e-6);
        assert!((m.x[1] + 1.0).abs() < 1e-6);
    }
}
