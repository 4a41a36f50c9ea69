//! Deterministic Nelder-Mead simplex minimisation.
//!
//! Uses the standard coefficients (reflection 1, expansion 2, contraction
//! 1/2, shrink 1/2). Vertices are ordered by cost with ties broken by
//! lowest index, and NaN costs rank as +inf, so identical inputs always
//! produce the same trajectory. Vertex costs created in one iteration may be
//! evaluated in parallel; results never depend on the schedule.

use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop as soon as the best cost is at or below this value.
    pub target_cost: f64,
    /// Stop when the cost spread across the simplex falls below this.
    pub cost_tolerance: f64,
    /// Stop when every vertex lies within this distance of the best one.
    pub step_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            target_cost: 0.0,
            cost_tolerance: 1e-14,
            step_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Start,
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
}

/// Best vertex after one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub step: Step,
    pub best_cost: f64,
    pub best_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration cap stopped the search.
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

fn rank(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

fn lincomb(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimises `cost` starting from `x0` with initial simplex offsets
/// `steps` (one per coordinate, nonzero).
pub fn nelder_mead<F>(cost: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::invalid("optimisation needs at least one parameter"));
    }
    if steps.len() != n {
        return Err(Error::invalid(format!("{} steps for {n} parameters", steps.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial parameters must be finite"));
    }
    if steps.iter().any(|s| !s.is_finite() || *s == 0.0) {
        return Err(Error::invalid("initial simplex steps must be finite and nonzero"));
    }

    let mut evaluations = 0usize;
    let mut eval_many = |points: Vec<Vec<f64>>| -> Vec<(Vec<f64>, f64)> {
        evaluations += points.len();
        let costs: Vec<f64> = points.par_iter().map(|p| rank(cost(p))).collect();
        points.into_iter().zip(costs).collect()
    };

    let first = eval_many(vec![x0.to_vec()]);
    let mut history = vec![IterationRecord {
        iteration: 0,
        step: Step::Start,
        best_cost: first[0].1,
        best_x: x0.to_vec(),
    }];
    if first[0].1 <= opts.target_cost {
        return Ok(OptimResult {
            x: x0.to_vec(),
            cost: first[0].1,
            iterations: 0,
            evaluations,
            converged: true,
            history,
        });
    }
    let others: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut p = x0.to_vec();
            p[i] += steps[i];
            p
        })
        .collect();
    let mut simplex = first;
    simplex.extend(eval_many(others));

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable sort keeps the lower index first among equal costs.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best <= opts.target_cost {
            converged = true;
            break;
        }
        let spread = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.cost_tolerance && spread <= opts.step_tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let worst_x = simplex[n].0.clone();
        let second = simplex[n - 1].1;

        let reflected = eval_many(vec![lincomb(&centroid, &worst_x, -1.0)]).remove(0);
        let step = if reflected.1 < best {
            let expanded = eval_many(vec![lincomb(&centroid, &worst_x, -2.0)]).remove(0);
            if expanded.1 < reflected.1 {
                simplex[n] = expanded;
                Step::Expand
            } else {
                simplex[n] = reflected;
                Step::Reflect
            }
        } else if reflected.1 < second {
            simplex[n] = reflected;
            Step::Reflect
        } else {
            let outside = reflected.1 < worst;
            let t = if outside { -0.5 } else { 0.5 };
            let contracted = eval_many(vec![lincomb(&centroid, &worst_x, t)]).remove(0);
            let bar = if outside { reflected.1 } else { worst };
            if contracted.1 <= bar {
                simplex[n] = contracted;
                if outside {
                    Step::ContractOutside
                } else {
                    Step::ContractInside
                }
            } else {
                let anchor = simplex[0].0.clone();
                let pts: Vec<Vec<f64>> = simplex[1..].iter().map(|(p, _)| lincomb(&anchor, p, 0.5)).collect();
                let shrunk = eval_many(pts);
                for (slot, v) in simplex[1..].iter_mut().zip(shrunk) {
                    *slot = v;
                }
                Step::Shrink
            }
        };
        let (bx, bc) = simplex
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(i.cmp(j)))
            .map(|(_, (p, c))| (p.clone(), *c))
            .unwrap();
        history.push(IterationRecord {
            iteration: iterations,
            step,
            best_cost: bc,
            best_x: bx,
        });
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, cost) = simplex.swap_remove(0);
    Ok(OptimResult {
        x,
        cost,
        iterations,
        evaluations,
        converged,
        history,
    })
}
