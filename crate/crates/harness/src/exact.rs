//! Exact analysis of a policy against the simulated user as a finite
//! absorbing Markov chain.
//!
//! A chain state is a quantized confusion level plus the engine's dispatch
//! [`Kernel`]. The level axis has `bins` cells: cells `0..bins-1` cover
//! `[k*h, (k+1)*h)` with `h = 1/(bins-1)`, and the last cell is the point
//! `1.0` reached by clamping. A cell is represented by its midpoint, so zone
//! boundaries on the grid classify exactly. The starting level is kept as an
//! exact point. Gaussian level changes are spread over cells by normal CDF
//! mass, with clamped tails falling into the edge cells.
//!
//! Absorption (resolved, disengaged, exhausted) probabilities and the
//! moments of the act count on resolved paths are solved by Gauss-Seidel
//! iteration in the scalar type `T`.

use std::collections::{HashMap, VecDeque};

use mitigator_core::confusion::{classify_zone, InductionType, Level};
use mitigator_core::dsl::PolicyProgram;
use mitigator_core::engine::{EngineConfig, EngineError, Kernel};
use mitigator_core::num::Scalar;
use mitigator_core::simulator::SimUserParams;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_BINS: usize = 101;
pub const DEFAULT_MAX_STATES: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("state space exceeds {limit} states")]
    StateSpaceTooLarge { limit: usize },
    #[error("discretization needs at least 3 bins, got {0}")]
    TooFewBins(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub bins: usize,
    pub max_states: usize,
    /// Convergence threshold on the largest per-sweep change; defaults to a
    /// small multiple of the scalar type's epsilon.
    pub tolerance: Option<f64>,
    pub max_sweeps: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            max_states: DEFAULT_MAX_STATES,
            tolerance: None,
            max_sweeps: 200_000,
        }
    }
}

impl ExactOptions {
    pub fn with_bins(bins: usize) -> Self {
        Self {
            bins,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport<T> {
    pub policy: String,
    pub induction: InductionType,
    pub bins: usize,
    pub states: usize,
    pub p_resolved: T,
    pub p_disengaged: T,
    pub p_exhausted: T,
    /// Probability mass never absorbed (policies that can cycle forever).
    pub p_unabsorbed: T,
    /// Mean acts emitted, conditional on resolution.
    pub expected_steps: Option<T>,
    /// Standard deviation of acts emitted, conditional on resolution.
    pub steps_sd: Option<T>,
    /// Reachable states from which no absorbing outcome is reachable.
    pub stuck_states: usize,
    pub sweeps: usize,
    pub residual: T,
}

impl<T: Scalar> ExactReport<T> {
    pub fn to_f64(&self) -> ExactReport<f64> {
        let c = |v: T| v.to_f64().expect("scalar to f64");
        ExactReport {
            policy: self.policy.clone(),
            induction: self.induction,
            bins: self.bins,
            states: self.states,
            p_resolved: c(self.p_resolved),
            p_disengaged: c(self.p_disengaged),
            p_exhausted: c(self.p_exhausted),
            p_unabsorbed: c(self.p_unabsorbed),
            expected_steps: self.expected_steps.map(c),
            steps_sd: self.steps_sd.map(c),
            stuck_states: self.stuck_states,
            sweeps: self.sweeps,
            residual: c(self.residual),
        }
    }
}

const INITIAL: u32 = u32::MAX;

/// Level quantization grid.
#[derive(Debug, Clone, Copy)]
struct Grid {
    bins: usize,
    h: f64,
}

impl Grid {
    fn new(bins: usize) -> Self {
        Self {
            bins,
            h: 1.0 / (bins - 1) as f64,
        }
    }

    fn last(&self) -> usize {
        self.bins - 1
    }

    fn representative(&self, cell: usize) -> f64 {
        if cell == self.last() {
            1.0
        } else {
            (cell as f64 + 0.5) * self.h
        }
    }

    fn cell_of(&self, x: f64) -> usize {
        if x >= 1.0 {
            self.last()
        } else if x <= 0.0 {
            0
        } else {
            ((x / self.h).floor() as usize).min(self.last() - 1)
        }
    }

    fn lower_edge(&self, cell: usize) -> f64 {
        if cell == 0 {
            f64::NEG_INFINITY
        } else {
            cell as f64 * self.h
        }
    }

    fn upper_edge(&self, cell: usize) -> f64 {
        if cell == self.last() {
            f64::INFINITY
        } else if cell + 1 == self.last() {
            1.0
        } else {
            (cell + 1) as f64 * self.h
        }
    }

    /// Distribution over cells of `clamp(mean + N(0, sd))`.
    fn spread(&self, mean: f64, sd: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if sd == 0.0 {
            out.push((self.cell_of(mean), 1.0));
            return;
        }
        let lo = self.cell_of(mean - 12.0 * sd);
        let hi = self.cell_of(mean + 12.0 * sd);
        let scale = sd * std::f64::consts::SQRT_2;
        let z = |x: f64| (x - mean) / scale;
        let mut total = 0.0;
        for cell in lo..=hi {
            let l = if cell == lo {
                f64::NEG_INFINITY
            } else {
                self.lower_edge(cell)
            };
            let u = if cell == hi {
                f64::INFINITY
            } else {
                self.upper_edge(cell)
            };
            // Evaluate each side in the tail where erfc is accurate.
            let p = if l >= mean {
                0.5 * (libm::erfc(z(l)) - libm::erfc(z(u)))
            } else if u <= mean {
                0.5 * (libm::erfc(-z(u)) - libm::erfc(-z(l)))
            } else {
                1.0 - 0.5 * libm::erfc(z(u)) - 0.5 * libm::erfc(-z(l))
            };
            if p > 0.0 {
                out.push((cell, p));
                total += p;
            }
        }
        for (_, p) in out.iter_mut() {
            *p /= total;
        }
    }
}

#[derive(Debug, Default)]
struct Chain {
    rows: Vec<Vec<(u32, f64)>>,
    resolved: Vec<f64>,
    disengaged: Vec<f64>,
    exhausted: Vec<f64>,
    acts: Vec<bool>,
}

fn build_chain(
    program: &PolicyProgram,
    config: &EngineConfig,
    params: &SimUserParams,
    induction: InductionType,
    opts: &ExactOptions,
) -> Result<Chain, ExactError> {
    let grid = Grid::new(opts.bins);
    let cap = config.limits.horizon();
    let zone_at = |x: f64| classify_zone(Level::saturating(x), &config.thresholds);
    let start = params.initial_level(induction);

    let mut index: HashMap<(u32, Kernel), u32> = HashMap::new();
    let mut queue: VecDeque<(u32, Kernel)> = VecDeque::new();
    let mut chain = Chain::default();

    let mut k0 = Kernel::default();
    k0.observe(zone_at(start), Some(induction), config)?;
    let first = (INITIAL, k0.canonical(cap));
    index.insert(first, 0);
    queue.push_back(first);

    let mut spread = Vec::new();
    while let Some((cell, kernel)) = queue.pop_front() {
        let level = if cell == INITIAL {
            start
        } else {
            grid.representative(cell as usize)
        };
        let mut row: Vec<(u32, f64)> = Vec::new();
        let (mut pr, mut pd, mut pe) = (0.0, 0.0, 0.0);
        let mut k = kernel;
        let decision = k.decide(program, config, None)?;
        let emitted = decision.emission.is_some();
        if decision.ended.is_some() {
            pe = 1.0;
        } else {
            let act = decision.emission.map(|e| e.act_type);
            let (mean, sd) = params.step_distribution(act, induction);
            grid.spread(level + mean, sd, &mut spread);
            for &(target, p) in &spread {
                let mut next = k;
                let effects = next.observe(zone_at(grid.representative(target)), Some(induction), config)?;
                if effects.resolved {
                    pr += p;
                } else if effects.ended.is_some() {
                    pd += p;
                } else {
                    let key = (target as u32, next.canonical(cap));
                    let id = match index.get(&key) {
                        Some(&id) => id,
                        None => {
                            let id = index.len() as u32;
                            if index.len() >= opts.max_states {
                                return Err(ExactError::StateSpaceTooLarge { limit: opts.max_states });
                            }
                            index.insert(key, id);
                            queue.push_back(key);
                            id
                        }
                    };
                    // Distinct target cells always give distinct states.
                    row.push((id, p));
                }
            }
        }
        chain.rows.push(row);
        chain.resolved.push(pr);
        chain.disengaged.push(pd);
        chain.exhausted.push(pe);
        chain.acts.push(emitted);
    }
    Ok(chain)
}

/// Minimal non-negative solution of `x = P x + b` by Gauss-Seidel sweeps
/// in reverse discovery order, with self-loops eliminated per row.
fn gauss_seidel<T: Scalar>(rows: &[Vec<(u32, T)>], b: &[T], tol: T, max_sweeps: usize) -> (Vec<T>, usize, T) {
    let n = rows.len();
    let mut x = vec![T::zero(); n];
    let mut sweeps = 0;
    let mut residual = T::zero();
    while sweeps < max_sweeps {
        sweeps += 1;
        residual = T::zero();
        for s in (0..n).rev() {
            let mut acc = b[s];
            let mut self_p = T::zero();
            for &(t, p) in &rows[s] {
                if t as usize == s {
                    self_p = self_p + p;
                } else {
                    acc = acc + p * x[t as usize];
                }
            }
            let new = acc / (T::one() - self_p);
            residual = residual.max((new - x[s]).abs());
            x[s] = new;
        }
        if residual <= tol {
            break;
        }
    }
    (x, sweeps, residual)
}

fn stuck_states(chain: &Chain) -> usize {
    let n = chain.rows.len();
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (s, row) in chain.rows.iter().enumerate() {
        for &(t, _) in row {
            preds[t as usize].push(s as u32);
        }
    }
    let mut live = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&s| chain.resolved[s] + chain.disengaged[s] + chain.exhausted[s] > 0.0)
        .collect();
    for &s in &stack {
        live[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &preds[s] {
            if !live[p as usize] {
                live[p as usize] = true;
                stack.push(p as usize);
            }
        }
    }
    live.iter().filter(|l| !**l).count()
}

/// Analyzes one induction type.
pub fn analyze<T: Scalar>(
    program: &PolicyProgram,
    config: &EngineConfig,
    params: &SimUserParams,
    induction: InductionType,
    opts: &ExactOptions,
) -> Result<ExactReport<T>, ExactError> {
    if opts.bins < 3 {
        return Err(ExactError::TooFewBins(opts.bins));
    }
    let chain = build_chain(program, config, params, induction, opts)?;
    let rows: Vec<Vec<(u32, T)>> = chain
        .rows
        .iter()
        .map(|r| r.iter().map(|&(t, p)| (t, T::of(p))).collect())
        .collect();
    let conv = |v: &[f64]| v.iter().map(|&p| T::of(p)).collect::<Vec<T>>();
    let tol = T::of(
        opts.tolerance
            .unwrap_or_else(|| (T::epsilon().to_f64().unwrap() * 8.0).max(1e-14)),
    );

    let (r, sw1, res1) = gauss_seidel(&rows, &conv(&chain.resolved), tol, opts.max_sweeps);
    let (d, sw2, res2) = gauss_seidel(&rows, &conv(&chain.disengaged), tol, opts.max_sweeps);
    let (e, sw3, res3) = gauss_seidel(&rows, &conv(&chain.exhausted), tol, opts.max_sweeps);
    let indicator = |s: usize| if chain.acts[s] { T::one() } else { T::zero() };
    // First moment of the act count on resolved paths: g = a*r + P g.
    let g_src: Vec<T> = (0..rows.len()).map(|s| indicator(s) * r[s]).collect();
    let (g, sw4, res4) = gauss_seidel(&rows, &g_src, tol, opts.max_sweeps);
    // Second moment: h = a*r + 2a*(P g) + P h, with P g = g - a*r.
    let two = T::of(2.0);
    let h_src: Vec<T> = (0..rows.len())
        .map(|s| indicator(s) * (r[s] + two * (g[s] - indicator(s) * r[s])))
        .collect();
    let (h, sw5, res5) = gauss_seidel(&rows, &h_src, tol, opts.max_sweeps);

    let p_resolved = r[0];
    let (expected_steps, steps_sd) = if p_resolved > T::zero() {
        let mean = g[0] / p_resolved;
        let var = (h[0] / p_resolved - mean * mean).max(T::zero());
        (Some(mean), Some(var.sqrt()))
    } else {
        (None, None)
    };
    let unabsorbed = (T::one() - r[0] - d[0] - e[0]).max(T::zero());
    Ok(ExactReport {
        policy: program.name().to_string(),
        induction,
        bins: opts.bins,
        states: rows.len(),
        p_resolved,
        p_disengaged: d[0],
        p_exhausted: e[0],
        p_unabsorbed: unabsorbed,
        expected_steps,
        steps_sd,
        stuck_states: stuck_states(&chain),
        sweeps: sw1.max(sw2).max(sw3).max(sw4).max(sw5),
        residual: res1.max(res2).max(res3).max(res4).max(res5),
    })
}

/// Analyzes all four induction types in parallel.
pub fn exact_analysis<T: Scalar>(
    program: &PolicyProgram,
    config: &EngineConfig,
    params: &SimUserParams,
    opts: &ExactOptions,
) -> Result<Vec<ExactReport<T>>, ExactError> {
    InductionType::ALL
        .par_iter()
        .map(|&i| analyze::<T>(program, config, params, i, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cells() {
        let g = Grid::new(101);
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.3), 30);
        assert_eq!(g.cell_of(0.2999), 29);
        assert_eq!(g.cell_of(0.9999), 99);
        assert_eq!(g.cell_of(1.0), 100);
        assert_eq!(g.representative(100), 1.0);
        assert!((g.representative(30) - 0.305).abs() < 1e-12);
        assert_eq!(g.upper_edge(99), 1.0);
    }

    #[test]
    fn spread_is_a_distribution() {
        let g = Grid::new(101);
        let mut out = Vec::new();
        for (m, sd) in [(0.5, 0.1), (-0.2, 0.05), (1.3, 0.2), (0.999, 0.001), (0.42, 0.0)] {
            g.spread(m, sd, &mut out);
            let total: f64 = out.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "{m} {sd}");
        }
        g.spread(0.5, 0.1, &mut out);
        let mean: f64 = out.iter().map(|&(c, p)| p * g.representative(c)).sum();
        assert!((mean - 0.5).abs() < 1e-3);
        // Mass clamped above 1 lands in the point cell.
        g.spread(1.0, 0.1, &mut out);
        let top = out.iter().find(|(c, _)| *c == 100).unwrap().1;
        assert!((top - 0.5).abs() < 1e-9);
    }

    #[test]
    fn solver_small_chain() {
        // 0 -> 1 w.p. 0.5, resolves w.p. 0.5; 1 loops w.p. 0.5, resolves 0.5.
        let rows = vec![vec![(1u32, 0.5f64)], vec![(1u32, 0.5)]];
        let (x, _, _) = gauss_seidel(&rows, &[0.5, 0.5], 1e-15, 1000);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let rows32: Vec<Vec<(u32, f32)>> = vec![vec![(1, 0.5)], vec![(1, 0.5)]];
        let (y, _, _) = gauss_seidel(&rows32, &[0.25, 0.5], 1e-7, 1000);
        assert!((y[0] - 0.75).abs() < 1e-6);
    }
}
