//! Explicit reversible continuous-time Markov chain on a finite state space,
//! stored as a sparse (CSR) jump-rate table plus its stationary law.

use serde::{Deserialize, Serialize};

use crate::error::{CwpError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteChain {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    rates: Vec<f64>,
    /// Normalised stationary law.
    pub stationary: Vec<f64>,
    /// Log of the unnormalised stationary weights (kept for precise ratios).
    pub log_weights: Vec<f64>,
}

/// One directed edge of the chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl FiniteChain {
    /// Build from per-state adjacency lists `(target, rate)` and log stationary weights.
    pub fn from_adjacency(adj: Vec<Vec<(usize, f64)>>, log_weights: Vec<f64>) -> Result<Self> {
        let n = adj.len();
        if log_weights.len() != n {
            return Err(CwpError::InvalidParameter("weights and adjacency differ in length".into()));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        offsets.push(0);
        for (x, row) in adj.into_iter().enumerate() {
            for (y, r) in row {
                if y >= n || y == x || !(r.is_finite() && r >= 0.0) {
                    return Err(CwpError::InvalidParameter(format!("bad edge {x} -> {y} rate {r}")));
                }
                if r > 0.0 {
                    targets.push(y);
                    rates.push(r);
                }
            }
            offsets.push(targets.len());
        }
        let z = log_sum_exp(&log_weights);
        let stationary = log_weights.iter().map(|w| (w - z).exp()).collect();
        Ok(FiniteChain { offsets, targets, rates, stationary, log_weights })
    }

    /// Build from symmetric conductances `c(x,y) = pi(x) r(x,y)` and a stationary law.
    pub fn from_conductances(n: usize, cond: &[(usize, usize, f64)], pi: &[f64]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(x, y, c) in cond {
            adj[x].push((y, c / pi[x]));
            adj[y].push((x, c / pi[y]));
        }
        FiniteChain::from_adjacency(adj, pi.iter().map(|p| p.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    /// Outgoing `(target, rate)` pairs of `x`.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.targets[r.clone()].iter().cloned().zip(self.rates[r].iter().cloned())
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.len()).flat_map(move |x| self.neighbors(x).map(move |(y, rate)| Edge { from: x, to: y, rate }))
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.neighbors(x).find(|(t, _)| *t == y).map_or(0.0, |(_, r)| r)
    }

    pub fn exit_rate(&self, x: usize) -> f64 {
        self.neighbors(x).map(|(_, r)| r).sum()
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.len()).map(|x| self.exit_rate(x)).fold(0.0, f64::max)
    }

    /// Conductance `pi(x) r(x, y)`.
    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        self.stationary[x] * self.rate(x, y)
    }

    /// Maximum over edges of `|pi(x) r(x,y) - pi(y) r(y,x)| / (pi(x) r(x,y))`,
    /// evaluated through log weights.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for e in self.edges() {
            let back = self.rate(e.to, e.from);
            if back <= 0.0 {
                return f64::INFINITY;
            }
            let d = self.log_weights[e.from] + e.rate.ln() - self.log_weights[e.to] - back.ln();
            worst = worst.max(d.exp_m1().abs());
        }
        worst
    }

    pub fn check_reversible(&self, tol: f64) -> Result<()> {
        let r = self.detailed_balance_residual();
        if r < tol {
            Ok(())
        } else {
            Err(CwpError::Reversibility(format!("detailed-balance residual {r:e} >= {tol:e}")))
        }
    }

    /// Apply the generator: `(L f)(x) = sum_y r(x,y) (f(y) - f(x))`.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| self.neighbors(x).map(|(y, r)| r * (f[y] - f[x])).sum())
            .collect()
    }

    /// Dirichlet form `(1/2) sum_{x,y} pi(x) r(x,y) (f(y) - f(x))^2`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        0.5 * self
            .edges()
            .map(|e| self.stationary[e.from] * e.rate * (f[e.to] - f[e.from]).powi(2))
            .sum::<f64>()
    }

    /// Multiply every rate by `factor(x, y)`; used to inject perturbations in tests.
    pub fn map_rates(&mut self, factor: impl Fn(usize, usize) -> f64) {
        for x in 0..self.len() {
            for i in self.offsets[x]..self.offsets[x + 1] {
                self.rates[i] *= factor(x, self.targets[i]);
            }
        }
    }
}
