//! Cyclic decomposition of the proportions generator: every rate factors as
//! `r(x, y) = w(x, y) a(x, y)` with the potential factor
//! `a(x, y) = sqrt(pi(y) / pi(x))` and a symmetric weight `w`.

use serde::{Deserialize, Serialize};

use super::ProportionsChain;
use crate::model::{limit_weight, RateKind};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CycleEdge {
    pub from: usize,
    pub to: usize,
    pub k: usize,
    pub l: usize,
    pub rate: f64,
    pub potential_factor: f64,
    pub weight: f64,
}

impl CycleEdge {
    pub fn residual(&self) -> f64 {
        (self.rate - self.weight * self.potential_factor).abs() / self.rate
    }
}

/// Closed-form weight at finite `N` for a move of one spin from `k` to `l`.
pub fn exact_weight(counts: &[u32], k: usize, l: usize, beta: f64, kind: RateKind) -> f64 {
    let n: u32 = counts.iter().sum();
    let nf = n as f64;
    let xk = counts[k] as f64 / nf;
    let xl = counts[l] as f64 / nf;
    let base = (xk * (xl + 1.0 / nf)).sqrt();
    let d = xk - xl - 1.0 / nf;
    match kind {
        RateKind::Sqrt => base,
        RateKind::Metropolis => base * (-0.5 * beta * d.abs()).exp(),
        RateKind::HeatBath => {
            let xp = |m: usize| (counts[m] as f64 - if m == k { 1.0 } else { 0.0 }) / nf;
            let top = (0..counts.len()).map(xp).fold(f64::MIN, f64::max);
            let den: f64 = (0..counts.len()).map(|m| (beta * (xp(m) - top)).exp()).sum();
            base * (0.5 * beta * (xk + xl - 1.0 / nf) - beta * top).exp() / den
        }
    }
}

/// Decompose every edge of the chain.
pub fn cyclic_decomposition(pc: &ProportionsChain) -> Vec<CycleEdge> {
    let beta = pc.params.beta;
    let lw = &pc.chain.log_weights;
    let mut out = Vec::with_capacity(pc.chain.num_edges());
    for x in 0..pc.len() {
        let s = pc.space.state(x);
        for (k, l, y) in pc.space.moves(x) {
            out.push(CycleEdge {
                from: x,
                to: y,
                k,
                l,
                rate: pc.chain.rate(x, y),
                potential_factor: (0.5 * (lw[y] - lw[x])).exp(),
                weight: exact_weight(s, k, l, beta, pc.params.kind),
            });
        }
    }
    out
}

pub fn max_identity_residual(pc: &ProportionsChain) -> f64 {
    cyclic_decomposition(pc).iter().map(|e| e.residual()).fold(0.0, f64::max)
}

/// `max |w_N - w|` over the moves out of the grid point equal to `x` (which
/// must be representable at this `N`).
pub fn weight_gap_at(pc: &ProportionsChain, x: &[f64]) -> Option<f64> {
    let n = pc.params.n as f64;
    let counts: Vec<u32> = x.iter().map(|v| (v * n).round() as u32).collect();
    let i = pc.space.index(&counts)?;
    let beta = pc.params.beta;
    let prop = pc.space.proportion(i);
    Some(
        pc.space
            .moves(i)
            .into_iter()
            .map(|(k, l, _)| {
                (exact_weight(&counts, k, l, beta, pc.params.kind) - limit_weight(&prop, k, l, beta, pc.params.kind))
                    .abs()
            })
            .fold(0.0, f64::max),
    )
}
