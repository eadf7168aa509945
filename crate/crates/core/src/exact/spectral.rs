//! Spectral analysis of a reversible chain: dense eigen-decomposition of the
//! symmetrised generator, total-variation distances to equilibrium (spectral
//! and uniformization routes) and worst-start mixing times.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::chain::FiniteChain;
use crate::error::{CwpError, Result};
use crate::exec::Exec;

/// Dense eigen-decompositions above this many states are refused.
pub const DEFAULT_MAX_DENSE: usize = 5000;

/// Relative mode cut-off: mode `i` is dropped for start `x` at time `t` when
/// `e^{lambda_i t} <= MODE_CUTOFF * sqrt(pi(x))`.
const MODE_CUTOFF: f64 = 1e-17;

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Eigenvalues in decreasing order; the first is the zero mode.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors of `pi^{1/2} L pi^{-1/2}` (columns, same order).
    pub vectors: DMatrix<f64>,
    pub stationary: Vec<f64>,
    sqrt_pi: Vec<f64>,
}

impl Spectrum {
    pub fn new(chain: &FiniteChain, max_dense: usize) -> Result<Self> {
        let n = chain.len();
        if n > max_dense {
            return Err(CwpError::Capacity(format!(
                "dense spectrum of {n} states exceeds the limit {max_dense}"
            )));
        }
        let sp: Vec<f64> = chain.stationary.iter().map(|p| p.sqrt()).collect();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for (y, r) in chain.neighbors(x) {
                // r(x,y) sqrt(pi(x)/pi(y)) from log weights, symmetrised below.
                let v = r * (0.5 * (chain.log_weights[x] - chain.log_weights[y])).exp();
                s[(x, y)] += 0.5 * v;
                s[(y, x)] += 0.5 * v;
            }
            s[(x, x)] = -chain.exit_rate(x);
        }
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Spectrum { eigenvalues, vectors, stationary: chain.stationary.clone(), sqrt_pi: sp })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectral gap `-lambda_1`.
    pub fn gap(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        -self.eigenvalues[1]
    }

    /// Number of eigenvalues with `|lambda| <= tol * max |lambda|`.
    pub fn zero_modes(&self, tol: f64) -> usize {
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.eigenvalues.iter().filter(|v| v.abs() <= tol * scale).count()
    }

    fn active_modes(&self, x: usize, t: f64) -> usize {
        let cut = MODE_CUTOFF * self.sqrt_pi[x];
        // Eigenvalues decrease, so the active set is a prefix.
        self.eigenvalues
            .iter()
            .position(|l| (l * t).exp() <= cut)
            .unwrap_or(self.len())
    }

    /// `P_t(x, .) - pi` without the zero mode.
    pub fn deviation_from(&self, x: usize, t: f64) -> Vec<f64> {
        let n = self.len();
        let m = self.active_modes(x, t);
        let coef: Vec<f64> = (1..m).map(|i| self.vectors[(x, i)] * (self.eigenvalues[i] * t).exp()).collect();
        (0..n)
            .map(|y| {
                let s: f64 = (1..m).map(|i| coef[i - 1] * self.vectors[(y, i)]).sum();
                s * self.sqrt_pi[y] / self.sqrt_pi[x]
            })
            .collect()
    }

    /// Law `P_t(x, .)`.
    pub fn distribution_from(&self, x: usize, t: f64) -> Vec<f64> {
        self.deviation_from(x, t)
            .into_iter()
            .zip(&self.stationary)
            .map(|(d, p)| (d + p).max(0.0))
            .collect()
    }

    /// `d_TV(P_t(x, .), pi)`.
    pub fn tv_from(&self, x: usize, t: f64) -> f64 {
        (0.5 * self.deviation_from(x, t).iter().map(|d| d.abs()).sum::<f64>()).min(1.0)
    }

    /// `max_{x in starts} d_TV(P_t(x,.), pi)` and the maximising start.
    pub fn worst_tv(&self, starts: &[usize], t: f64, exec: Exec) -> (f64, usize) {
        let v = exec.map(starts, |&x| self.tv_from(x, t));
        let mut best = (f64::NEG_INFINITY, starts[0]);
        for (d, &x) in v.iter().zip(starts) {
            if *d > best.0 {
                best = (*d, x);
            }
        }
        best
    }
}

/// `d_TV(P_t(x, .), pi)` by uniformization with log-space Poisson weights.
pub fn tv_uniformization(chain: &FiniteChain, x: usize, t: f64) -> Result<f64> {
    let dist = distribution_uniformization(chain, x, t)?;
    Ok(0.5 * dist.iter().zip(&chain.stationary).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Largest uniformization horizon `Lambda t` accepted.
pub const MAX_UNIFORMIZATION_STEPS: f64 = 5e6;

pub fn distribution_uniformization(chain: &FiniteChain, x: usize, t: f64) -> Result<Vec<f64>> {
    let n = chain.len();
    let lam = chain.max_exit_rate();
    let lt = lam * t;
    if lt > MAX_UNIFORMIZATION_STEPS {
        return Err(CwpError::Capacity(format!("uniformization horizon {lt:e} too long")));
    }
    let mut v = vec![0.0; n];
    v[x] = 1.0;
    let mut out = vec![0.0; n];
    if lt == 0.0 {
        return Ok(v);
    }
    let kmax = (lt + 12.0 * lt.sqrt() + 40.0).ceil() as usize;
    let exit: Vec<f64> = (0..n).map(|y| chain.exit_rate(y)).collect();
    for k in 0..=kmax {
        let lp = -lt + k as f64 * lt.ln() - ln_gamma(k as f64 + 1.0);
        let w = lp.exp();
        if w > 0.0 {
            for (o, vi) in out.iter_mut().zip(&v) {
                *o += w * vi;
            }
        }
        let mut next: Vec<f64> = (0..n).map(|y| v[y] * (1.0 - exit[y] / lam)).collect();
        for (y, &vy) in v.iter().enumerate() {
            if vy != 0.0 {
                for (z, r) in chain.neighbors(y) {
                    next[z] += vy * r / lam;
                }
            }
        }
        v = next;
    }
    Ok(out)
}

/// Which starting states the worst-case distance ranges over.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum StartSet {
    All,
    Explicit(Vec<usize>),
}

/// Exhaustive start sweeps are used up to this many states.
pub const FULL_SWEEP_LIMIT: usize = 2000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingResult {
    pub delta: f64,
    pub t_mix: f64,
    pub worst_start: usize,
    pub starts_examined: usize,
}

/// `T_delta = inf{t : max_x d_TV(P_t(x,.), pi) <= delta}` by doubling and bisection.
pub fn mixing_time_exact(spec: &Spectrum, delta: f64, starts: &StartSet, exec: Exec) -> Result<MixingResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CwpError::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    let all: Vec<usize>;
    let st: &[usize] = match starts {
        StartSet::All => {
            all = (0..spec.len()).collect();
            &all
        }
        StartSet::Explicit(v) => v,
    };
    if st.is_empty() {
        return Err(CwpError::InvalidParameter("empty start set".into()));
    }
    let d = |t: f64| spec.worst_tv(st, t, exec);
    let (d0, w0) = d(0.0);
    if d0 <= delta {
        return Ok(MixingResult { delta, t_mix: 0.0, worst_start: w0, starts_examined: st.len() });
    }
    let gap = spec.gap();
    if gap <= 0.0 {
        return Err(CwpError::Numerical("chain has no spectral gap".into()));
    }
    let mut hi = 1.0 / gap;
    let mut lo = 0.0;
    if d(hi).0 <= delta {
        while d(hi * 0.5).0 <= delta && hi > 1e-14 {
            hi *= 0.5;
        }
        lo = hi * 0.5;
    } else {
        let mut guard = 0;
        while d(hi).0 > delta {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(CwpError::Convergence("mixing-time bracket diverged".into()));
            }
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if d(mid).0 > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, worst) = d(lo);
    Ok(MixingResult { delta, t_mix: hi, worst_start: worst, starts_examined: st.len() })
}
