//! Curie-Weiss-Potts model: parameters, free energy on the simplex, Gibbs
//! weights on the discrete simplex and Glauber rates.
//!
//! A proportion vector `x` lives in the simplex `{x_k >= 0, sum x_k = 1}`.
//! Derivatives are taken in the chart formed by the first `q - 1`
//! coordinates, with `x_q = 1 - sum_{k<q} x_k`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{CwpError, Result};

/// Spin counts `(n_1, ..., n_q)` with `sum n_k = N`; the proportion is `n / N`.
pub type GridPoint = Vec<u32>;

/// Glauber rate convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    /// `exp(-beta/2 * dH)`
    #[default]
    Sqrt,
    /// `exp(-beta H(new)) / sum_m exp(-beta H(sigma^{v,m}))`
    HeatBath,
    /// `exp(-beta [dH]_+)`
    Metropolis,
}

impl RateKind {
    pub const ALL: [RateKind; 3] = [RateKind::Sqrt, RateKind::HeatBath, RateKind::Metropolis];

    pub fn as_str(self) -> &'static str {
        match self {
            RateKind::Sqrt => "sqrt",
            RateKind::HeatBath => "heat-bath",
            RateKind::Metropolis => "metropolis",
        }
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateKind {
    type Err = CwpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" | "square-root" => Ok(RateKind::Sqrt),
            "heat-bath" | "heatbath" | "hb" => Ok(RateKind::HeatBath),
            "metropolis" | "mh" => Ok(RateKind::Metropolis),
            other => Err(CwpError::InvalidParameter(format!("unknown rate kind {other:?}"))),
        }
    }
}

/// Model parameters. `n` is the number of spins; landscape quantities ignore it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: usize,
    pub beta: f64,
    pub n: usize,
    #[serde(default)]
    pub kind: RateKind,
}

impl ModelParams {
    pub fn new(q: usize, beta: f64, n: usize, kind: RateKind) -> Result<Self> {
        let p = ModelParams { q, beta, n, kind };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_q_beta(self.q, self.beta)?;
        if self.n < 1 {
            return Err(CwpError::InvalidParameter("N must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_q_beta(q: usize, beta: f64) -> Result<()> {
    if q < 2 {
        return Err(CwpError::InvalidParameter(format!("q must be >= 2, got {q}")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(CwpError::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

#[inline]
fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

/// Mean-field energy `H(x) = -|x|^2 / 2`.
pub fn energy(x: &[f64]) -> f64 {
    -0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

/// Entropy term `S(x) = sum x_k log x_k` (with `0 log 0 = 0`).
pub fn entropy(x: &[f64]) -> f64 {
    x.iter().map(|&v| xlogx(v)).sum()
}

/// Free energy `F_beta(x) = H(x) + S(x) / beta`.
pub fn free_energy(x: &[f64], beta: f64) -> f64 {
    energy(x) + entropy(x) / beta
}

/// `G_beta(x) = log(x_1 ... x_q) / (2 beta)`.
pub fn g_potential(x: &[f64], beta: f64) -> f64 {
    x.iter().map(|v| v.ln()).sum::<f64>() / (2.0 * beta)
}

#[inline]
pub fn phi(t: f64, beta: f64) -> f64 {
    t - t.ln() / beta
}

/// Gradient of `F_beta` in the chart: `d_k F = phi(x_q) - phi(x_k)`, `phi(t) = t - log(t)/beta`.
pub fn gradient_chart(x: &[f64], beta: f64) -> Vec<f64> {
    let q = x.len();
    let pq = phi(x[q - 1], beta);
    (0..q - 1).map(|k| pq - phi(x[k], beta)).collect()
}

/// Hessian of `F_beta` in the chart.
pub fn hessian_chart(x: &[f64], beta: f64) -> DMatrix<f64> {
    let q = x.len();
    let cq = 1.0 / (beta * x[q - 1]) - 1.0;
    DMatrix::from_fn(q - 1, q - 1, |j, k| {
        let d = if j == k { 1.0 / (beta * x[k]) - 1.0 } else { 0.0 };
        d + cq
    })
}

/// Free energy as a function of chart coordinates (used by finite differences).
pub fn free_energy_chart(y: &[f64], beta: f64) -> f64 {
    free_energy(&from_chart(y), beta)
}

pub fn from_chart(y: &[f64]) -> Vec<f64> {
    let mut x = y.to_vec();
    x.push(1.0 - y.iter().sum::<f64>());
    x
}

/// Central finite-difference gradient in the chart (oracle for tests and checks).
pub fn gradient_fd(x: &[f64], beta: f64, h: f64) -> Vec<f64> {
    let q = x.len();
    let y: Vec<f64> = x[..q - 1].to_vec();
    (0..q - 1)
        .map(|k| {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += h;
            ym[k] -= h;
            (free_energy_chart(&yp, beta) - free_energy_chart(&ym, beta)) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Hamiltonian of a configuration `sigma` (spins in `0..q`):
/// `-(1/2N) sum_{u,v} 1{sigma_u = sigma_v}`.
pub fn hamiltonian(sigma: &[usize], q: usize) -> f64 {
    let counts = counts_of(sigma, q);
    let n = sigma.len() as f64;
    -counts.iter().map(|&c| (c as f64).powi(2)).sum::<f64>() / (2.0 * n)
}

pub fn counts_of(sigma: &[usize], q: usize) -> GridPoint {
    let mut c = vec![0u32; q];
    for &s in sigma {
        c[s] += 1;
    }
    c
}

pub fn proportion(counts: &[u32]) -> Vec<f64> {
    let n: u32 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Unnormalised log Gibbs weight of the proportions-chain state:
/// `log N! - sum log n_k! + beta N |x|^2 / 2`.
pub fn log_stationary_weight(counts: &[u32], beta: f64) -> f64 {
    let n: u32 = counts.iter().sum();
    let nf = n as f64;
    let mut s = ln_gamma(nf + 1.0);
    let mut sq = 0.0;
    for &c in counts {
        s -= ln_gamma(c as f64 + 1.0);
        sq += (c as f64) * (c as f64);
    }
    s + beta * sq / (2.0 * nf)
}

/// Per-spin flip rate `c(j -> l)` for a spin currently in state `j`, given counts.
/// For `j == l` this is 1 (no energy change), except for heat-bath where it is
/// the probability of resampling the current value.
pub fn spin_flip_rate(counts: &[u32], j: usize, l: usize, beta: f64, kind: RateKind) -> f64 {
    let n: u32 = counts.iter().sum();
    let nf = n as f64;
    if j == l && kind != RateKind::HeatBath {
        return 1.0;
    }
    let dh = (counts[j] as f64 - counts[l] as f64 - 1.0) / nf;
    match kind {
        RateKind::Sqrt => (-0.5 * beta * dh).exp(),
        RateKind::Metropolis => (-beta * dh.max(0.0)).exp(),
        RateKind::HeatBath => {
            // x' = x - e_j / N, the configuration with the flipping spin removed.
            let xp = |m: usize| {
                let c = counts[m] as f64 - if m == j { 1.0 } else { 0.0 };
                c / nf
            };
            let top = (beta * xp(l)).max(beta * xp(j));
            let num = (beta * xp(l) - top).exp();
            let den: f64 = (0..counts.len()).map(|m| (beta * xp(m) - top).exp()).sum();
            num / den
        }
    }
}

/// Proportions-chain rate `r_N(x, x - e_k/N + e_l/N) = x_k c(k -> l)`.
pub fn proportions_rate(counts: &[u32], k: usize, l: usize, beta: f64, kind: RateKind) -> f64 {
    if k == l || counts[k] == 0 {
        return 0.0;
    }
    let n: u32 = counts.iter().sum();
    (counts[k] as f64 / n as f64) * spin_flip_rate(counts, k, l, beta, kind)
}

/// Limit weight `w(x_k, x_l)` entering the drift matrix of the cyclic decomposition.
pub fn limit_weight(x: &[f64], k: usize, l: usize, beta: f64, kind: RateKind) -> f64 {
    let base = (x[k] * x[l]).sqrt();
    match kind {
        RateKind::Sqrt => base,
        RateKind::Metropolis => base * (-0.5 * beta * (x[k] - x[l]).abs()).exp(),
        RateKind::HeatBath => {
            let top = x.iter().cloned().fold(f64::MIN, f64::max);
            let den: f64 = x.iter().map(|&v| (beta * (v - top)).exp()).sum();
            base * (0.5 * beta * (x[k] + x[l]) - beta * top).exp() / den
        }
    }
}

/// Drift matrix `A(x) = sum_{k<l} w(x_k,x_l) (e_l - e_k)(e_l - e_k)^T` in the chart (`e_q = 0`).
pub fn drift_matrix(x: &[f64], beta: f64, kind: RateKind) -> DMatrix<f64> {
    let q = x.len();
    let d = q - 1;
    let mut a = DMatrix::zeros(d, d);
    for k in 0..q {
        for l in k + 1..q {
            let w = limit_weight(x, k, l, beta, kind);
            // v = e_l - e_k restricted to the chart.
            let mut v = vec![0.0; d];
            if l < d {
                v[l] += 1.0;
            }
            if k < d {
                v[k] -= 1.0;
            }
            for i in 0..d {
                for j in 0..d {
                    a[(i, j)] += w * v[i] * v[j];
                }
            }
        }
    }
    a
}

/// Uniform proportion `e = (1/q, ..., 1/q)`.
pub fn uniform(q: usize) -> Vec<f64> {
    vec![1.0 / q as f64; q]
}
