//! Eyring-Kramers prefactors and the reduced (limit) Markov chain on valley
//! labels, together with its total-variation curve and mixing times.
//!
//! Label `0` stands for the well around `e`, label `k >= 1` for the well
//! around `u_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CwpError, Result};
use crate::landscape::{LandscapeReport, Regime};
use crate::model::{drift_matrix, g_potential, hessian_chart, RateKind};

/// Constant attached to an index-one saddle: `-mu` is the negative eigenvalue
/// of `Hess F(x) A(x)` and `omega = mu e^{-beta G(x)} / sqrt(-det Hess F(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleConstant {
    pub mu: f64,
    pub omega: f64,
}

/// Eigenvalues of `Hess F(x) A(x)`, obtained from the similar symmetric matrix
/// `A^{1/2} Hess A^{1/2}`; sorted ascending.
pub fn product_eigenvalues(x: &[f64], beta: f64, kind: RateKind) -> Vec<f64> {
    let h = hessian_chart(x, beta);
    let a = drift_matrix(x, beta, kind);
    let ae = a.symmetric_eigen();
    let sqrt_d = DMatrix::from_diagonal(&ae.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let root = &ae.eigenvectors * sqrt_d * ae.eigenvectors.transpose();
    let m = &root * h * &root;
    let m = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Same eigenvalues from a general (non-symmetric) eigen-solver on the product
/// itself; used as an independent check.
pub fn product_eigenvalues_general(x: &[f64], beta: f64, kind: RateKind) -> Vec<f64> {
    let m = hessian_chart(x, beta) * drift_matrix(x, beta, kind);
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn saddle_constant(x: &[f64], beta: f64, kind: RateKind) -> Result<SaddleConstant> {
    let h = hessian_chart(x, beta);
    let det = h.determinant();
    let neg_h = h.clone().symmetric_eigen().eigenvalues.iter().filter(|v| **v < 0.0).count();
    if neg_h != 1 || det >= 0.0 {
        return Err(CwpError::EigenStructure(format!(
            "Hessian at {x:?} has {neg_h} negative eigenvalues (det {det:e}); not an index-one saddle"
        )));
    }
    let ev = product_eigenvalues(x, beta, kind);
    let negs: Vec<f64> = ev.iter().cloned().filter(|v| *v < 0.0).collect();
    if negs.len() != 1 {
        return Err(CwpError::EigenStructure(format!(
            "product matrix at {x:?} has {} negative eigenvalues",
            negs.len()
        )));
    }
    let mu = -negs[0];
    let omega = mu * (-beta * g_potential(x, beta)).exp() / (-det).sqrt();
    Ok(SaddleConstant { mu, omega })
}

/// `nu = e^{-beta G(x)} / (beta sqrt(det Hess F(x)))` at a non-degenerate minimum.
pub fn well_constant(x: &[f64], beta: f64) -> Result<f64> {
    let h = hessian_chart(x, beta);
    let min_ev = h.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let det = h.determinant();
    if min_ev <= 0.0 || det <= 0.0 {
        return Err(CwpError::Definiteness(format!(
            "Hessian at {x:?} is not positive definite (min eigenvalue {min_ev:e})"
        )));
    }
    Ok((-beta * g_potential(x, beta)).exp() / (beta * det.sqrt()))
}

/// Prefactors relevant to the regime; constants not defined there are `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prefactors {
    pub kind: RateKind,
    /// Saddle constant at `v_1` (at `e` for `q = 2`).
    pub omega: Option<f64>,
    pub mu: Option<f64>,
    /// Saddle constant at `u_{1,2}`.
    pub omega_prime: Option<f64>,
    pub mu_prime: Option<f64>,
    /// Well constant at `e`.
    pub nu: Option<f64>,
    /// Well constant at `u_1`.
    pub nu_prime: f64,
}

pub fn metastable_prefactors(report: &LandscapeReport, kind: RateKind) -> Result<Prefactors> {
    let beta = report.beta;
    let q = report.q;
    let nu_prime = well_constant(&report.u1, beta)?;
    let nu = if report.e_is_well() { Some(well_constant(&report.e, beta)?) } else { None };
    let v_saddle = if q == 2 { &report.e } else { &report.v1 };
    let needs_v = !matches!(report.regime, Regime::LowSaddle)
        && !(report.regime == Regime::DeepOrdered && q >= 4);
    let needs_u12 = matches!(
        report.regime,
        Regime::SaddleCrossover | Regime::LowSaddle | Regime::DeepOrdered
    ) && q >= 4;
    let (mu, omega) = match saddle_constant(v_saddle, beta, kind) {
        Ok(s) => (Some(s.mu), Some(s.omega)),
        Err(e) if needs_v => return Err(e),
        Err(_) => (None, None),
    };
    let (mu_prime, omega_prime) = match report.u12.as_ref().map(|p| saddle_constant(p, beta, kind)) {
        Some(Ok(s)) => (Some(s.mu), Some(s.omega)),
        Some(Err(e)) if needs_u12 => return Err(e),
        None if needs_u12 => {
            return Err(CwpError::EigenStructure("u_{1,2} is required but absent".into()))
        }
        _ => (None, None),
    };
    Ok(Prefactors { kind, omega, mu, omega_prime, mu_prime, nu, nu_prime })
}

/// Closed-form limit rate for `q = 2` and square-root rates:
/// `(beta/2) sqrt(|F''(e)| F''(u_1)) e^{-beta (G(e) - G(u_1))}`.
pub fn two_spin_rate(beta: f64, u1: &[f64]) -> f64 {
    // One-dimensional second derivative of F along x_1 (x_2 = 1 - x_1).
    let f2 = |t: f64| -2.0 + (1.0 / t + 1.0 / (1.0 - t)) / beta;
    let e = [0.5, 0.5];
    let ge = g_potential(&e, beta);
    let gu = g_potential(u1, beta);
    0.5 * beta * (f2(0.5).abs() * f2(u1[0])).sqrt() * (-beta * (ge - gu)).exp()
}

/// Metastable time-scale `theta_N = 2 pi N e^{beta N D_beta}`.
pub fn metastable_timescale(n: usize, beta: f64, depth: f64) -> f64 {
    2.0 * std::f64::consts::PI * n as f64 * (beta * n as f64 * depth).exp()
}

/// Reduced chain on valley labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitChain {
    pub labels: Vec<usize>,
    /// Off-diagonal jump rates, indexed by position in `labels`.
    pub rates: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
}

pub fn build_limit_chain(report: &LandscapeReport, pf: &Prefactors) -> Result<LimitChain> {
    let q = report.q;
    let labels = report.index_set.clone();
    let n = labels.len();
    let need = |o: Option<f64>, name: &str| {
        o.ok_or_else(|| CwpError::EigenStructure(format!("prefactor {name} unavailable")))
    };
    let mut rates = vec![vec![0.0; n]; n];
    let mut stationary = vec![0.0; n];
    let qf = q as f64;
    match report.regime {
        Regime::TwoSpin => {
            let r = need(pf.omega, "omega")? / pf.nu_prime;
            rates[0][1] = r;
            rates[1][0] = r;
            stationary = vec![0.5, 0.5];
        }
        Regime::Disordered | Regime::Coexistence => {
            let down = need(pf.omega, "omega")? / pf.nu_prime;
            for k in 1..n {
                rates[k][0] = down;
            }
            if report.regime == Regime::Coexistence {
                let nu = need(pf.nu, "nu")?;
                let up = need(pf.omega, "omega")? / nu;
                for k in 1..n {
                    rates[0][k] = up;
                }
                let z = nu + qf * pf.nu_prime;
                stationary[0] = nu / z;
                for s in stationary.iter_mut().skip(1) {
                    *s = pf.nu_prime / z;
                }
            } else {
                stationary[0] = 1.0;
            }
        }
        regime => {
            let r = match regime {
                Regime::Ordered => need(pf.omega, "omega")? / (qf * pf.nu_prime),
                Regime::SaddleCrossover => {
                    (need(pf.omega, "omega")? / qf + need(pf.omega_prime, "omega'")?) / pf.nu_prime
                }
                Regime::LowSaddle => need(pf.omega_prime, "omega'")? / pf.nu_prime,
                Regime::DeepOrdered if q == 3 => need(pf.omega, "omega")? / pf.nu_prime,
                _ => need(pf.omega_prime, "omega'")? / pf.nu_prime,
            };
            for (k, row) in rates.iter_mut().enumerate() {
                for (l, v) in row.iter_mut().enumerate() {
                    if k != l {
                        *v = r;
                    }
                }
            }
            stationary = vec![1.0 / n as f64; n];
        }
    }
    Ok(LimitChain { labels, rates, stationary })
}

impl LimitChain {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut l = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut out = 0.0;
            for j in 0..n {
                if j != k {
                    l[(k, j)] = self.rates[k][j];
                    out += self.rates[k][j];
                }
            }
            l[(k, k)] = -out;
        }
        l
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.len())
            .map(|k| self.rates[k].iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Position of a label in `labels`.
    pub fn position(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// `P_t` by the eigen-decomposition of the symmetrised generator (needs
    /// full support of `pi`), falling back to the matrix exponential.
    pub fn transition_matrix(&self, t: f64) -> DMatrix<f64> {
        if self.stationary.iter().all(|p| *p > 0.0) {
            self.transition_spectral(t)
        } else {
            self.transition_expm(t)
        }
    }

    pub fn transition_spectral(&self, t: f64) -> DMatrix<f64> {
        let n = self.len();
        let l = self.generator();
        let sp: Vec<f64> = self.stationary.iter().map(|p| p.sqrt()).collect();
        let s = DMatrix::from_fn(n, n, |i, j| l[(i, j)] * sp[i] / sp[j]);
        let s = (&s + s.transpose()) * 0.5;
        let eig = s.symmetric_eigen();
        let ex = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| (v * t).exp()));
        let core = &eig.eigenvectors * DMatrix::from_diagonal(&ex) * eig.eigenvectors.transpose();
        DMatrix::from_fn(n, n, |i, j| (core[(i, j)] * sp[j] / sp[i]).max(0.0))
    }

    pub fn transition_expm(&self, t: f64) -> DMatrix<f64> {
        expm(&(self.generator() * t))
    }

    /// `d_TV(P_t(k, .), pi)` for every start, by the default route.
    pub fn tv_profile(&self, t: f64) -> Vec<f64> {
        let p = self.transition_matrix(t);
        (0..self.len())
            .map(|k| 0.5 * (0..self.len()).map(|j| (p[(k, j)] - self.stationary[j]).abs()).sum::<f64>())
            .collect()
    }

    pub fn worst_tv(&self, t: f64) -> f64 {
        self.tv_profile(t).into_iter().fold(0.0, f64::max)
    }

    /// `T(delta) = inf{t >= 0 : max_k d_TV(P_t(k,.), pi) <= delta}`.
    pub fn mixing_time(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CwpError::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
        }
        if self.worst_tv(0.0) <= delta {
            return Ok(0.0);
        }
        let rate = self.max_exit_rate();
        if rate <= 0.0 {
            return Err(CwpError::Numerical("limit chain has no transitions".into()));
        }
        let mut lo = 0.0;
        let mut hi = 1.0 / rate;
        let mut guard = 0;
        while self.worst_tv(hi) > delta {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(CwpError::Convergence("mixing time bracket diverged".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-13 * hi {
                break;
            }
            if self.worst_tv(mid) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        s += 1;
    }
    let b = a * scale;
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
        if term.abs().max() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}
