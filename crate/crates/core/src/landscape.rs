//! Free-energy landscape of the Curie-Weiss-Potts model.
//!
//! Critical points of `F_beta` on the simplex all have the form
//! `(t, .., t, w, .., w)` (with `t` repeated `q - i` times and
//! `w = (1 - (q - i) t)/i` repeated `i` times) up to permutation, where `t`
//! solves `g_i(t) = beta` for
//!
//! `g_i(t) = i/(1 - q t) * log((1 - (q - i) t) / (i t))`.
//!
//! `g_i` is convex-like on `(0, 1/(q-i))` with minimiser `m_i`; its minimum is
//! the spinodal temperature `beta_{s,i}`. Above it the equation has two roots
//! `u_i < m_i < v_i`.

use serde::{Deserialize, Serialize};

use crate::error::{CwpError, Result};
use crate::model::{self, check_q_beta, free_energy, gradient_chart, hessian_chart, norm};
use crate::roots::{bisect, golden_section_min};

/// Absolute tolerance used to decide that `beta` sits exactly on a critical temperature.
pub const BETA_TOL: f64 = 1e-9;
/// Two critical values closer than this are treated as equal.
pub const VALUE_TOL: f64 = 1e-9;

/// `g_i(t)` in a form that is stable at `t = 1/q` (where `g_i = q`).
pub fn g_branch(i: usize, q: usize, t: f64) -> f64 {
    let it = i as f64 * t;
    let s = (1.0 - q as f64 * t) / it;
    let ratio = if s.abs() < 1e-6 {
        1.0 - s / 2.0 + s * s / 3.0 - s * s * s / 4.0
    } else {
        s.ln_1p() / s
    };
    ratio / t
}

/// Minimiser `m_i` and minimum `beta_{s,i}` of `g_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spinodal {
    pub i: usize,
    pub m: f64,
    pub beta_s: f64,
}

pub fn spinodal(q: usize, i: usize) -> Spinodal {
    assert!(i >= 1 && i < q);
    if 2 * i == q {
        // g_i is symmetric around 1/q in this case.
        return Spinodal { i, m: 1.0 / q as f64, beta_s: q as f64 };
    }
    let hi = 1.0 / (q - i) as f64;
    let m = golden_section_min(|t| g_branch(i, q, t), 1e-12, hi * (1.0 - 1e-12), 1e-15);
    Spinodal { i, m, beta_s: g_branch(i, q, m) }
}

/// Roots `(u_i, v_i)` of `g_i(t) = beta`, or `None` below the spinodal.
pub fn branch_roots(q: usize, i: usize, beta: f64) -> Result<Option<(f64, f64)>> {
    let sp = spinodal(q, i);
    if (beta - sp.beta_s).abs() <= BETA_TOL {
        return Err(CwpError::DegenerateTemperature(format!(
            "beta = {beta} coincides with spinodal beta_s,{i} = {}",
            sp.beta_s
        )));
    }
    if beta < sp.beta_s {
        return Ok(None);
    }
    let f = |t: f64| g_branch(i, q, t) - beta;
    let mut lo = sp.m * 0.5;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(CwpError::RootNotBracketed(format!("u_{i} for beta={beta}")));
        }
    }
    let hi_end = 1.0 / (q - i) as f64;
    let mut gap = (hi_end - sp.m) * 0.5;
    while f(hi_end - gap) <= 0.0 {
        gap *= 0.5;
        if gap < 1e-300 {
            return Err(CwpError::RootNotBracketed(format!("v_{i} for beta={beta}")));
        }
    }
    let u = root_exact_at_uniform(q, beta, sp.m, true).map_or_else(|| bisect(f, lo, sp.m, 0.0), Ok)?;
    let v = root_exact_at_uniform(q, beta, sp.m, false)
        .map_or_else(|| bisect(f, sp.m, hi_end - gap, 0.0), Ok)?;
    Ok(Some((u, v)))
}

/// At `beta = q` the uniform value `1/q` solves every branch equation exactly.
fn root_exact_at_uniform(q: usize, beta: f64, m: f64, lower: bool) -> Option<f64> {
    let e = 1.0 / q as f64;
    if beta == q as f64 && ((lower && e < m) || (!lower && e > m)) {
        Some(e)
    } else {
        None
    }
}

/// Closed form of the second critical temperature, `2(q-1)/(q-2) log(q-1)`, for `q >= 3`.
pub fn beta_c_closed_form(q: usize) -> f64 {
    let qf = q as f64;
    2.0 * (qf - 1.0) / (qf - 2.0) * (qf - 1.0).ln()
}

/// Critical temperatures of the landscape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalTemperatures {
    pub q: usize,
    pub beta1: f64,
    /// `None` for `q = 2`.
    pub beta2: Option<f64>,
    /// `None` for `q = 2`; equals `q` for `q in {3, 4}`.
    pub beta3: Option<f64>,
    /// Spinodal of the second branch (`q >= 4`).
    pub beta_s2: Option<f64>,
}

pub fn critical_temperatures(q: usize) -> Result<CriticalTemperatures> {
    check_q_beta(q, 1.0)?;
    let beta1 = spinodal(q, 1).beta_s;
    if q == 2 {
        return Ok(CriticalTemperatures { q, beta1, beta2: None, beta3: None, beta_s2: None });
    }
    let beta2 = beta_c_closed_form(q);
    let beta_s2 = (q >= 4).then(|| spinodal(q, 2).beta_s);
    let beta3 = if q <= 4 { q as f64 } else { beta_m(q)? };
    Ok(CriticalTemperatures { q, beta1, beta2: Some(beta2), beta3: Some(beta3), beta_s2 })
}

/// Temperature in `(beta_{s,2}, q)` at which `F(u_{1,2}) = F(v_1)` (only `q >= 5`).
pub fn beta_m(q: usize) -> Result<f64> {
    if q < 5 {
        return Err(CwpError::InvalidParameter("beta_m is defined for q >= 5".into()));
    }
    let bs2 = spinodal(q, 2).beta_s;
    let f = |b: f64| match (point_u12(q, b), point_v1(q, b)) {
        (Ok(a), Ok(c)) => free_energy(&a, b) - free_energy(&c, b),
        _ => f64::NAN,
    };
    bisect(f, bs2 + 1e-6, q as f64 - 1e-6, 0.0)
}

/// Numerical solution of `F_beta(u_1) = F_beta(e)` in `(beta_1, q)`; oracle for
/// the closed form of `beta_2`.
pub fn beta2_numeric(q: usize) -> Result<f64> {
    if q < 3 {
        return Err(CwpError::InvalidParameter("beta_2 needs q >= 3".into()));
    }
    let b1 = spinodal(q, 1).beta_s;
    let e = model::uniform(q);
    let f = |b: f64| match point_u1(q, b) {
        Ok(u) => free_energy(&u, b) - free_energy(&e, b),
        Err(_) => f64::NAN,
    };
    bisect(f, b1 + 1e-7, q as f64 - 1e-7, 0.0)
}

/// Point `(t, .., t, w, .., w)` with `w` on the last `i` coordinates replaced by
/// the coordinates listed in `big`.
fn shaped_point(q: usize, i: usize, t: f64, big: &[usize]) -> Vec<f64> {
    let w = (1.0 - (q - i) as f64 * t) / i as f64;
    let mut x = vec![t; q];
    for &k in big {
        x[k] = w;
    }
    x
}

fn branch1(q: usize, beta: f64) -> Result<(f64, f64)> {
    branch_roots(q, 1, beta)?.ok_or_else(|| {
        CwpError::UnsupportedRegime(format!("no secondary minima at beta = {beta} <= beta_1"))
    })
}

/// `u_1`: first coordinate `1 - (q-1) u`, the rest `u`.
pub fn point_u1(q: usize, beta: f64) -> Result<Vec<f64>> {
    let (u, _) = branch1(q, beta)?;
    Ok(shaped_point(q, 1, u, &[0]))
}

/// `u_k` (0-based `k`).
pub fn point_u(q: usize, beta: f64, k: usize) -> Result<Vec<f64>> {
    let (u, _) = branch1(q, beta)?;
    Ok(shaped_point(q, 1, u, &[k]))
}

/// `v_1`: first coordinate `1 - (q-1) v`, the rest `v`.
pub fn point_v1(q: usize, beta: f64) -> Result<Vec<f64>> {
    let (_, v) = branch1(q, beta)?;
    Ok(shaped_point(q, 1, v, &[0]))
}

pub fn point_v(q: usize, beta: f64, k: usize) -> Result<Vec<f64>> {
    let (_, v) = branch1(q, beta)?;
    Ok(shaped_point(q, 1, v, &[k]))
}

/// `u_{k,l}`: coordinates `k` and `l` equal `(1 - (q-2) u_2)/2`, the rest `u_2`.
pub fn point_ukl(q: usize, beta: f64, k: usize, l: usize) -> Result<Vec<f64>> {
    if q < 4 {
        return Err(CwpError::InvalidParameter("u_{k,l} needs q >= 4".into()));
    }
    let (u, _) = branch_roots(q, 2, beta)?.ok_or_else(|| {
        CwpError::UnsupportedRegime(format!("u_{{1,2}} does not exist at beta = {beta}"))
    })?;
    Ok(shaped_point(q, 2, u, &[k, l]))
}

pub fn point_u12(q: usize, beta: f64) -> Result<Vec<f64>> {
    point_ukl(q, beta, 0, 1)
}

/// Classes of critical points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalClass {
    /// The uniform point `e`.
    C1,
    /// `u_1, .., u_q`.
    C2,
    /// `v_1, .., v_q`.
    C3,
    /// Higher branches `2 <= i <= q/2`, except `e`.
    C4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchRoot {
    U,
    V,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub class: CriticalClass,
    pub branch: usize,
    pub root: BranchRoot,
    pub free_energy: f64,
    /// Number of negative Hessian eigenvalues (Morse index); `None` if degenerate.
    pub index: Option<usize>,
    pub gradient_norm: f64,
}

fn subsets(q: usize, i: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, q: usize, i: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == i {
            out.push(cur.clone());
            return;
        }
        for k in start..q {
            cur.push(k);
            rec(k + 1, q, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, q, i, &mut Vec::new(), &mut out);
    out
}

/// Morse index via the chart Hessian.
pub fn morse_index(x: &[f64], beta: f64) -> Option<usize> {
    let h = hessian_chart(x, beta);
    let eig = h.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.iter().any(|v| v.abs() <= 1e-10 * scale) {
        return None;
    }
    Some(eig.eigenvalues.iter().filter(|v| **v < 0.0).count())
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

/// Every critical point of `F_beta`, deduplicated and classified.
///
/// Spinodal temperatures are rejected as degenerate.
pub fn enumerate_critical_points(q: usize, beta: f64) -> Result<Vec<CriticalPoint>> {
    check_q_beta(q, beta)?;
    let e = model::uniform(q);
    let mut pts: Vec<CriticalPoint> = Vec::new();
    let make = |x: Vec<f64>, class, branch, root| {
        let g = norm(&gradient_chart(&x, beta));
        CriticalPoint {
            free_energy: free_energy(&x, beta),
            index: morse_index(&x, beta),
            gradient_norm: g,
            x,
            class,
            branch,
            root,
        }
    };
    pts.push(make(e.clone(), CriticalClass::C1, 0, BranchRoot::Uniform));
    for i in 1..=q / 2 {
        let Some((u, v)) = branch_roots(q, i, beta)? else { continue };
        for (t, root) in [(u, BranchRoot::U), (v, BranchRoot::V)] {
            for big in subsets(q, i) {
                let x = shaped_point(q, i, t, &big);
                if pts.iter().any(|p| same_point(&p.x, &x)) {
                    continue;
                }
                let class = match (i, root) {
                    (1, BranchRoot::U) => CriticalClass::C2,
                    (1, _) => CriticalClass::C3,
                    _ => CriticalClass::C4,
                };
                pts.push(make(x, class, i, root));
            }
        }
    }
    Ok(pts)
}

/// Temperature regimes of the landscape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `q = 2`, `beta > 2`: two symmetric wells separated by `e`.
    TwoSpin,
    /// `beta in (beta_1, beta_2)`: `e` is the global minimum.
    Disordered,
    /// `beta = beta_2`: `e` and `u_k` at equal height.
    Coexistence,
    /// `beta in (beta_2, beta_3)` (or `(beta_2, q)` for `q in {3,4}`).
    Ordered,
    /// `beta = beta_3 < q` (`q >= 5`): `F(u_{1,2}) = F(v_1)`.
    SaddleCrossover,
    /// `beta in (beta_3, q)` for `q >= 5`: `e` is still a local minimum but the
    /// lowest saddle is `u_{1,2}`.
    LowSaddle,
    /// `beta > q` (for `q >= 5`, `beta >= q`): only the `u_k` are minima.
    DeepOrdered,
}

pub fn classify_regime(q: usize, beta: f64) -> Result<Regime> {
    check_q_beta(q, beta)?;
    let t = critical_temperatures(q)?;
    let near = |b: f64| (beta - b).abs() <= BETA_TOL;
    for i in 1..=q / 2 {
        let bs = spinodal(q, i).beta_s;
        if near(bs) {
            return Err(CwpError::DegenerateTemperature(format!(
                "beta = {beta} is the spinodal beta_s,{i} = {bs}"
            )));
        }
    }
    if beta < t.beta1 {
        return Err(CwpError::UnsupportedRegime(format!(
            "beta = {beta} below beta_1 = {}: unique minimum, no metastability",
            t.beta1
        )));
    }
    if q == 2 {
        return Ok(Regime::TwoSpin);
    }
    let b2 = t.beta2.unwrap();
    let b3 = t.beta3.unwrap();
    let qf = q as f64;
    if near(b2) {
        return Ok(Regime::Coexistence);
    }
    if beta < b2 {
        return Ok(Regime::Disordered);
    }
    if q <= 4 {
        if near(qf) {
            return Err(CwpError::UnsupportedRegime(format!(
                "beta = q = {q} is degenerate for q in {{3,4}}"
            )));
        }
        return Ok(if beta < qf { Regime::Ordered } else { Regime::DeepOrdered });
    }
    if near(b3) {
        return Ok(Regime::SaddleCrossover);
    }
    if beta < b3 {
        Ok(Regime::Ordered)
    } else if beta < qf && !near(qf) {
        Ok(Regime::LowSaddle)
    } else {
        Ok(Regime::DeepOrdered)
    }
}

/// Summary of the landscape at `(q, beta)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub q: usize,
    pub beta: f64,
    pub regime: Regime,
    pub temperatures: CriticalTemperatures,
    pub critical_points: Vec<CriticalPoint>,
    pub e: Vec<f64>,
    pub u1: Vec<f64>,
    pub v1: Vec<f64>,
    pub u12: Option<Vec<f64>>,
    /// Saddle height `H_beta` between the deepest wells.
    pub saddle_height: f64,
    /// `D_beta = H_beta - F(u_1)`.
    pub depth: f64,
    /// `F(v_1) - F(e)` while `e` is a local minimum (`beta < q`, `q >= 3`).
    pub depth_hat: Option<f64>,
    /// Index set of the limit chain (`0` stands for `e`).
    pub index_set: Vec<usize>,
    /// Default valley margin.
    pub eta: f64,
}

impl LandscapeReport {
    pub fn f(&self, x: &[f64]) -> f64 {
        free_energy(x, self.beta)
    }

    /// Whether `e` is a local minimum.
    pub fn e_is_well(&self) -> bool {
        self.q >= 3 && self.beta < self.q as f64
    }

    /// Location of the minimum labelled `k` (`0` = `e`, `k >= 1` = `u_k`).
    pub fn minimum(&self, k: usize) -> Vec<f64> {
        if k == 0 {
            self.e.clone()
        } else {
            shaped_point(self.q, 1, self.u1[1], &[k - 1])
        }
    }

    /// Height `Phi(m_k, other minima)` of the well labelled `k`.
    pub fn well_level(&self, k: usize) -> f64 {
        if k == 0 {
            self.f(&self.v1)
        } else {
            self.saddle_height
        }
    }

    pub fn critical_values(&self) -> Vec<f64> {
        distinct_values(self.critical_points.iter().map(|c| c.free_energy).collect())
    }
}

fn distinct_values(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().map_or(true, |l| x - l > VALUE_TOL) {
            out.push(x);
        }
    }
    out
}

pub fn landscape_report(q: usize, beta: f64) -> Result<LandscapeReport> {
    let regime = classify_regime(q, beta)?;
    let temperatures = critical_temperatures(q)?;
    let critical_points = enumerate_critical_points(q, beta)?;
    let e = model::uniform(q);
    let u1 = point_u1(q, beta)?;
    let v1 = point_v1(q, beta)?;
    let u12 = if q >= 4 { point_u12(q, beta).ok() } else { None };
    let f = |x: &[f64]| free_energy(x, beta);
    let saddle_height = match regime {
        Regime::TwoSpin => f(&e),
        Regime::Disordered | Regime::Coexistence | Regime::Ordered => f(&v1),
        Regime::SaddleCrossover | Regime::LowSaddle => f(u12.as_ref().unwrap()),
        Regime::DeepOrdered => match &u12 {
            Some(p) if q >= 4 => f(p),
            _ => f(&v1),
        },
    };
    let depth = saddle_height - f(&u1);
    let e_well = q >= 3 && beta < q as f64;
    let depth_hat = e_well.then(|| f(&v1) - f(&e));
    let index_set: Vec<usize> = match regime {
        Regime::TwoSpin => vec![1, 2],
        Regime::Disordered | Regime::Coexistence => (0..=q).collect(),
        _ => (1..=q).collect(),
    };
    let values = distinct_values(critical_points.iter().map(|c| c.free_energy).collect());
    let min_gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut m = depth.min(min_gap);
    if let Some(dh) = depth_hat {
        m = m.min(dh);
    }
    Ok(LandscapeReport {
        q,
        beta,
        regime,
        temperatures,
        critical_points,
        e,
        u1,
        v1,
        u12,
        saddle_height,
        depth,
        depth_hat,
        index_set,
        eta: 0.25 * m,
    })
}

/// Resolve the symbolic temperatures accepted by the command line.
pub fn resolve_beta(q: usize, spec: &str) -> Result<f64> {
    match spec {
        "auto-b2" => critical_temperatures(q)?
            .beta2
            .ok_or_else(|| CwpError::InvalidParameter("auto-b2 needs q >= 3".into())),
        "auto-b3" => {
            if q < 5 {
                return Err(CwpError::InvalidParameter("auto-b3 needs q >= 5 (beta_3 = q otherwise)".into()));
            }
            beta_m(q)
        }
        s => s
            .parse::<f64>()
            .map_err(|_| CwpError::InvalidParameter(format!("cannot parse beta {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_at_uniform_is_q() {
        for q in 2..9 {
            for i in 1..q {
                assert!((g_branch(i, q, 1.0 / q as f64) - q as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta1_for_two_spins_is_two() {
        assert_eq!(critical_temperatures(2).unwrap().beta1, 2.0);
    }

    #[test]
    fn q3_reference_values() {
        let t = critical_temperatures(3).unwrap();
        assert!((t.beta1 - 2.74564).abs() < 1e-4);
        assert!((t.beta2.unwrap() - 4.0 * 2f64.ln()).abs() < 1e-14);
        let u = point_u1(3, 3.4).unwrap();
        assert!((u[1] - 0.0500309).abs() < 1e-6);
        let v = point_v1(3, 3.4).unwrap();
        assert!((v[1] - 0.393449).abs() < 1e-6);
    }

    #[test]
    fn closed_form_beta2_agrees_with_numeric() {
        for q in 3..=8 {
            let a = beta_c_closed_form(q);
            let b = beta2_numeric(q).unwrap();
            assert!((a - b).abs() < 1e-10, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn q2_has_three_critical_points() {
        let c = enumerate_critical_points(2, 2.5).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|p| p.class != CriticalClass::C3));
    }

    #[test]
    fn q4_branch2_is_symmetric() {
        let c = enumerate_critical_points(4, 4.5).unwrap();
        let c4: Vec<_> = c.iter().filter(|p| p.class == CriticalClass::C4).collect();
        assert_eq!(c4.len(), 6);
    }

    #[test]
    fn spinodal_is_rejected() {
        let b1 = critical_temperatures(3).unwrap().beta1;
        assert!(matches!(
            enumerate_critical_points(3, b1),
            Err(CwpError::DegenerateTemperature(_))
        ));
    }

    #[test]
    fn residuals_are_tiny() {
        for &(q, beta) in &[(3usize, 2.76), (3, 3.4), (5, 4.5), (6, 7.0)] {
            for p in enumerate_critical_points(q, beta).unwrap() {
                assert!(p.gradient_norm < 1e-9, "{q} {beta} {:?}", p);
            }
        }
    }

    #[test]
    fn regimes_for_q5() {
        let t = critical_temperatures(5).unwrap();
        let b2 = t.beta2.unwrap();
        let b3 = t.beta3.unwrap();
        assert!(t.beta1 < b2 && b2 < b3 && b3 < 5.0);
        assert_eq!(classify_regime(5, b2).unwrap(), Regime::Coexistence);
        assert_eq!(classify_regime(5, b3).unwrap(), Regime::SaddleCrossover);
        assert_eq!(classify_regime(5, 0.5 * (b3 + 5.0)).unwrap(), Regime::LowSaddle);
        assert_eq!(classify_regime(5, 6.0).unwrap(), Regime::DeepOrdered);
    }

    #[test]
    fn q3_high_beta_report() {
        let r = landscape_report(3, 3.4).unwrap();
        assert!((r.depth - 0.0332046).abs() < 1e-6);
        assert_eq!(r.index_set, vec![1, 2, 3]);
        assert!(r.eta > 0.0 && r.eta <= r.depth / 4.0);
    }
}
