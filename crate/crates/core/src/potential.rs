//! Potential theory for reversible chains: equilibrium potentials,
//! capacities, mean hitting times, the magic formula, variational bounds and
//! escape-probability estimates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::FiniteChain;
use crate::error::{CwpError, Result};

/// Interior systems up to this size may be solved densely when CG stalls.
pub const DENSE_FALLBACK_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    ConjugateGradient,
    DenseLu,
    Trivial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub values: Vec<f64>,
    /// `max_x |(L u)(x) + rhs(x)/pi(x)|` over the interior.
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

/// Solve `sum_y c(x,y) (u(x) - u(y)) = rhs(x)` on the interior with `u = boundary` elsewhere.
fn solve_dirichlet(chain: &FiniteChain, boundary: &[Option<f64>], rhs: &[f64], tol: f64) -> Result<Solution> {
    let n = chain.len();
    let interior: Vec<usize> = (0..n).filter(|&x| boundary[x].is_none()).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in interior.iter().enumerate() {
        pos[x] = i;
    }
    let mut u: Vec<f64> = boundary.iter().map(|b| b.unwrap_or(0.0)).collect();
    let m = interior.len();
    let pi = &chain.stationary;
    if m == 0 {
        return Ok(Solution { values: u, residual: 0.0, method: SolveMethod::Trivial, iterations: 0 });
    }
    // Right-hand side and diagonal.
    let mut b = vec![0.0; m];
    let mut diag = vec![0.0; m];
    for (i, &x) in interior.iter().enumerate() {
        b[i] = rhs[x];
        for (y, r) in chain.neighbors(x) {
            let c = pi[x] * r;
            diag[i] += c;
            if let Some(g) = boundary[y] {
                b[i] += c * g;
            }
        }
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        interior
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut s = diag[i] * v[i];
                for (y, r) in chain.neighbors(x) {
                    if pos[y] != usize::MAX {
                        s -= pi[x] * r * v[pos[y]];
                    }
                }
                s
            })
            .collect()
    };
    let residual_of = |u: &[f64]| -> f64 {
        let lu = chain.apply_generator(u);
        interior.iter().map(|&x| (lu[x] + rhs[x] / pi[x]).abs()).fold(0.0, f64::max)
    };
    let scale = interior.iter().map(|&x| (rhs[x] / pi[x]).abs()).fold(1.0, f64::max);
    // Preconditioned conjugate gradient.
    let mut xv = vec![0.0; m];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 20 * m + 100;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..m {
            xv[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // Preconditioned residual is (L u + rhs/pi) / exit rate.
        let pre = r.iter().zip(&diag).map(|(a, d)| (a / d).abs()).fold(0.0, f64::max);
        if pre < 1e-3 * tol || it % 25 == 24 {
            for (i, &x) in interior.iter().enumerate() {
                u[x] = xv[i];
            }
            if residual_of(&u) < tol * scale {
                break;
            }
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    for (i, &x) in interior.iter().enumerate() {
        u[x] = xv[i];
    }
    let res = residual_of(&u);
    if res < tol * scale {
        return Ok(Solution { values: u, residual: res, method: SolveMethod::ConjugateGradient, iterations });
    }
    if m > DENSE_FALLBACK_LIMIT {
        return Err(CwpError::Convergence(format!(
            "CG residual {res:e} after {iterations} iterations on {m} unknowns"
        )));
    }
    // Dense LU on the row-scaled (generator) form, then one refinement.
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut bb = DVector::<f64>::zeros(m);
    for (i, &x) in interior.iter().enumerate() {
        a[(i, i)] = diag[i] / pi[x];
        for (y, rr) in chain.neighbors(x) {
            if pos[y] != usize::MAX {
                a[(i, pos[y])] -= rr;
            }
        }
        bb[i] = b[i] / pi[x];
    }
    let lu = a.clone().lu();
    let mut sol = lu.solve(&bb).ok_or_else(|| CwpError::Numerical("singular interior system".into()))?;
    let corr = lu.solve(&(&bb - &a * &sol)).unwrap_or_else(|| DVector::zeros(m));
    sol += corr;
    for (i, &x) in interior.iter().enumerate() {
        u[x] = sol[i];
    }
    let res = residual_of(&u);
    Ok(Solution { values: u, residual: res, method: SolveMethod::DenseLu, iterations })
}

fn check_disjoint(n: usize, a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(CwpError::InvalidParameter("potential problems need non-empty sets".into()));
    }
    let mut mark = vec![false; n];
    for &x in a {
        mark[x] = true;
    }
    if b.iter().any(|&y| mark[y]) {
        return Err(CwpError::InvalidParameter("sets A and B must be disjoint".into()));
    }
    Ok(())
}

/// Equilibrium potential `h_{A,B}(x) = P_x[H_A < H_B]` and the capacity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumPotential {
    pub h: Vec<f64>,
    pub capacity: f64,
    pub residual: f64,
    pub method: SolveMethod,
}

pub const HARMONIC_TOL: f64 = 1e-12;

pub fn equilibrium_potential(chain: &FiniteChain, a: &[usize], b: &[usize]) -> Result<EquilibriumPotential> {
    check_disjoint(chain.len(), a, b)?;
    let mut bd = vec![None; chain.len()];
    for &x in a {
        bd[x] = Some(1.0);
    }
    for &y in b {
        bd[y] = Some(0.0);
    }
    let rhs = vec![0.0; chain.len()];
    let s = solve_dirichlet(chain, &bd, &rhs, HARMONIC_TOL)?;
    let capacity = chain.dirichlet_form(&s.values);
    Ok(EquilibriumPotential { h: s.values, capacity, residual: s.residual, method: s.method })
}

pub fn capacity(chain: &FiniteChain, a: &[usize], b: &[usize]) -> Result<f64> {
    Ok(equilibrium_potential(chain, a, b)?.capacity)
}

/// `E_x[H_B]` for every `x`, solving `L m = -1` off `B`.
pub fn mean_hitting_time(chain: &FiniteChain, b: &[usize]) -> Result<Solution> {
    if b.is_empty() {
        return Err(CwpError::InvalidParameter("target set is empty".into()));
    }
    let mut bd = vec![None; chain.len()];
    for &y in b {
        bd[y] = Some(0.0);
    }
    let rhs = chain.stationary.clone();
    solve_dirichlet(chain, &bd, &rhs, HARMONIC_TOL)
}

/// `E_x[H_B] = sum_y pi(y) h_{x,B}(y) / cap(x, B)`.
pub fn magic_formula_hitting(chain: &FiniteChain, x: usize, b: &[usize]) -> Result<f64> {
    let eq = equilibrium_potential(chain, &[x], b)?;
    let mass: f64 = eq.h.iter().zip(&chain.stationary).map(|(h, p)| h * p).sum();
    Ok(mass / eq.capacity)
}

/// Mean hitting time of `B` from the normalised equilibrium measure on `A`:
/// `E_{nu_{A,B}}[H_B] = sum_y pi(y) h_{A,B}(y) / cap(A, B)`.
pub fn magic_formula_from_set(chain: &FiniteChain, a: &[usize], b: &[usize]) -> Result<f64> {
    let eq = equilibrium_potential(chain, a, b)?;
    let mass: f64 = eq.h.iter().zip(&chain.stationary).map(|(h, p)| h * p).sum();
    Ok(mass / eq.capacity)
}

/// Equilibrium measure `nu_{A,B}(x) ∝ pi(x) P_x[H_B < H_A^+]` on `A`.
pub fn equilibrium_measure(chain: &FiniteChain, a: &[usize], b: &[usize]) -> Result<Vec<(usize, f64)>> {
    let eq = equilibrium_potential(chain, a, b)?;
    let mut out: Vec<(usize, f64)> = a
        .iter()
        .map(|&x| {
            let esc: f64 = chain.neighbors(x).map(|(y, r)| chain.stationary[x] * r * (1.0 - eq.h[y])).sum();
            (x, esc)
        })
        .collect();
    let z: f64 = out.iter().map(|p| p.1).sum();
    for p in out.iter_mut() {
        p.1 /= z;
    }
    Ok(out)
}

/// Dirichlet-principle upper bound `D(f)` for a test function with `f = 1` on
/// `A` and `f = 0` on `B`.
pub fn dirichlet_upper(chain: &FiniteChain, f: &[f64], a: &[usize], b: &[usize]) -> Result<f64> {
    if a.iter().any(|&x| f[x] != 1.0) || b.iter().any(|&y| f[y] != 0.0) {
        return Err(CwpError::InvalidParameter("test function violates the boundary data".into()));
    }
    Ok(chain.dirichlet_form(f))
}

/// Thomson-principle lower bound from the unit flow along a path:
/// `[sum_i 1/(pi(x_i) r(x_i, x_{i+1}))]^{-1}`.
pub fn thomson_lower(chain: &FiniteChain, path: &[usize]) -> Result<f64> {
    if path.len() < 2 {
        return Err(CwpError::InvalidParameter("path needs at least two states".into()));
    }
    let mut res = 0.0;
    for w in path.windows(2) {
        let c = chain.conductance(w[0], w[1]);
        if c <= 0.0 {
            return Err(CwpError::InvalidParameter(format!("{} -> {} is not an edge", w[0], w[1])));
        }
        res += 1.0 / c;
    }
    Ok(1.0 / res)
}

/// Renewal inequality check `h_{A,B}(x) <= cap(x, A) / cap(x, B)` at `x` not in `A ∪ B`.
/// Returns `(lhs, rhs)`.
pub fn renewal_bound(chain: &FiniteChain, h_ab: &[f64], x: usize, a: &[usize], b: &[usize]) -> Result<(f64, f64)> {
    let ca = capacity(chain, &[x], a)?;
    let cb = capacity(chain, &[x], b)?;
    Ok((h_ab[x], ca / cb))
}

/// `P_x[H_B > t]` for several `t`, by the spectrum of the chain killed on `B`.
pub fn survival_probability(chain: &FiniteChain, x: usize, b: &[usize], times: &[f64]) -> Result<Vec<f64>> {
    let n = chain.len();
    let mut inb = vec![false; n];
    for &y in b {
        inb[y] = true;
    }
    if inb[x] {
        return Ok(vec![0.0; times.len()]);
    }
    let keep: Vec<usize> = (0..n).filter(|&y| !inb[y]).collect();
    if keep.len() > DENSE_FALLBACK_LIMIT {
        return Err(CwpError::Capacity(format!("killed spectrum on {} states", keep.len())));
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &y) in keep.iter().enumerate() {
        pos[y] = i;
    }
    let m = keep.len();
    let lw = &chain.log_weights;
    let mut s = DMatrix::<f64>::zeros(m, m);
    for (i, &y) in keep.iter().enumerate() {
        s[(i, i)] = -chain.exit_rate(y);
        for (z, r) in chain.neighbors(y) {
            if pos[z] != usize::MAX {
                let v = r * (0.5 * (lw[y] - lw[z])).exp();
                s[(i, pos[z])] += 0.5 * v;
                s[(pos[z], i)] += 0.5 * v;
            }
        }
    }
    let eig = s.symmetric_eigen();
    let ix = pos[x];
    // sum_y sqrt(pi(y)/pi(x)) V_{y,i}
    let w: Vec<f64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0.5 * (lw[keep[j]] - lw[x])).exp() * eig.eigenvectors[(j, i)])
                .sum::<f64>()
                * eig.eigenvectors[(ix, i)]
        })
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            (0..m)
                .map(|i| w[i] * (eig.eigenvalues[i] * t).exp())
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect())
}

/// Test function for [`dirichlet_upper`]: `d_A / (d_A + d_B)` interpolation of
/// graph distances, equal to 1 on `a` and 0 on `b`.
pub fn distance_interpolation(chain: &FiniteChain, a: &[usize], b: &[usize]) -> Vec<f64> {
    let bfs = |src: &[usize]| {
        let mut d = vec![usize::MAX; chain.len()];
        let mut queue = std::collections::VecDeque::new();
        for &s in src {
            d[s] = 0;
            queue.push_back(s);
        }
        while let Some(x) = queue.pop_front() {
            for (y, _) in chain.neighbors(x) {
                if d[y] == usize::MAX {
                    d[y] = d[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        d
    };
    let da = bfs(a);
    let db = bfs(b);
    (0..chain.len())
        .map(|x| match (da[x], db[x]) {
            (0, _) => 1.0,
            (_, 0) => 0.0,
            (p, q) => q as f64 / (p + q) as f64,
        })
        .collect()
}

/// Escape-probability estimate `P_x[H_B <= t] <= sqrt(e^2 t cap(x, B) / pi(x))`.
pub fn escape_probability_bound(chain: &FiniteChain, x: usize, b: &[usize], t: f64) -> Result<f64> {
    let cap = capacity(chain, &[x], b)?;
    Ok((std::f64::consts::E.powi(2) * t * cap / chain.stationary[x]).sqrt())
}

/// Crude upper bound on the capacity between a state and a neighbour:
/// `cap(y, x) <= q (q - 1) e^beta pi(x)`.
pub fn rough_capacity_bound(q: usize, beta: f64, pi_x: f64) -> f64 {
    (q * (q - 1)) as f64 * beta.exp() * pi_x
}

/// Constant of the rough comparison
/// `pi(z) <= c1 N^q e^{beta N (F(w) - F(z))} pi(w)`.
pub fn rough_stationary_constant(q: usize) -> f64 {
    2f64.powi(q as i32 + 1) * (2.0 * std::f64::consts::PI).powf((q as f64 - 1.0) / 2.0)
}
