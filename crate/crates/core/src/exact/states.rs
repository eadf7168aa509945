//! The discrete simplex `{n in Z_{>=0}^q : sum n_k = N}` with constant-time ranking.
//!
//! States are listed in decreasing lexicographic order of the count vector,
//! e.g. `(2,0), (1,1), (0,2)` for `N = 2`, `q = 2`.

use crate::error::{CwpError, Result};
use crate::model::GridPoint;

#[derive(Clone, Debug)]
pub struct StateSpace {
    pub n: usize,
    pub q: usize,
    states: Vec<GridPoint>,
    /// `binom[m][p] = C(m, p)` for `m <= N + q`, `p <= q`.
    binom: Vec<Vec<usize>>,
}

fn binomial_table(mmax: usize, pmax: usize) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; pmax + 1]; mmax + 1];
    for m in 0..=mmax {
        t[m][0] = 1;
        for p in 1..=pmax.min(m) {
            t[m][p] = t[m - 1][p - 1].saturating_add(if p <= m - 1 { t[m - 1][p] } else { 0 });
        }
    }
    t
}

/// Number of grid points, `C(N + q - 1, q - 1)`, saturating on overflow.
pub fn grid_size(n: usize, q: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 1..q as u128 {
        acc = acc * (n as u128 + i) / i;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

impl StateSpace {
    pub fn new(n: usize, q: usize, max_states: usize) -> Result<Self> {
        if q < 2 || n < 1 {
            return Err(CwpError::InvalidParameter(format!("need q >= 2 and N >= 1 (q={q}, N={n})")));
        }
        let size = grid_size(n, q);
        if size > max_states {
            return Err(CwpError::Capacity(format!(
                "state space of size {size} exceeds the limit {max_states} (q={q}, N={n})"
            )));
        }
        let mut states = Vec::with_capacity(size);
        let mut cur = vec![0u32; q];
        fn rec(i: usize, rem: u32, cur: &mut Vec<u32>, out: &mut Vec<GridPoint>) {
            let q = cur.len();
            if i == q - 1 {
                cur[i] = rem;
                out.push(cur.clone());
                return;
            }
            for a in (0..=rem).rev() {
                cur[i] = a;
                rec(i + 1, rem - a, cur, out);
            }
        }
        rec(0, n as u32, &mut cur, &mut states);
        Ok(StateSpace { n, q, states, binom: binomial_table(n + q, q) })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &GridPoint {
        &self.states[i]
    }

    pub fn states(&self) -> &[GridPoint] {
        &self.states
    }

    /// Rank of a count vector in the enumeration order.
    pub fn index(&self, c: &[u32]) -> Option<usize> {
        if c.len() != self.q || c.iter().map(|&v| v as usize).sum::<usize>() != self.n {
            return None;
        }
        let mut rem = self.n;
        let mut idx = 0;
        for (i, &ci) in c.iter().enumerate().take(self.q - 1) {
            let ci = ci as usize;
            let p = self.q - i - 1;
            if rem > ci {
                idx += self.binom[rem - ci - 1 + p][p];
            }
            rem -= ci;
        }
        Some(idx)
    }

    pub fn proportion(&self, i: usize) -> Vec<f64> {
        self.states[i].iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    /// Grid point closest (in max norm) to a proportion vector.
    pub fn nearest(&self, x: &[f64]) -> usize {
        // Rounding then repairing the total gives a candidate; a local sweep
        // over all states is cheap enough to make the answer exact.
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, s) in self.states.iter().enumerate() {
            let d = s
                .iter()
                .zip(x)
                .map(|(&c, &v)| (c as f64 / self.n as f64 - v).abs())
                .fold(0.0, f64::max);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    /// Neighbour reached by moving one spin from `k` to `l`.
    pub fn shift(&self, i: usize, k: usize, l: usize) -> Option<usize> {
        let s = &self.states[i];
        if k == l || s[k] == 0 {
            return None;
        }
        let mut t = s.clone();
        t[k] -= 1;
        t[l] += 1;
        self.index(&t)
    }

    /// All neighbours `(k, l, index)` of state `i`.
    pub fn moves(&self, i: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.q * (self.q - 1));
        for k in 0..self.q {
            for l in 0..self.q {
                if let Some(j) = self.shift(i, k, l) {
                    out.push((k, l, j));
                }
            }
        }
        out
    }
}
