//! Metastable sets on the grid: wells, valleys (wells cut below the saddle
//! level by a margin `eta`), attractors (small sublevel sets around each
//! minimum) and discrete communication heights.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::ProportionsChain;
use crate::error::{CwpError, Result};
use crate::landscape::LandscapeReport;

/// A labelled set of grid indices (`0` = around `e`, `k >= 1` = around `u_k`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelledSet {
    pub label: usize,
    pub states: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetastableSets {
    pub eta: f64,
    pub epsilon: f64,
    pub wells: Vec<LabelledSet>,
    pub valleys: Vec<LabelledSet>,
    pub attractors: Vec<LabelledSet>,
}

impl MetastableSets {
    pub fn valley(&self, label: usize) -> Option<&[usize]> {
        self.valleys.iter().find(|v| v.label == label).map(|v| v.states.as_slice())
    }

    pub fn attractor(&self, label: usize) -> Option<&[usize]> {
        self.attractors.iter().find(|v| v.label == label).map(|v| v.states.as_slice())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.valleys.iter().map(|v| v.label).collect()
    }

    /// Union of the valleys with the given labels.
    pub fn union(&self, labels: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = labels.iter().filter_map(|&l| self.valley(l)).flatten().cloned().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Map state index -> valley label.
    pub fn valley_map(&self, n: usize) -> Vec<Option<usize>> {
        let mut m = vec![None; n];
        for v in &self.valleys {
            for &s in &v.states {
                m[s] = Some(v.label);
            }
        }
        m
    }
}

/// Connected component (grid adjacency) of `{F < level}` containing `seed`.
pub fn sublevel_component(pc: &ProportionsChain, f: &[f64], level: f64, seed: usize) -> Vec<usize> {
    if f[seed] >= level {
        return Vec::new();
    }
    let mut seen = vec![false; pc.len()];
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    let mut out = Vec::new();
    while let Some(x) = queue.pop_front() {
        out.push(x);
        for (_, _, y) in pc.space.moves(x) {
            if !seen[y] && f[y] < level {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Labels carrying a valley: the index set, plus `0` whenever `e` is a local minimum.
pub fn valley_labels(report: &LandscapeReport) -> Vec<usize> {
    let mut l = report.index_set.clone();
    if report.e_is_well() && !l.contains(&0) {
        l.insert(0, 0);
    }
    l
}

pub fn metastable_sets(
    pc: &ProportionsChain,
    report: &LandscapeReport,
    eta: Option<f64>,
    epsilon: Option<f64>,
) -> Result<MetastableSets> {
    let eta = eta.unwrap_or(report.eta);
    let epsilon = epsilon.unwrap_or(0.5 * eta);
    let fu = report.f(&report.u1);
    if !(eta > 0.0 && eta < report.depth) {
        return Err(CwpError::InvalidMargin(format!("eta = {eta} must lie in (0, D = {})", report.depth)));
    }
    if !(epsilon > 0.0 && epsilon < eta && fu + 5.0 * epsilon < report.saddle_height - eta) {
        return Err(CwpError::InvalidMargin(format!(
            "epsilon = {epsilon} must satisfy 0 < epsilon < eta and F(u_1) + 5 epsilon < H - eta"
        )));
    }
    let f = pc.free_energies();
    let mut wells = Vec::new();
    let mut valleys = Vec::new();
    let mut attractors = Vec::new();
    let labels = valley_labels(report);
    for &k in &labels {
        let m = report.minimum(k);
        let seed = pc.space.nearest(&m);
        let level = report.well_level(k);
        wells.push(LabelledSet { label: k, states: sublevel_component(pc, &f, level, seed) });
        let v = sublevel_component(pc, &f, level - eta, seed);
        if v.is_empty() {
            return Err(CwpError::EmptyValley(format!(
                "valley {k} is empty at N = {} (nearest grid point above the cut level)",
                pc.params.n
            )));
        }
        valleys.push(LabelledSet { label: k, states: v });
        let a = sublevel_component(pc, &f, report.f(&m) + epsilon, seed);
        attractors.push(LabelledSet { label: k, states: a });
    }
    let mut owner = vec![usize::MAX; pc.len()];
    for v in &valleys {
        for &s in &v.states {
            if owner[s] != usize::MAX {
                return Err(CwpError::EmptyValley(format!(
                    "valleys {} and {} merge at N = {}: the grid is too coarse for this eta",
                    owner[s], v.label, pc.params.n
                )));
            }
            owner[s] = v.label;
        }
    }
    Ok(MetastableSets { eta, epsilon, wells, valleys, attractors })
}

/// Stationary mass of each valley `F^k` at margin `eta`. Unlike
/// [`metastable_sets`], empty or overlapping valleys are allowed (an empty
/// valley has mass zero).
pub fn valley_masses(pc: &ProportionsChain, report: &LandscapeReport, eta: f64) -> Vec<(usize, f64)> {
    let f = pc.free_energies();
    valley_labels(report)
        .into_iter()
        .map(|k| {
            let seed = pc.space.nearest(&report.minimum(k));
            let v = sublevel_component(pc, &f, report.well_level(k) - eta, seed);
            (k, v.iter().map(|&s| pc.chain.stationary[s]).sum())
        })
        .collect()
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then(o.1.cmp(&self.1))
    }
}

/// Discrete communication height between two disjoint sets: the minimum over
/// grid paths from `a` to `b` of the maximal free energy along the path.
/// Returns the height and one optimal path.
pub fn discrete_comm_height(pc: &ProportionsChain, f: &[f64], a: &[usize], b: &[usize]) -> Result<(f64, Vec<usize>)> {
    let n = pc.len();
    let mut is_b = vec![false; n];
    for &x in b {
        is_b[x] = true;
    }
    let mut best = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for &x in a {
        best[x] = f[x];
        heap.push(Item(f[x], x));
    }
    while let Some(Item(h, x)) = heap.pop() {
        if h > best[x] {
            continue;
        }
        if is_b[x] {
            let mut path = vec![x];
            let mut c = x;
            while prev[c] != usize::MAX {
                c = prev[c];
                path.push(c);
            }
            path.reverse();
            return Ok((h, path));
        }
        for (_, _, y) in pc.space.moves(x) {
            let hy = h.max(f[y]);
            if hy < best[y] {
                best[y] = hy;
                prev[y] = x;
                heap.push(Item(hy, y));
            }
        }
    }
    Err(CwpError::InvalidParameter("target set unreachable".into()))
}
