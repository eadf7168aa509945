//! Descending paths on the grid: from any start, a path into the union of the
//! valleys along which the free energy never rises by more than a small
//! tolerance above the starting level.

use std::collections::{HashMap, VecDeque};

use super::ProportionsChain;
use crate::error::{CwpError, Result};

/// Radius (in single moves) of the local search used to escape discrete traps.
const ESCAPE_RADIUS: usize = 3;

/// Build a descending path from `start` into `targets`.
///
/// Steps greedily to the lowest strictly lower neighbour; when the walk is
/// trapped (a grid local minimum outside the targets, typically next to a
/// critical point) it searches breadth-first within `ESCAPE_RADIUS` moves for
/// a strictly lower state, only passing through states whose free energy is at
/// most `F(current) + tol`.
pub fn descending_path(pc: &ProportionsChain, f: &[f64], start: usize, targets: &[usize], tol: f64) -> Result<Vec<usize>> {
    let mut is_target = vec![false; pc.len()];
    for &t in targets {
        is_target[t] = true;
    }
    let mut path = vec![start];
    let mut cur = start;
    let mut guard = 0;
    while !is_target[cur] {
        guard += 1;
        if guard > 10 * pc.len() {
            return Err(CwpError::PathStuck(format!("no progress from state {start}")));
        }
        let next = pc
            .space
            .moves(cur)
            .into_iter()
            .map(|(_, _, y)| y)
            .filter(|&y| f[y] < f[cur])
            .min_by(|&a, &b| f[a].partial_cmp(&f[b]).unwrap());
        if let Some(y) = next {
            path.push(y);
            cur = y;
            continue;
        }
        let escape = local_escape(pc, f, cur, f[cur] + tol, &is_target)
            .ok_or_else(|| CwpError::PathStuck(format!("trapped at state {cur} (from {start})")))?;
        path.extend(escape.into_iter().skip(1));
        cur = *path.last().unwrap();
    }
    Ok(path)
}

fn local_escape(pc: &ProportionsChain, f: &[f64], from: usize, cap: f64, is_target: &[bool]) -> Option<Vec<usize>> {
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut depth: HashMap<usize, usize> = HashMap::from([(from, 0)]);
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        let d = depth[&x];
        if x != from && (f[x] < f[from] || is_target[x]) {
            let mut p = vec![x];
            let mut c = x;
            while let Some(&q) = parent.get(&c) {
                p.push(q);
                c = q;
            }
            p.reverse();
            return Some(p);
        }
        if d == ESCAPE_RADIUS {
            continue;
        }
        for (_, _, y) in pc.space.moves(x) {
            if !depth.contains_key(&y) && f[y] <= cap {
                depth.insert(y, d + 1);
                parent.insert(y, x);
                queue.push_back(y);
            }
        }
    }
    None
}

/// Path from set `a` to set `b` through the grid point `via`: the reversed
/// descending path from `via` into `a` followed by the one into `b`.
pub fn path_through(pc: &ProportionsChain, f: &[f64], via: usize, a: &[usize], b: &[usize], tol: f64) -> Result<Vec<usize>> {
    // Leave `via` towards each side first so that the two halves split.
    let mut candidates: Vec<usize> = pc.space.moves(via).into_iter().map(|(_, _, y)| y).collect();
    candidates.push(via);
    let in_a = |p: &Vec<usize>| a.contains(p.last().unwrap());
    let in_b = |p: &Vec<usize>| b.contains(p.last().unwrap());
    let mut to_a = None;
    let mut to_b = None;
    let all: Vec<usize> = a.iter().chain(b.iter()).cloned().collect();
    for &c in &candidates {
        if let Ok(p) = descending_path(pc, f, c, &all, tol) {
            let mut full = if c == via { vec![] } else { vec![via] };
            full.extend(p);
            if to_a.is_none() && in_a(&full) {
                to_a = Some(full);
            } else if to_b.is_none() && in_b(&full) {
                to_b = Some(full);
            }
        }
    }
    match (to_a, to_b) {
        (Some(mut pa), Some(pb)) => {
            pa.reverse();
            pa.extend(pb.into_iter().skip(1));
            Ok(pa)
        }
        _ => Err(CwpError::PathStuck(format!("state {via} does not split between the two sets"))),
    }
}
