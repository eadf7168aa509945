//! Exact mixing times of the proportions chain compared with the limit chain
//! in the metastable time-scale.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact::spectral::{mixing_time_exact, Spectrum, StartSet, DEFAULT_MAX_DENSE, FULL_SWEEP_LIMIT};
use crate::exact::{build_exact_chain, ChainOptions, ProportionsChain};
use crate::exec::Exec;
use crate::landscape::{landscape_report, LandscapeReport};
use crate::limit_chain::{build_limit_chain, metastable_prefactors, metastable_timescale, LimitChain};
use crate::model::{ModelParams, RateKind};

/// One row of a mixing-time ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingRecord {
    pub q: usize,
    pub beta: f64,
    pub n: usize,
    pub delta: f64,
    pub kind: RateKind,
    pub states: usize,
    pub t_mix: f64,
    pub theta: f64,
    /// `t_mix / theta`.
    pub ratio: f64,
    /// Limit-chain mixing time `T(delta)`.
    pub limit: f64,
    /// `|ratio / limit - 1|` (zero when both vanish).
    pub rel_err: f64,
    pub worst_start: Vec<u32>,
    pub starts_examined: usize,
}

/// Starting states used when the state space is too large for a full sweep:
/// grid points nearest every critical point, plus the vertices.
pub fn candidate_starts(pc: &ProportionsChain, report: &LandscapeReport) -> Vec<usize> {
    let mut v: Vec<usize> = report.critical_points.iter().map(|c| pc.space.nearest(&c.x)).collect();
    for k in 0..pc.params.q {
        let mut c = vec![0u32; pc.params.q];
        c[k] = pc.params.n as u32;
        v.extend(pc.space.index(&c));
    }
    v.sort_unstable();
    v.dedup();
    v
}

pub struct MixingContext {
    pub report: LandscapeReport,
    pub limit: LimitChain,
}

impl MixingContext {
    pub fn new(q: usize, beta: f64, kind: RateKind) -> Result<Self> {
        let report = landscape_report(q, beta)?;
        let pf = metastable_prefactors(&report, kind)?;
        let limit = build_limit_chain(&report, &pf)?;
        Ok(MixingContext { report, limit })
    }
}

pub fn mixing_record(ctx: &MixingContext, n: usize, delta: f64, kind: RateKind, exec: Exec) -> Result<MixingRecord> {
    let r = &ctx.report;
    let params = ModelParams::new(r.q, r.beta, n, kind)?;
    let pc = build_exact_chain(params, ChainOptions { exec, ..Default::default() })?;
    let spec = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE)?;
    let starts = if pc.len() <= FULL_SWEEP_LIMIT {
        StartSet::All
    } else {
        StartSet::Explicit(candidate_starts(&pc, r))
    };
    let m = mixing_time_exact(&spec, delta, &starts, exec)?;
    let theta = metastable_timescale(n, r.beta, r.depth);
    let limit = ctx.limit.mixing_time(delta)?;
    let ratio = m.t_mix / theta;
    Ok(MixingRecord {
        q: r.q,
        beta: r.beta,
        n,
        delta,
        kind,
        states: pc.len(),
        t_mix: m.t_mix,
        theta,
        ratio,
        limit,
        // Both vanish when delta exceeds the initial distance from every start.
        rel_err: if ratio == limit { 0.0 } else { (ratio / limit - 1.0).abs() },
        worst_start: pc.space.state(m.worst_start).clone(),
        starts_examined: m.starts_examined,
    })
}

/// Mixing records over an `N`-ladder; rungs are computed in parallel under `exec`.
pub fn mixing_ladder(q: usize, beta: f64, kind: RateKind, delta: f64, ns: &[usize], exec: Exec) -> Result<Vec<MixingRecord>> {
    let ctx = MixingContext::new(q, beta, kind)?;
    exec.map(ns, |&n| mixing_record(&ctx, n, delta, kind, Exec::Sequential))
        .into_iter()
        .collect()
}
