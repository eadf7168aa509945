//! Seeded continuous-time Monte Carlo simulation of Glauber dynamics, either
//! on full spin configurations or directly on the proportions chain.
//!
//! Replica `r` of a run with seed `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! switched to stream `r`, so results do not depend on the thread count or on
//! the order in which replicas are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CwpError, Result};
use crate::exec::Exec;
use crate::model::{spin_flip_rate, GridPoint, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMode {
    /// Track every spin; the proportion is read off the configuration.
    FullConfig,
    /// Simulate the projected chain on spin counts.
    Proportions,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimSpec {
    pub params: ModelParams,
    pub mode: SimMode,
    pub replicas: usize,
    pub seed: u64,
    /// Simulation horizon; hitting times beyond it are censored.
    pub t_max: f64,
    pub record: Record,
    pub exec: Exec,
}

/// What [`simulate`] keeps from each replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Record {
    /// Every jump time and state.
    #[default]
    Trajectory,
    /// Only the final state and the number of jumps.
    HittingOnly,
    /// Time spent in each visited state up to `t_max`.
    Occupation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ReplicaRecord {
    Trajectory(Trajectory),
    Final { state: GridPoint, jumps: u64 },
    Occupation(Vec<(GridPoint, f64)>),
}

impl SimSpec {
    fn validate(&self, start: &[u32]) -> Result<()> {
        self.params.validate()?;
        if start.len() != self.params.q || start.iter().map(|&c| c as usize).sum::<usize>() != self.params.n {
            return Err(CwpError::InvalidParameter(format!(
                "start {start:?} is not a grid point for q={}, N={}",
                self.params.q, self.params.n
            )));
        }
        if self.replicas == 0 || !(self.t_max > 0.0) {
            return Err(CwpError::InvalidParameter("need replicas >= 1 and t_max > 0".into()));
        }
        Ok(())
    }
}

/// Random stream of one replica.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Event-driven simulator; rates depend on the configuration only through counts.
pub struct Engine {
    params: ModelParams,
    counts: GridPoint,
    /// Sites grouped by spin value (full-configuration mode only).
    sites: Option<Vec<Vec<u32>>>,
    pub time: f64,
    rates: Vec<f64>,
}

impl Engine {
    pub fn new(params: ModelParams, mode: SimMode, start: &[u32]) -> Self {
        let sites = (mode == SimMode::FullConfig).then(|| {
            let mut next = 0u32;
            start
                .iter()
                .map(|&c| {
                    let v: Vec<u32> = (next..next + c).collect();
                    next += c;
                    v
                })
                .collect()
        });
        Engine { params, counts: start.to_vec(), sites, time: 0.0, rates: vec![0.0; params.q * params.q] }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Full configuration (spin of each site), if tracked.
    pub fn configuration(&self) -> Option<Vec<usize>> {
        let sites = self.sites.as_ref()?;
        let mut sigma = vec![0usize; self.params.n];
        for (spin, list) in sites.iter().enumerate() {
            for &s in list {
                sigma[s as usize] = spin;
            }
        }
        Some(sigma)
    }

    /// Perform one jump; returns the holding time that preceded it.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let q = self.params.q;
        let nf = self.params.n as f64;
        let mut total = 0.0;
        for j in 0..q {
            for k in 0..q {
                let r = if j == k || self.counts[j] == 0 {
                    0.0
                } else {
                    self.counts[j] as f64 / nf * spin_flip_rate(&self.counts, j, k, self.params.beta, self.params.kind)
                };
                self.rates[j * q + k] = r;
                total += r;
            }
        }
        let u: f64 = rng.random();
        let hold = -(1.0 - u).ln() / total;
        self.time += hold;
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = None;
        let mut last_positive = (0, 0);
        'scan: for j in 0..q {
            for k in 0..q {
                let r = self.rates[j * q + k];
                if r <= 0.0 {
                    continue;
                }
                last_positive = (j, k);
                if pick < r {
                    chosen = Some((j, k));
                    break 'scan;
                }
                pick -= r;
            }
        }
        // Rounding can leave `pick` marginally above the last rate.
        let (j, k) = chosen.unwrap_or(last_positive);
        if let Some(sites) = self.sites.as_mut() {
            let idx = rng.random_range(0..sites[j].len());
            let v = sites[j].swap_remove(idx);
            sites[k].push(v);
        }
        self.counts[j] -= 1;
        self.counts[k] += 1;
        hold
    }
}

/// Piecewise-constant trajectory: `states[i]` holds on `[times[i], times[i+1])`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridPoint>,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> &GridPoint {
        let i = self.times.partition_point(|&s| s <= t);
        &self.states[i.saturating_sub(1)]
    }
}

/// Run every replica up to `t_max`, keeping what `spec.record` asks for.
pub fn simulate(spec: &SimSpec, start: &[u32]) -> Result<Vec<ReplicaRecord>> {
    spec.validate(start)?;
    if spec.record == Record::Trajectory {
        return Ok(simulate_trajectories(spec, start)?.into_iter().map(ReplicaRecord::Trajectory).collect());
    }
    Ok(spec.exec.map_range(spec.replicas, |r| {
        let mut rng = replica_rng(spec.seed, r);
        let mut e = Engine::new(spec.params, spec.mode, start);
        let mut occ: std::collections::BTreeMap<GridPoint, f64> = Default::default();
        let mut cur = start.to_vec();
        let mut last = 0.0;
        let mut jumps = 0u64;
        loop {
            e.step(&mut rng);
            let t = e.time.min(spec.t_max);
            if spec.record == Record::Occupation {
                *occ.entry(cur.clone()).or_insert(0.0) += t - last;
            }
            last = t;
            if e.time >= spec.t_max {
                break;
            }
            jumps += 1;
            cur = e.counts.clone();
        }
        match spec.record {
            Record::Occupation => ReplicaRecord::Occupation(occ.into_iter().collect()),
            _ => ReplicaRecord::Final { state: cur, jumps },
        }
    }))
}

pub fn simulate_trajectories(spec: &SimSpec, start: &[u32]) -> Result<Vec<Trajectory>> {
    spec.validate(start)?;
    Ok(spec.exec.map_range(spec.replicas, |r| {
        let mut rng = replica_rng(spec.seed, r);
        let mut e = Engine::new(spec.params, spec.mode, start);
        let mut tr = Trajectory { times: vec![0.0], states: vec![start.to_vec()] };
        loop {
            e.step(&mut rng);
            if e.time > spec.t_max {
                break;
            }
            tr.times.push(e.time);
            tr.states.push(e.counts.clone());
        }
        tr
    }))
}

/// State of each replica at each of the (sorted) observation times.
pub fn simulate_states_at(spec: &SimSpec, start: &[u32], times: &[f64]) -> Result<Vec<Vec<GridPoint>>> {
    spec.validate(start)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CwpError::InvalidParameter("observation times must be sorted".into()));
    }
    Ok(spec.exec.map_range(spec.replicas, |r| {
        let mut rng = replica_rng(spec.seed, r);
        let mut e = Engine::new(spec.params, spec.mode, start);
        let mut out = Vec::with_capacity(times.len());
        let mut cur = start.to_vec();
        let mut ti = 0;
        while ti < times.len() {
            e.step(&mut rng);
            while ti < times.len() && e.time > times[ti] {
                out.push(cur.clone());
                ti += 1;
            }
            cur = e.counts.clone();
        }
        out
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: Vec<f64>,
    /// Replicas that did not hit before `t_max` (excluded from the mean).
    pub censored: usize,
}

/// Monte Carlo estimate of `E[H_target]` from `start`.
pub fn estimate_hitting<T>(spec: &SimSpec, start: &[u32], target: T) -> Result<HittingEstimate>
where
    T: Fn(&[u32]) -> bool + Sync + Send,
{
    spec.validate(start)?;
    let res: Vec<Option<f64>> = spec.exec.map_range(spec.replicas, |r| {
        if target(start) {
            return Some(0.0);
        }
        let mut rng = replica_rng(spec.seed, r);
        let mut e = Engine::new(spec.params, spec.mode, start);
        loop {
            e.step(&mut rng);
            if e.time > spec.t_max {
                return None;
            }
            if target(e.counts()) {
                return Some(e.time);
            }
        }
    });
    let samples: Vec<f64> = res.iter().flatten().cloned().collect();
    let censored = res.len() - samples.len();
    let (mean, std_error) = mean_and_se(&samples);
    Ok(HittingEstimate { mean, std_error, samples, censored })
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Statistics of the order process (visited-valley sequence).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderStats {
    pub labels: Vec<usize>,
    /// `transitions[a][b]`: number of moves from valley `labels[a]` to `labels[b]`.
    pub transitions: Vec<Vec<u64>>,
    /// Time attributed to each visited valley (including excursions outside valleys).
    pub time_in: Vec<f64>,
    /// Empirical jump rates in units of `1/theta_N`.
    pub rates_theta: Vec<Vec<f64>>,
    /// Fraction of time spent outside every valley.
    pub outside_fraction: f64,
    pub total_time: f64,
}

/// Run replicas until `t_max` and collect order-process statistics.
/// `classify` maps a count vector to the position of its valley in `labels`.
pub fn order_process_stats<C>(spec: &SimSpec, start: &[u32], labels: &[usize], classify: C, theta: f64) -> Result<OrderStats>
where
    C: Fn(&[u32]) -> Option<usize> + Sync + Send,
{
    spec.validate(start)?;
    let m = labels.len();
    let per: Vec<(Vec<Vec<u64>>, Vec<f64>, f64)> = spec.exec.map_range(spec.replicas, |r| {
        let mut rng = replica_rng(spec.seed, r);
        let mut e = Engine::new(spec.params, spec.mode, start);
        let mut trans = vec![vec![0u64; m]; m];
        let mut time_in = vec![0.0; m];
        let mut outside = 0.0;
        let mut visited = classify(start);
        let mut here = visited;
        let mut last = 0.0;
        while last < spec.t_max {
            e.step(&mut rng);
            let t = e.time.min(spec.t_max);
            let dt = t - last;
            if here.is_none() {
                outside += dt;
            }
            if let Some(v) = visited {
                time_in[v] += dt;
            }
            last = t;
            if e.time >= spec.t_max {
                break;
            }
            here = classify(e.counts());
            if let Some(h) = here {
                if let Some(v) = visited {
                    if v != h {
                        trans[v][h] += 1;
                    }
                }
                visited = Some(h);
            }
        }
        (trans, time_in, outside)
    });
    let mut transitions = vec![vec![0u64; m]; m];
    let mut time_in = vec![0.0; m];
    let mut outside = 0.0;
    for (t, ti, o) in per {
        for a in 0..m {
            time_in[a] += ti[a];
            for b in 0..m {
                transitions[a][b] += t[a][b];
            }
        }
        outside += o;
    }
    let total_time = spec.t_max * spec.replicas as f64;
    let rates_theta = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| if time_in[a] > 0.0 { transitions[a][b] as f64 / time_in[a] * theta } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(OrderStats {
        labels: labels.to_vec(),
        transitions,
        time_in,
        rates_theta,
        outside_fraction: outside / total_time,
        total_time,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS test at level `alpha`:
/// `sqrt(-ln(alpha/2)/2) sqrt((n+m)/(n m))`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
