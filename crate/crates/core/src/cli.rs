//! Command-line interface of the `cwp` binary.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`;
//! `cwp rerun <manifest>` repeats the recorded invocation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{CwpError, Result};
use crate::exact::metastable::{discrete_comm_height, metastable_sets, MetastableSets};
use crate::exact::spectral::{Spectrum, DEFAULT_MAX_DENSE, FULL_SWEEP_LIMIT};
use crate::exact::{build_exact_chain, ChainOptions, ProportionsChain};
use crate::exec::Exec;
use crate::io::{fmt17, write_critical_points, write_curve, write_edges, write_json, write_ladder, write_states, CsvTable, RunManifest};
use crate::landscape::{landscape_report, resolve_beta, LandscapeReport};
use crate::limit_chain::{build_limit_chain, metastable_prefactors, metastable_timescale};
use crate::mixing::{candidate_starts, mixing_ladder};
use crate::model::{ModelParams, RateKind};
use crate::potential::{
    dirichlet_upper, distance_interpolation, equilibrium_potential, magic_formula_from_set, mean_hitting_time,
    thomson_lower,
};
use crate::sim::{estimate_hitting, order_process_stats, Record, SimMode, SimSpec};
use crate::verify::{run_criterion, Profile, Verdict, VerifyOptions};

pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Parser, Debug)]
#[command(name = "cwp", version, about = "Curie-Weiss-Potts metastability and mixing toolkit")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "cwp-out")]
    pub out: PathBuf,
    /// Run sweeps on a single thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub q: usize,
    /// Inverse temperature, or `auto-b2` / `auto-b3`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: String,
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "sqrt")]
    pub rate_kind: RateKind,
    /// Refuse state spaces larger than this.
    #[arg(long, default_value_t = crate::exact::DEFAULT_MAX_STATES)]
    pub max_states: usize,
}

#[derive(Args, Debug, Clone)]
pub struct MarginArgs {
    /// Valley margin eta (default: the landscape rule).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Attractor margin epsilon (default eta/2).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Full,
    Proportions,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Critical temperatures, critical points, regime and depths.
    Landscape(ModelArgs),
    /// Exact mixing time against the limit chain, over an N-ladder.
    Mixing {
        #[command(flatten)]
        model: ModelArgs,
        /// System sizes (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value = "sqrt")]
        rate_kind: RateKind,
    },
    /// Export the exact proportions chain (states, edges, spectrum summary).
    Chain(ChainArgs),
    /// Worst-case TV distance curve of the exact chain and of the limit chain.
    Tv {
        #[command(flatten)]
        chain: ChainArgs,
        /// Horizon in units of theta_N.
        #[arg(long, default_value_t = 4.0)]
        t_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Capacities, equilibrium potential, hitting times and variational bounds between valleys.
    Potential {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        margins: MarginArgs,
        /// Valley labels of A (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        from: Vec<usize>,
        /// Valley labels of B (default: every other valley).
        #[arg(long, value_delimiter = ',')]
        to: Vec<usize>,
    },
    /// Monte Carlo simulation: hitting times of the valleys and order-process statistics.
    Simulate {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        margins: MarginArgs,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, value_enum, default_value = "proportions")]
        mode: ModeArg,
        /// Starting counts (comma separated); default is the grid point nearest e.
        #[arg(long, value_delimiter = ',')]
        start: Vec<u32>,
        /// Horizon for the order process, in units of theta_N.
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
    },
    /// Run the acceptance checks.
    Verify {
        #[arg(long, default_value = "full")]
        profile: Profile,
        /// Subset of criteria (comma separated); default all.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_rate_perturbation: bool,
    },
    /// Repeat the invocation recorded in a manifest (outputs go to `--out`).
    Rerun { manifest: PathBuf },
}

/// Parse `argv` (without the program name) and run; returns the exit code.
pub fn run_args(argv: &[String]) -> i32 {
    let full: Vec<String> = std::iter::once("cwp".to_string()).chain(argv.iter().cloned()).collect();
    let cli = match Cli::try_parse_from(&full) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn exec_of(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(PathBuf::from(name));
        self.dir.join(name)
    }
}

fn finish(out: Outputs, command: &str, argv: &[String], params: serde_json::Value, seed: Option<u64>) -> Result<()> {
    let m = RunManifest {
        command: command.to_string(),
        argv: argv.to_vec(),
        params,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: out.files.clone(),
    };
    m.write(&out.dir.join("manifest.json"))
}

fn model_params(c: &ChainArgs) -> Result<ModelParams> {
    let beta = resolve_beta(c.model.q, &c.model.beta)?;
    ModelParams::new(c.model.q, beta, c.n, c.rate_kind)
}

fn build_chain(c: &ChainArgs, exec: Exec) -> Result<ProportionsChain> {
    build_exact_chain(model_params(c)?, ChainOptions { max_states: c.max_states, exec })
}

fn chain_params(p: &ModelParams) -> serde_json::Value {
    json!({"q": p.q, "beta": p.beta, "n": p.n, "rate_kind": p.kind.as_str()})
}

fn sets_for(pc: &ProportionsChain, r: &LandscapeReport, m: &MarginArgs) -> Result<MetastableSets> {
    metastable_sets(pc, r, m.eta, m.epsilon)
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<i32> {
    let exec = exec_of(cli);
    let mut out = Outputs::new(&cli.out)?;
    match &cli.command {
        Command::Landscape(m) => {
            let beta = resolve_beta(m.q, &m.beta)?;
            let r = landscape_report(m.q, beta)?;
            write_json(&out.path("landscape.json"), &r)?;
            write_critical_points(&out.path("critical_points.csv"), &r)?;
            println!(
                "q={} beta={} regime={:?} critical points={} D={:.6e} H={:.12}",
                r.q,
                fmt17(r.beta),
                r.regime,
                r.critical_points.len(),
                r.depth,
                r.saddle_height
            );
            finish(out, "landscape", argv, json!({"q": m.q, "beta": beta}), None)?;
        }
        Command::Mixing { model, n, delta, rate_kind } => {
            let beta = resolve_beta(model.q, &model.beta)?;
            let rows = mixing_ladder(model.q, beta, *rate_kind, *delta, n, exec)?;
            write_ladder(&out.path("mixing.csv"), &rows)?;
            for r in &rows {
                println!(
                    "N={:>4} states={:>8} T_mix={:.6e} theta={:.6e} ratio={:.6} limit={:.6} rel_err={:.4}",
                    r.n, r.states, r.t_mix, r.theta, r.ratio, r.limit, r.rel_err
                );
            }
            let params = json!({"q": model.q, "beta": beta, "n": n, "delta": delta, "rate_kind": rate_kind.as_str()});
            finish(out, "mixing", argv, params, None)?;
        }
        Command::Chain(c) => {
            let pc = build_chain(c, exec)?;
            write_states(&out.path("states.csv"), &pc)?;
            write_edges(&out.path("edges.csv"), &pc)?;
            let mut summary = json!({
                "states": pc.len(),
                "edges": pc.chain.num_edges(),
                "detailed_balance_residual": pc.chain.detailed_balance_residual(),
                "max_exit_rate": pc.chain.max_exit_rate(),
            });
            if pc.len() <= DEFAULT_MAX_DENSE {
                let sp = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE)?;
                summary["spectral_gap"] = json!(sp.gap());
                summary["zero_modes"] = json!(sp.zero_modes(1e-10));
            }
            write_json(&out.path("chain.json"), &summary)?;
            println!("{summary}");
            finish(out, "chain", argv, chain_params(&pc.params), None)?;
        }
        Command::Tv { chain, t_max, points } => {
            let pc = build_chain(chain, exec)?;
            let r = landscape_report(pc.params.q, pc.params.beta)?;
            let lc = build_limit_chain(&r, &metastable_prefactors(&r, pc.params.kind)?)?;
            let theta = metastable_timescale(pc.params.n, r.beta, r.depth);
            let sp = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE)?;
            let starts: Vec<usize> =
                if pc.len() <= FULL_SWEEP_LIMIT { (0..pc.len()).collect() } else { candidate_starts(&pc, &r) };
            let points = (*points).max(2);
            let rows: Vec<(f64, Vec<f64>)> = (0..points)
                .map(|i| {
                    let s = t_max * i as f64 / (points - 1) as f64;
                    let (tv, _) = sp.worst_tv(&starts, s * theta, exec);
                    (s, vec![s * theta, tv, lc.worst_tv(s)])
                })
                .collect();
            let cols: Vec<String> = ["t_abs", "tv_exact", "tv_limit"].iter().map(|s| s.to_string()).collect();
            write_curve(&out.path("tv.csv"), "tv", &cols, &rows)?;
            println!("theta_N = {}; {} rows written", fmt17(theta), rows.len());
            let mut params = chain_params(&pc.params);
            params["t_max_theta"] = json!(t_max);
            params["points"] = json!(points);
            finish(out, "tv", argv, params, None)?;
        }
        Command::Potential { chain, margins, from, to } => {
            let pc = build_chain(chain, exec)?;
            let r = landscape_report(pc.params.q, pc.params.beta)?;
            let sets = sets_for(&pc, &r, margins)?;
            let to: Vec<usize> =
                if to.is_empty() { sets.labels().into_iter().filter(|l| !from.contains(l)).collect() } else { to.clone() };
            for l in from.iter().chain(&to) {
                if sets.valley(*l).is_none() {
                    return Err(CwpError::InvalidParameter(format!("no valley labelled {l}; have {:?}", sets.labels())));
                }
            }
            let a = sets.union(from);
            let b = sets.union(&to);
            let eq = equilibrium_potential(&pc.chain, &a, &b)?;
            let hit = mean_hitting_time(&pc.chain, &b)?;
            let f = pc.free_energies();
            let (height, path) = discrete_comm_height(&pc, &f, &a, &b)?;
            let lower = thomson_lower(&pc.chain, &path)?;
            let upper = dirichlet_upper(&pc.chain, &distance_interpolation(&pc.chain, &a, &b), &a, &b)?;
            let summary = json!({
                "from": from, "to": to, "eta": sets.eta, "epsilon": sets.epsilon,
                "capacity": eq.capacity, "thomson_lower": lower, "dirichlet_upper": upper,
                "communication_height": height, "harmonic_residual": eq.residual,
                "solver": format!("{:?}", eq.method),
                "mean_hitting_from_equilibrium_measure": magic_formula_from_set(&pc.chain, &a, &b)?,
            });
            let q = pc.params.q;
            let mut header = vec!["index".to_string()];
            header.extend((1..=q).map(|k| format!("n_{k}")));
            header.extend(["valley", "h_ab", "mean_hitting_b"].iter().map(|s| s.to_string()));
            let vmap = sets.valley_map(pc.len());
            let mut t = CsvTable::create(&out.path("potential.csv"), "potential", &header)?;
            for i in 0..pc.len() {
                let mut row = vec![i.to_string()];
                row.extend(pc.space.state(i).iter().map(|c| c.to_string()));
                row.push(vmap[i].map_or(String::new(), |v| v.to_string()));
                row.push(fmt17(eq.h[i]));
                row.push(fmt17(hit.values[i]));
                t.row(row)?;
            }
            t.finish()?;
            write_json(&out.path("potential.json"), &summary)?;
            println!("{summary}");
            let mut params = chain_params(&pc.params);
            params["eta"] = json!(sets.eta);
            params["epsilon"] = json!(sets.epsilon);
            finish(out, "potential", argv, params, None)?;
        }
        Command::Simulate { chain, margins, seed, replicas, mode, start, t_max } => {
            let pc = build_chain(chain, exec)?;
            let r = landscape_report(pc.params.q, pc.params.beta)?;
            let sets = sets_for(&pc, &r, margins)?;
            let start = if start.is_empty() { pc.space.state(pc.space.nearest(&r.e)).clone() } else { start.clone() };
            let theta = metastable_timescale(pc.params.n, r.beta, r.depth);
            let mode = match mode {
                ModeArg::Full => SimMode::FullConfig,
                ModeArg::Proportions => SimMode::Proportions,
            };
            let vmap = sets.valley_map(pc.len());
            let labels = sets.labels();
            let start_valley = pc.space.index(&start).and_then(|i| vmap[i]);
            let spec = SimSpec {
                params: pc.params,
                mode,
                replicas: *replicas,
                seed: *seed,
                t_max: t_max * theta,
                record: Record::HittingOnly,
                exec,
            };
            // Hitting time of the union of the valleys other than the starting one.
            let target: Vec<usize> = labels.iter().cloned().filter(|l| Some(*l) != start_valley).collect();
            let tb = sets.union(&target);
            let mut in_target = vec![false; pc.len()];
            for &s in &tb {
                in_target[s] = true;
            }
            let space = &pc.space;
            let est = estimate_hitting(&spec, &start, |s: &[u32]| space.index(s).is_some_and(|i| in_target[i]))?;
            let exact = pc.space.index(&start).map(|i| mean_hitting_time(&pc.chain, &tb).map(|h| h.values[i])).transpose()?;
            let classify = |s: &[u32]| {
                let v = space.index(s).and_then(|i| vmap[i])?;
                labels.iter().position(|&l| l == v)
            };
            let order = order_process_stats(&spec, &start, &labels, classify, theta)?;
            let header: Vec<String> = vec!["replica".into(), "hitting_time".into()];
            let mut t = CsvTable::create(&out.path("hitting.csv"), "hitting", &header)?;
            for (i, h) in est.samples.iter().enumerate() {
                t.row(vec![i.to_string(), fmt17(*h)])?;
            }
            t.finish()?;
            let summary = json!({
                "start": start, "target_valleys": target, "theta": theta,
                "hitting_mean": est.mean, "hitting_std_error": est.std_error, "censored": est.censored,
                "hitting_mean_exact": exact, "order_process": order,
            });
            write_json(&out.path("simulate.json"), &summary)?;
            println!(
                "hitting mean {:.6} +- {:.6} (exact {}), censored {}",
                est.mean,
                est.std_error,
                exact.map_or("n/a".into(), |v| format!("{v:.6}")),
                est.censored
            );
            let mut params = chain_params(&pc.params);
            params["mode"] = json!(format!("{mode:?}"));
            params["replicas"] = json!(replicas);
            params["t_max_theta"] = json!(t_max);
            params["eta"] = json!(sets.eta);
            params["epsilon"] = json!(sets.epsilon);
            finish(out, "simulate", argv, params, Some(*seed))?;
        }
        Command::Verify { profile, criteria, seed, inject_rate_perturbation } => {
            let opts = VerifyOptions {
                profile: *profile,
                exec,
                inject_rate_perturbation: *inject_rate_perturbation,
                seed: *seed,
            };
            let ids: Vec<u8> = if criteria.is_empty() { (1..=10).collect() } else { criteria.clone() };
            let mut reports = Vec::new();
            for id in ids {
                let rep = run_criterion(id, &opts);
                println!("{}", rep.summary_line());
                reports.push(rep);
            }
            let verdict = Verdict { profile: *profile, passed: reports.iter().all(|r| r.passed), criteria: reports };
            write_json(&out.path("verdict.json"), &verdict)?;
            println!("verdict: {}", if verdict.passed { "PASS" } else { "FAIL" });
            finish(out, "verify", argv, json!({"profile": profile, "criteria": criteria}), Some(*seed))?;
            return Ok(if verdict.passed { 0 } else { 1 });
        }
        Command::Rerun { manifest } => {
            let m = RunManifest::load(manifest)?;
            let mut args = strip_out(&m.argv);
            args.push("--out".into());
            args.push(cli.out.to_string_lossy().into_owned());
            let reparsed = Cli::try_parse_from(std::iter::once("cwp".to_string()).chain(args.iter().cloned()))
                .map_err(|e| CwpError::InvalidParameter(format!("manifest argv does not parse: {e}")))?;
            if matches!(reparsed.command, Command::Rerun { .. }) {
                return Err(CwpError::InvalidParameter("refusing to rerun a rerun manifest".into()));
            }
            return run(&reparsed, &args);
        }
    }
    Ok(0)
}

/// Remove `--out DIR` / `--out=DIR` from an argument vector.
fn strip_out(argv: &[String]) -> Vec<String> {
    let mut v = Vec::new();
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            v.push(a.clone());
        }
    }
    v
}
