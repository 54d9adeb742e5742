//! End-to-end pipelines behind the subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use itertools::Itertools;
use nswcp::ef1::{self, IdenticalInstance};
use nswcp::model::FracEntry;
use nswcp::rounding::{self, Decomposition, Objective};
use nswcp::{alpha, fisher, lp, oracle, relax, waterfill};
use nswcp::{Allocation, Error, FractionalAssignment, NswInstance};

use crate::io::{self, InputError, ObjectiveSpec};
use crate::report::{Certificate, Report, Timings, VerifyReport};

/// Failure of a command, by exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Unreadable, malformed or invalid input (exit 1).
    Input(String),
    /// The relaxation has no feasible point (exit 2).
    Infeasible(String),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Input(_) => 1,
            CmdError::Infeasible(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Input(m) | CmdError::Infeasible(m) => m,
        }
    }
}

impl From<InputError> for CmdError {
    fn from(e: InputError) -> Self {
        CmdError::Input(e.to_string())
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(m) | Error::Unbounded(m) => CmdError::Infeasible(format!("infeasible: {m}")),
            e => CmdError::Input(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundMode {
    Best,
    Sample,
}

impl RoundMode {
    fn name(self) -> &'static str {
        match self {
            RoundMode::Best => "best",
            RoundMode::Sample => "sample",
        }
    }
}

pub struct SolveOptions {
    pub input: PathBuf,
    pub eps: f64,
    pub seed: u64,
    pub round: RoundMode,
    pub dump_lp: Option<PathBuf>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn e_inv_e() -> f64 {
    (-1.0 / std::f64::consts::E).exp()
}

fn check_eps(eps: f64) -> Result<(), CmdError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CmdError::Input(format!("--eps must be positive, got {eps}")))
    }
}

fn dump(model: &lp::LpModel, path: &Path) -> Result<(), CmdError> {
    let io_err = |e: std::io::Error| CmdError::Input(format!("cannot write {}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    lp::write_mps(model, &mut out).map_err(io_err)
}

fn max_marginal_error(d: &Decomposition, x: &FractionalAssignment, players: usize, objects: usize) -> f64 {
    let marginals = d.marginals();
    let mut worst = 0.0f64;
    for i in 0..players {
        for j in 0..objects {
            worst = worst.max((marginals.get(i, j) - x.get(i, j)).abs());
        }
    }
    worst
}

fn named_bundles(allocation: &Allocation, players: &[String], objects: &[String]) -> BTreeMap<String, Vec<String>> {
    allocation
        .bundles(players.len())
        .into_iter()
        .enumerate()
        .map(|(i, bundle)| (players[i].clone(), bundle.into_iter().map(|j| objects[j].clone()).collect()))
        .collect()
}

/// `Σ_i w_i f_nsw(x_i)`.
fn relaxed_log_nsw(inst: &NswInstance, x: &FractionalAssignment) -> Result<f64, Error> {
    let mut total = 0.0;
    for i in 0..inst.n_agents() {
        let p = relax::player_profile(x, i, |j| inst.value(i, j).unwrap_or(0.0))?;
        total += inst.weight(i) * waterfill::f_nsw(&p)?;
    }
    Ok(total)
}

fn integral(allocation: &Allocation, players: usize) -> FractionalAssignment {
    let entries = allocation.owners().iter().enumerate().map(|(object, &player)| FracEntry { player, object, x: 1.0 }).collect();
    FractionalAssignment::new(players, allocation.len(), entries)
}

pub fn solve_nsw(opts: &SolveOptions) -> Result<Report, CmdError> {
    let start = Instant::now();
    check_eps(opts.eps)?;
    let loaded = io::load_nsw(&opts.input)?;
    let inst = loaded.file.to_instance()?;
    let parse_ms = ms(start);

    let t = Instant::now();
    if let Some(path) = &opts.dump_lp {
        dump(&relax::build_nsw_lp(&inst, opts.eps)?.model, path)?;
    }
    let sol = relax::solve_cp_nsw(&inst, opts.eps)?;
    let relax_ms = ms(t);

    let t = Instant::now();
    let d = rounding::round(&sol.x, &inst)?;
    let best = rounding::best_allocation(&d, Objective::Nsw(&inst))?;
    let chosen = match opts.round {
        RoundMode::Best => best.allocation.clone(),
        RoundMode::Sample => rounding::sample(&d, opts.seed)?,
    };
    let round_ms = ms(t);

    let cp_nsw = sol.value.exp();
    let mut certificates = vec![
        Certificate::at_least("best_nsw_vs_relaxation", best.value, e_inv_e() * cp_nsw / (1.0 + opts.eps) - 1e-9),
        Certificate::at_most("best_nsw_below_relaxation", best.value, cp_nsw * (1.0 + 1e-9)),
        Certificate::at_least(
            "expected_log_nsw",
            best.expected,
            relaxed_log_nsw(&inst, &sol.x)? - 1.0 / std::f64::consts::E - 1e-9,
        ),
        Certificate::at_most("marginal_error", max_marginal_error(&d, &sol.x, inst.n_agents(), inst.n_items()), 1e-6),
    ];
    let mut fsr_gap = None;
    if inst.is_unweighted() {
        let fsr = fisher::construct_from_x(&inst, &sol.x)?;
        let gap = fisher::fsr_objective(&inst, &fsr)? - sol.value;
        certificates.push(Certificate::at_most("fsr_gap", gap.abs(), (1.0 + opts.eps).ln() + 1e-6));
        fsr_gap = Some(gap);
    }
    let agents: Vec<String> = inst.agents().iter().map(|a| a.id.clone()).collect();
    Ok(Report {
        command: "solve-nsw".into(),
        instance_digest: loaded.digest,
        eps: opts.eps,
        seed: opts.seed,
        round: opts.round.name().into(),
        objective: "nsw".into(),
        cp_value: sol.value,
        rounded_value: inst.nsw_value(&chosen)?,
        best_value: best.value,
        expected_value: best.expected,
        allocation: named_bundles(&chosen, &agents, inst.items()),
        decomposition_size: d.terms.len(),
        certificates,
        fsr_gap,
        timings: Timings { parse_ms, relax_ms, round_ms, total_ms: ms(start) },
    })
}

/// Objective from the flag, else from the file.
fn sched_objective(flag: Option<ObjectiveSpec>, file: &io::SchedFile) -> Result<ObjectiveSpec, CmdError> {
    flag.or(file.objective)
        .ok_or_else(|| CmdError::Input("no objective: pass --objective or set \"objective\" in the file".into()))
}

/// Approximation constant and the exponent of the `(1+ε)` discretization loss.
fn sched_constant(objective: ObjectiveSpec) -> Result<(f64, f64), CmdError> {
    Ok(match objective {
        ObjectiveSpec::Lk { k } => (alpha::compute_alpha_power(k)?.alpha, k),
        ObjectiveSpec::Completion => (alpha::completion_alpha(), 2.0),
    })
}

pub fn solve_sched(opts: &SolveOptions, objective: Option<ObjectiveSpec>) -> Result<Report, CmdError> {
    let start = Instant::now();
    check_eps(opts.eps)?;
    let loaded = io::load_sched(&opts.input)?;
    let objective = sched_objective(objective, &loaded.file)?;
    let inst = loaded.file.to_instance(objective.to_model())?;
    let parse_ms = ms(start);

    let t = Instant::now();
    if let Some(path) = &opts.dump_lp {
        dump(&relax::build_sched_lp(&inst, opts.eps)?.model, path)?;
    }
    let sol = relax::solve_cp_sched(&inst, opts.eps)?;
    let relax_ms = ms(t);

    let t = Instant::now();
    let d = rounding::round(&sol.x, &inst)?;
    let best = rounding::best_allocation(&d, Objective::Sched(&inst))?;
    let chosen = match opts.round {
        RoundMode::Best => best.allocation.clone(),
        RoundMode::Sample => rounding::sample(&d, opts.seed)?,
    };
    let round_ms = ms(t);

    let (a, power) = sched_constant(objective)?;
    let certificates = vec![
        Certificate::at_most("expected_cost_vs_relaxation", best.expected, a * (1.0 + opts.eps).powf(power) * sol.value + 1e-6),
        Certificate::at_most("relaxation_below_best", sol.value, best.value + 1e-9),
        Certificate::at_most("marginal_error", max_marginal_error(&d, &sol.x, inst.n_machines(), inst.n_jobs()), 1e-6),
    ];
    Ok(Report {
        command: "solve-sched".into(),
        instance_digest: loaded.digest,
        eps: opts.eps,
        seed: opts.seed,
        round: opts.round.name().into(),
        objective: objective.to_string(),
        cp_value: sol.value,
        rounded_value: inst.cost(&chosen),
        best_value: best.value,
        expected_value: best.expected,
        allocation: named_bundles(&chosen, inst.machines(), inst.jobs()),
        decomposition_size: d.terms.len(),
        certificates,
        fsr_gap: None,
        timings: Timings { parse_ms, relax_ms, round_ms, total_ms: ms(start) },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Nsw,
    Fsr,
    Ef1,
    Sched,
    Alpha,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Nsw => "nsw",
            Suite::Fsr => "fsr",
            Suite::Ef1 => "ef1",
            Suite::Sched => "sched",
            Suite::Alpha => "alpha",
        }
    }
}

pub struct VerifyOptions {
    pub suite: Suite,
    pub input: Option<PathBuf>,
    pub eps: f64,
    pub objective: Option<ObjectiveSpec>,
}

pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport, CmdError> {
    let start = Instant::now();
    check_eps(opts.eps)?;
    let need_input = || {
        opts.input
            .clone()
            .ok_or_else(|| CmdError::Input(format!("the {} suite needs --input", opts.suite.name())))
    };
    let solve_opts = |input: PathBuf| SolveOptions { input, eps: opts.eps, seed: 0, round: RoundMode::Best, dump_lp: None };
    let (digest, certificates) = match opts.suite {
        Suite::Nsw => {
            let input = need_input()?;
            let report = solve_nsw(&solve_opts(input.clone()))?;
            let mut certs = report.certificates;
            let inst = io::load_nsw(&input)?.file.to_instance()?;
            if let Some((opt, _)) = small(oracle::brute_nsw_opt(&inst))? {
                certs.push(Certificate::at_least("relaxation_vs_optimum", report.cp_value.exp(), opt - 1e-6));
                certs.push(Certificate::at_most("best_vs_optimum", report.best_value, opt + 1e-9));
            }
            (Some(report.instance_digest), certs)
        }
        Suite::Fsr => {
            let loaded = io::load_nsw(&need_input()?)?;
            let inst = loaded.file.to_instance()?;
            (Some(loaded.digest), fsr_certificates(&inst, opts.eps)?)
        }
        Suite::Ef1 => match &opts.input {
            Some(path) => {
                let loaded = io::load_nsw(path)?;
                let inst = identical(&loaded.file.to_instance()?)?;
                (Some(loaded.digest), ef1_certificates(std::iter::once(inst))?)
            }
            None => {
                let sweep = (1..=3usize).flat_map(|n| {
                    (1..=6usize).flat_map(move |m| {
                        (1..=5u32)
                            .combinations_with_replacement(m)
                            .map(move |v| IdenticalInstance::new(n, v.into_iter().map(f64::from).collect()))
                    })
                });
                (None, ef1_certificates(sweep.map(|r| r.expect("positive values")))?)
            }
        },
        Suite::Sched => {
            let input = need_input()?;
            let report = solve_sched(&solve_opts(input.clone()), opts.objective)?;
            let mut certs = report.certificates;
            let loaded = io::load_sched(&input)?;
            let objective = sched_objective(opts.objective, &loaded.file)?;
            let inst = loaded.file.to_instance(objective.to_model())?;
            if let Some((opt, _)) = small(oracle::brute_sched_opt(&inst))? {
                certs.push(Certificate::at_most("relaxation_vs_optimum", report.cp_value, opt + 1e-9));
                certs.push(Certificate::at_least("best_vs_optimum", report.best_value, opt - 1e-9));
            }
            (Some(report.instance_digest), certs)
        }
        Suite::Alpha => (None, alpha_certificates()?),
    };
    let pass = certificates.iter().all(|c| c.pass);
    Ok(VerifyReport {
        suite: opts.suite.name().into(),
        instance_digest: digest,
        eps: opts.eps,
        certificates,
        pass,
        total_ms: ms(start),
    })
}

/// `None` when the instance is too large for exhaustive search.
fn small<T>(r: Result<T, Error>) -> Result<Option<T>, CmdError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::TooLarge { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn fsr_certificates(inst: &NswInstance, eps: f64) -> Result<Vec<Certificate>, CmdError> {
    let sol = relax::solve_cp_nsw(inst, eps)?;
    let fsr = fisher::construct_from_x(inst, &sol.x)?;
    let feasible = fisher::check_fsr(inst, &fsr).is_ok();
    let value = fisher::fsr_objective(inst, &fsr)?;
    let mut certs = vec![
        Certificate::at_least("fsr_feasible", f64::from(u8::from(feasible)), 1.0),
        Certificate::at_most("fsr_gap", (value - sol.value).abs(), (1.0 + eps).ln() + 1e-6),
    ];
    // Every allocation of the decomposition is itself a feasible point.
    let d = rounding::round(&sol.x, inst)?;
    let mut slack = f64::INFINITY;
    for term in &d.terms {
        let x = integral(&term.allocation, inst.n_agents());
        let b = fisher::construct_from_x(inst, &x)?;
        slack = slack.min(fisher::fsr_objective(inst, &b)? - relaxed_log_nsw(inst, &x)?);
    }
    certs.push(Certificate::at_least("fsr_minus_relaxed_on_rounded", slack, -1e-6));
    Ok(certs)
}

/// Identical-agent view of a complete instance whose agents share one value vector.
fn identical(inst: &NswInstance) -> Result<IdenticalInstance, CmdError> {
    let values: Option<Vec<f64>> = (0..inst.n_items()).map(|j| inst.value(0, j)).collect();
    let values = values.ok_or_else(|| CmdError::Input("the ef1 suite needs a complete instance".into()))?;
    for i in 1..inst.n_agents() {
        if (0..inst.n_items()).any(|j| inst.value(i, j) != Some(values[j])) {
            return Err(CmdError::Input("the ef1 suite needs agents with identical values".into()));
        }
    }
    Ok(IdenticalInstance::new(inst.n_agents(), values)?)
}

fn ef1_certificates(instances: impl Iterator<Item = IdenticalInstance>) -> Result<Vec<Certificate>, CmdError> {
    let (mut worst_ratio, mut bound_slack, mut greedy_ok) = (0.0f64, f64::INFINITY, true);
    let mut count = 0usize;
    for inst in instances {
        let greedy = ef1::greedy_ef1(&inst);
        greedy_ok &= greedy.is_ok();
        let Some((opt, _)) = small(oracle::brute_identical_opt(&inst))? else { continue };
        let Some(all) = small(oracle::enumerate_ef1(&inst))? else { continue };
        for a in all {
            let c = ef1::gap_bound(&inst, &a)?;
            worst_ratio = worst_ratio.max(c.ratio());
            bound_slack = bound_slack.min(c.bound - opt);
            count += 1;
        }
    }
    if count == 0 {
        return Err(CmdError::Input("instance too large to enumerate its EF1 allocations".into()));
    }
    Ok(vec![
        Certificate::at_least("greedy_is_ef1", f64::from(u8::from(greedy_ok)), 1.0),
        Certificate::at_most("worst_ef1_bound_ratio", worst_ratio, 1.0 / e_inv_e() + 1e-9),
        Certificate::at_least("bound_minus_optimum", bound_slack, -1e-9),
    ])
}

fn alpha_certificates() -> Result<Vec<Certificate>, CmdError> {
    let a1 = alpha::compute_alpha_power(1.0)?.alpha;
    let a2 = alpha::compute_alpha_power(2.0)?.alpha;
    let c = alpha::completion_certificate(10_000);
    Ok(vec![
        Certificate::at_most("alpha_1_error", (a1 - 1.0).abs(), 1e-6),
        Certificate::at_most("alpha_2_error", (a2 - 4.0 / 3.0).abs(), 1e-4),
        Certificate::at_most("completion_alpha_error", (c.alpha - (1.0 + 2f64.sqrt()) / 2.0).abs(), 1e-15),
        Certificate::at_most("completion_b0_face", c.b_zero_max, 1e-9),
        Certificate::at_most("completion_diagonal_face", c.b_diagonal_max, 1e-9),
        Certificate::at_most("completion_triangle", c.triangle_max, 1e-9),
    ])
}
