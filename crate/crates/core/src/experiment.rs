//! Monte Carlo failure experiments.
//!
//! A trial draws an error Hamiltonian, solves the perturbed (possibly encoded)
//! instance exactly, decodes, and scores the decoded logical state against the
//! unperturbed minimum. Failure is judged by logical energy, so any member of
//! a degenerate ground space counts as success.
//!
//! Sweeps give every cell a seed that depends on the row (`N` and code) but
//! not on `eps_max`. Each trial then sees the same noise direction at every
//! noise strength, and per-trial failure is monotone in `eps_max`.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{decode, encode, EncodedModel, EncodingDescriptor};
use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::model::{make_ladder_instance, IsingModel, ModelFile, SpinConfig};
use crate::noise::{derive_seed, draw_error_model, NoiseSpec, TrialSeed};
use crate::solvers::{
    auto_solve, plan_solver, solve_brute, solve_frontier, solve_with, GroundResult, SolverId, SolverPlan,
    BRUTE_LIMIT, ENERGY_TOL,
};

/// Second-best gap below which a perturbed optimum is flagged near-degenerate.
pub const NEAR_DEGENERATE_TOL: f64 = 1e-6;

/// Fraction of trials the auditor re-solves with a different solver.
pub const AUDIT_FRACTION: f64 = 0.01;

pub const DEFAULT_UNENCODED_TRIALS: u64 = 1000;
pub const DEFAULT_ENCODED_TRIALS: u64 = 400;

const TAG_UNENCODED: u64 = 0x756e_656e;
const TAG_ENCODED: u64 = 0x0065_6e63;
const TAG_RESCALED: u64 = 0x7265_7363;
const TAG_AUDIT: u64 = 0x6175_6474;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceDescriptor {
    Ladder {
        columns: usize,
        #[serde(default)]
        antiferro_rung: usize,
    },
    Inline {
        model: ModelFile,
    },
}

impl InstanceDescriptor {
    pub fn ladder(columns: usize) -> Self {
        InstanceDescriptor::Ladder { columns, antiferro_rung: 0 }
    }

    pub fn build(&self) -> Result<IsingModel> {
        match self {
            InstanceDescriptor::Ladder { columns, antiferro_rung } => make_ladder_instance(*columns, *antiferro_rung),
            InstanceDescriptor::Inline { model } => IsingModel::from_file(model),
        }
    }
}

/// `"auto"` or the name of a solver to force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SolverPolicy {
    #[default]
    Auto,
    Forced(SolverId),
}

impl TryFrom<String> for SolverPolicy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        if s == "auto" {
            Ok(SolverPolicy::Auto)
        } else {
            Ok(SolverPolicy::Forced(s.parse()?))
        }
    }
}

impl From<SolverPolicy> for String {
    fn from(p: SolverPolicy) -> String {
        match p {
            SolverPolicy::Auto => "auto".into(),
            SolverPolicy::Forced(id) => id.as_str().into(),
        }
    }
}

impl SolverPolicy {
    pub fn solve(&self, m: &IsingModel) -> Result<GroundResult> {
        match self {
            SolverPolicy::Auto => auto_solve(m),
            SolverPolicy::Forced(id) => solve_with(m, *id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceDescriptor,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub encoding: Option<EncodingDescriptor>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub solver_policy: SolverPolicy,
}

impl ExperimentConfig {
    /// Every problem with the config, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.trials == 0 {
            out.push("trials must be at least 1".to_string());
        }
        if let Err(e) = self.noise.validate() {
            out.push(format!("noise: {e}"));
        }
        if let Err(e) = self.instance.build() {
            out.push(format!("instance: {e}"));
        }
        if let Some(enc) = &self.encoding {
            if let Err(e) = enc.build() {
                out.push(format!("encoding: {e}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub failed: bool,
    /// `None` for unencoded runs.
    pub in_code_space: Option<bool>,
    /// Ground energy of the perturbed physical model.
    pub perturbed_value: f64,
    /// Unperturbed logical energy of the decoded state.
    pub logical_energy_of_decode: f64,
    pub unperturbed_min: f64,
    pub solver_id: SolverId,
    /// Second-best perturbed level within [`NEAR_DEGENERATE_TOL`].
    pub near_degenerate: bool,
    /// Blocks whose majority vote was a tie.
    pub tied_blocks: usize,
    #[serde(with = "crate::solvers::duration_secs")]
    pub wall_time: Duration,
}

/// A resolved experiment: the logical instance, its encoding, and the exact
/// unperturbed minimum, built once and shared by all trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    logical: IsingModel,
    encoded: Option<EncodedModel>,
    unperturbed_min: f64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let logical = config.instance.build()?;
        let encoded = match &config.encoding {
            Some(d) => Some(encode(&logical, &d.build()?)),
            None => None,
        };
        let unperturbed_min = auto_solve(&logical)?.value;
        Ok(Experiment { config, logical, encoded, unperturbed_min })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn logical(&self) -> &IsingModel {
        &self.logical
    }

    pub fn encoded(&self) -> Option<&EncodedModel> {
        self.encoded.as_ref()
    }

    pub fn unperturbed_min(&self) -> f64 {
        self.unperturbed_min
    }

    /// `K`, or 1 when unencoded.
    pub fn k(&self) -> usize {
        self.encoded.as_ref().map_or(1, EncodedModel::k)
    }

    /// The model the solver sees in trial `t`: problem plus error Hamiltonian.
    pub fn perturbed_model(&self, t: u64) -> Result<IsingModel> {
        let seed = TrialSeed::new(self.config.master_seed, t);
        let spec = &self.config.noise;
        match &self.encoded {
            Some(em) => em.physical.add(&em.draw_error(spec, seed)),
            None => self.logical.add(&draw_error_model(&self.logical, spec, seed)),
        }
    }

    fn score(&self, t: u64, res: &GroundResult, start: Instant) -> Result<TrialRecord> {
        let (logical, in_code_space, tied_blocks) = match &self.encoded {
            Some(em) => {
                let d = decode(&res.config, em.logical_vertices(), em.k())?;
                let ties = d.tie_count();
                (d.logical, Some(d.in_code_space), ties)
            }
            None => (res.config.clone(), None, 0),
        };
        let e = self.logical.energy(&logical)?;
        Ok(TrialRecord {
            trial_index: t,
            failed: e > self.unperturbed_min + ENERGY_TOL,
            in_code_space,
            perturbed_value: res.value,
            logical_energy_of_decode: e,
            unperturbed_min: self.unperturbed_min,
            solver_id: res.solver_id,
            near_degenerate: res.near_degenerate(NEAR_DEGENERATE_TOL),
            tied_blocks,
            wall_time: start.elapsed(),
        })
    }

    pub fn run_trial(&self, t: u64) -> Result<TrialRecord> {
        let start = Instant::now();
        let wrap = |e: Error| Error::Trial { trial: t, source: Box::new(e) };
        let m = self.perturbed_model(t).map_err(wrap)?;
        let res = self.config.solver_policy.solve(&m).map_err(wrap)?;
        self.score(t, &res, start).map_err(wrap)
    }

    /// All configured trials on a pool of `threads` workers, in trial order.
    pub fn run_all(&self, threads: usize) -> Result<Vec<TrialRecord>> {
        with_pool(threads, || (0..self.config.trials).into_par_iter().map(|t| self.run_trial(t)).collect::<Result<_>>())?
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Solves with a route different from the one `auto_solve` picks, so the
/// audit is not a rerun of the same code path. `None` if no second exact
/// route fits.
fn independent_solve(m: &IsingModel) -> Option<Result<GroundResult>> {
    match plan_solver(m) {
        SolverPlan::Brute => Some(solve_frontier(m, None)),
        SolverPlan::Frontier { mut order, .. } => {
            if m.vertex_count() <= BRUTE_LIMIT {
                return Some(solve_brute(m));
            }
            order.reverse();
            Some(solve_frontier(m, Some(&order)))
        }
        SolverPlan::Bnb => match solve_frontier(m, None) {
            Err(e) if e.is_refusal() => None,
            other => Some(other),
        },
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub mismatches: usize,
}

impl AuditReport {
    fn merge(self, other: AuditReport) -> AuditReport {
        AuditReport { checked: self.checked + other.checked, mismatches: self.mismatches + other.mismatches }
    }
}

/// Re-solves a deterministic pseudo-random `fraction` of `records` (at least
/// one) with an independent solver and checks the perturbed optimum and the
/// failure verdict.
pub fn audit_records(exp: &Experiment, records: &[TrialRecord], fraction: f64) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    let threshold = (fraction.clamp(0.0, 1.0) * u64::MAX as f64) as u64;
    let chosen: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| derive_seed(&[exp.config.master_seed, r.trial_index, TAG_AUDIT]) <= threshold)
        .collect();
    let chosen = if chosen.is_empty() { records.iter().take(1).collect() } else { chosen };
    for rec in chosen {
        let m = exp.perturbed_model(rec.trial_index)?;
        let Some(res) = independent_solve(&m) else { continue };
        let res = res?;
        let rescored = exp.score(rec.trial_index, &res, Instant::now())?;
        report.checked += 1;
        let value_ok = (res.value - rec.perturbed_value).abs() <= ENERGY_TOL * (1.0 + res.value.abs());
        let verdict_ok = rescored.failed == rec.failed || rec.near_degenerate;
        if !(value_ok && verdict_ok) {
            report.mismatches += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    /// Noise strength actually applied.
    pub eps_max: f64,
    pub k: usize,
    /// Code label, `"none"` for unencoded cells.
    pub code: String,
    /// The encoded `eps_max` this cell is compared against; equals `eps_max`
    /// except in rescaled comparison tables.
    pub eps_nominal: f64,
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    pub std_err: f64,
    /// Fraction of trials whose perturbed optimum is a codeword (1 when unencoded).
    pub code_space_rate: f64,
    pub failures_in_code_space: u64,
    pub near_degenerate: u64,
    pub mean_wall_time: f64,
    pub seed: u64,
}

impl SweepCell {
    fn from_records(job: &CellJob, records: &[TrialRecord]) -> SweepCell {
        let trials = records.len() as u64;
        let failures = records.iter().filter(|r| r.failed).count() as u64;
        let in_cs = |r: &TrialRecord| r.in_code_space.unwrap_or(true);
        let p = failures as f64 / trials as f64;
        SweepCell {
            n: job.n,
            eps_max: job.eps_max,
            k: job.k,
            code: job.code.clone(),
            eps_nominal: job.eps_nominal,
            trials,
            failures,
            failure_rate: p,
            std_err: (p * (1.0 - p) / trials as f64).sqrt(),
            code_space_rate: records.iter().filter(|r| in_cs(r)).count() as f64 / trials as f64,
            failures_in_code_space: records.iter().filter(|r| r.failed && in_cs(r)).count() as u64,
            near_degenerate: records.iter().filter(|r| r.near_degenerate).count() as u64,
            mean_wall_time: records.iter().map(|r| r.wall_time.as_secs_f64()).sum::<f64>() / trials as f64,
            seed: job.exp.config.master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub n_values: Vec<usize>,
    pub eps_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub cells: Vec<SweepCell>,
    pub audit: AuditReport,
}

pub const CSV_HEADER: &str = "N,eps_max,K,failure_rate,std_err,code_space_rate,trials";

/// Two cells differing by `eps_max` whose rates decrease by more than the
/// allowed number of standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneViolation {
    pub n: usize,
    pub code: String,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub rate_lo: f64,
    pub rate_hi: f64,
}

impl SweepTable {
    fn from_cells(cells: Vec<SweepCell>, audit: AuditReport) -> SweepTable {
        let mut n_values: Vec<usize> = cells.iter().map(|c| c.n).collect();
        n_values.sort_unstable();
        n_values.dedup();
        let mut k_values: Vec<usize> = cells.iter().map(|c| c.k).collect();
        k_values.sort_unstable();
        k_values.dedup();
        let mut eps_values: Vec<f64> = cells.iter().map(|c| c.eps_max).collect();
        eps_values.sort_by(f64::total_cmp);
        eps_values.dedup();
        SweepTable { n_values, eps_values, k_values, cells, audit }
    }

    pub fn cell(&self, n: usize, eps_max: f64, code: &str) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.n == n && c.eps_max == eps_max && c.code == code)
    }

    /// One row per cell with the standard columns. Wall time is left out so
    /// the file is a pure function of the configuration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.n, c.eps_max, c.k, c.failure_rate, c.std_err, c.code_space_rate, c.trials
            )
            .expect("write to string");
        }
        out
    }

    /// Standard columns plus the code label and the nominal encoded
    /// `eps_max`, for tables that mix codes or rescale noise.
    pub fn to_csv_extended(&self) -> String {
        let mut out = format!("{CSV_HEADER},code,eps_nominal\n");
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.n, c.eps_max, c.k, c.failure_rate, c.std_err, c.code_space_rate, c.trials, c.code, c.eps_nominal
            )
            .expect("write to string");
        }
        out
    }

    /// Adjacent-`eps_max` pairs within each `(N, code)` row where the rate
    /// drops by more than `z` combined standard errors.
    pub fn monotonicity_violations(&self, z: f64) -> Vec<MonotoneViolation> {
        let mut rows: Vec<(usize, &str)> = self.cells.iter().map(|c| (c.n, c.code.as_str())).collect();
        rows.sort_unstable();
        rows.dedup();
        let mut out = Vec::new();
        for (n, code) in rows {
            let mut row: Vec<&SweepCell> = self.cells.iter().filter(|c| c.n == n && c.code == code).collect();
            row.sort_by(|a, b| a.eps_max.total_cmp(&b.eps_max));
            for w in row.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let sigma = (lo.std_err.powi(2) + hi.std_err.powi(2)).sqrt();
                if hi.failure_rate < lo.failure_rate - z * sigma {
                    out.push(MonotoneViolation {
                        n,
                        code: code.to_string(),
                        eps_lo: lo.eps_max,
                        eps_hi: hi.eps_max,
                        rate_lo: lo.failure_rate,
                        rate_hi: hi.failure_rate,
                    });
                }
            }
        }
        out
    }
}

struct CellJob {
    exp: Arc<Experiment>,
    n: usize,
    k: usize,
    code: String,
    eps_max: f64,
    eps_nominal: f64,
}

/// Runs every trial of every cell as one flat job list and merges results
/// by `(cell, trial)` index, so the output does not depend on scheduling.
fn run_cells(jobs: &[CellJob], threads: usize) -> Result<SweepTable> {
    let work: Vec<(usize, u64)> =
        jobs.iter().enumerate().flat_map(|(c, j)| (0..j.exp.config.trials).map(move |t| (c, t))).collect();
    let records: Vec<TrialRecord> =
        with_pool(threads, || work.par_iter().map(|&(c, t)| jobs[c].exp.run_trial(t)).collect::<Result<_>>())??;
    let mut cells = Vec::with_capacity(jobs.len());
    let mut audit = AuditReport::default();
    let mut offset = 0;
    for job in jobs {
        let len = job.exp.config.trials as usize;
        let recs = &records[offset..offset + len];
        offset += len;
        audit = audit.merge(audit_records(&job.exp, recs, AUDIT_FRACTION)?);
        cells.push(SweepCell::from_records(job, recs));
    }
    if audit.mismatches > 0 {
        return Err(Error::AuditFailed { checked: audit.checked, mismatches: audit.mismatches });
    }
    Ok(SweepTable::from_cells(cells, audit))
}

fn label_tag(label: &str) -> u64 {
    derive_seed(&label.bytes().map(u64::from).collect::<Vec<_>>())
}

/// Seed shared by every `eps_max` in one `(N, code)` row.
pub fn row_seed(master_seed: u64, tag: u64, n: usize, code: &str) -> u64 {
    derive_seed(&[master_seed, tag, n as u64, label_tag(code)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnencodedSweep {
    pub n_values: Vec<usize>,
    pub eps_values: Vec<f64>,
    pub trials: u64,
}

impl Default for UnencodedSweep {
    fn default() -> Self {
        UnencodedSweep {
            n_values: (3..=13).collect(),
            eps_values: eps_grid(20, 20),
            trials: DEFAULT_UNENCODED_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodedSweep {
    pub n: usize,
    pub codes: Vec<EncodingDescriptor>,
    pub eps_values: Vec<f64>,
    pub trials: u64,
    /// Also run the unencoded ladder at `eps_max / sqrt(K)` for every code.
    pub compare_rescaled: bool,
}

impl Default for EncodedSweep {
    fn default() -> Self {
        EncodedSweep {
            n: 13,
            codes: vec![
                EncodingDescriptor::grid(2, 2),
                EncodingDescriptor::grid(2, 3),
                EncodingDescriptor::grid(3, 3),
                EncodingDescriptor::grid(3, 4),
            ],
            eps_values: eps_grid(20, 20),
            trials: DEFAULT_ENCODED_TRIALS,
            compare_rescaled: true,
        }
    }
}

/// `i / denom` for `i = 1..=count`, computed by division so the values print
/// cleanly.
pub fn eps_grid(count: usize, denom: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / denom as f64).collect()
}

/// Settings shared by both sweep kinds, plus each sweep's axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub master_seed: u64,
    /// Position of the antiferromagnetic rung in every ladder.
    pub antiferro_rung: usize,
    /// Noise template; its `eps_max` is replaced by each axis value.
    pub noise: NoiseSpec,
    pub solver_policy: SolverPolicy,
    pub unencoded: UnencodedSweep,
    pub encoded: EncodedSweep,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            master_seed: 0,
            antiferro_rung: 0,
            noise: NoiseSpec::uniform(0.0),
            solver_policy: SolverPolicy::Auto,
            unencoded: UnencodedSweep::default(),
            encoded: EncodedSweep::default(),
        }
    }
}

fn eps_problems(name: &str, eps: &[f64], out: &mut Vec<String>) {
    if eps.is_empty() {
        out.push(format!("{name}.eps_values is empty"));
    }
    for &e in eps {
        if !(e.is_finite() && e >= 0.0) {
            out.push(format!("{name}.eps_values contains {e}"));
        }
    }
}

impl SweepConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.noise.validate() {
            out.push(format!("noise: {e}"));
        }
        let u = &self.unencoded;
        if u.n_values.is_empty() {
            out.push("unencoded.n_values is empty".into());
        }
        for &n in &u.n_values {
            if n <= self.antiferro_rung {
                out.push(format!("unencoded.n_values: ladder of {n} columns has no rung {}", self.antiferro_rung));
            }
        }
        eps_problems("unencoded", &u.eps_values, &mut out);
        if u.trials == 0 {
            out.push("unencoded.trials must be at least 1".into());
        }
        let e = &self.encoded;
        if e.n <= self.antiferro_rung {
            out.push(format!("encoded.n: ladder of {} columns has no rung {}", e.n, self.antiferro_rung));
        }
        if e.codes.is_empty() {
            out.push("encoded.codes is empty".into());
        }
        for (i, c) in e.codes.iter().enumerate() {
            if let Err(err) = c.build() {
                out.push(format!("encoded.codes[{i}]: {err}"));
            }
        }
        eps_problems("encoded", &e.eps_values, &mut out);
        if e.trials == 0 {
            out.push("encoded.trials must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }

    fn experiment(&self, n: usize, encoding: Option<EncodingDescriptor>, eps: f64, trials: u64, seed: u64) -> Result<Arc<Experiment>> {
        Ok(Arc::new(Experiment::new(ExperimentConfig {
            instance: InstanceDescriptor::Ladder { columns: n, antiferro_rung: self.antiferro_rung },
            noise: self.noise.with_eps(eps),
            encoding,
            trials,
            master_seed: seed,
            solver_policy: self.solver_policy,
        })?))
    }
}

/// Failure rates of unencoded ladders over the `N × eps_max` grid.
pub fn sweep_unencoded(cfg: &SweepConfig, threads: usize) -> Result<SweepTable> {
    cfg.validate()?;
    let u = &cfg.unencoded;
    let mut jobs = Vec::new();
    for &n in &u.n_values {
        let seed = row_seed(cfg.master_seed, TAG_UNENCODED, n, "none");
        for &eps in &u.eps_values {
            jobs.push(CellJob {
                exp: cfg.experiment(n, None, eps, u.trials, seed)?,
                n,
                k: 1,
                code: "none".into(),
                eps_max: eps,
                eps_nominal: eps,
            });
        }
    }
    run_cells(&jobs, threads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSweepResult {
    pub encoded: SweepTable,
    /// Unencoded ladder at `eps_max / sqrt(K)` for each code and `eps_max`.
    pub rescaled: Option<SweepTable>,
}

pub fn sweep_encoded(cfg: &SweepConfig, threads: usize) -> Result<EncodedSweepResult> {
    cfg.validate()?;
    let e = &cfg.encoded;
    let mut jobs = Vec::new();
    for code in &e.codes {
        let label = code.label();
        let seed = row_seed(cfg.master_seed, TAG_ENCODED, e.n, &label);
        for &eps in &e.eps_values {
            jobs.push(CellJob {
                exp: cfg.experiment(e.n, Some(code.clone()), eps, e.trials, seed)?,
                n: e.n,
                k: code.k(),
                code: label.clone(),
                eps_max: eps,
                eps_nominal: eps,
            });
        }
    }
    let encoded = run_cells(&jobs, threads)?;
    let rescaled = if e.compare_rescaled {
        let mut jobs = Vec::new();
        for code in &e.codes {
            let label = code.label();
            let seed = row_seed(cfg.master_seed, TAG_RESCALED, e.n, &label);
            let root_k = (code.k() as f64).sqrt();
            for &eps in &e.eps_values {
                jobs.push(CellJob {
                    exp: cfg.experiment(e.n, None, eps / root_k, e.trials, seed)?,
                    n: e.n,
                    k: code.k(),
                    code: format!("rescaled-{label}"),
                    eps_max: eps / root_k,
                    eps_nominal: eps,
                });
            }
        }
        Some(run_cells(&jobs, threads)?)
    } else {
        None
    };
    Ok(EncodedSweepResult { encoded, rescaled })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two points".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation between failure rate and `sqrt(N) eps_max` across cells.
pub fn collapse_statistic(table: &SweepTable) -> Result<f64> {
    if table.n_values.len() < 2 {
        return Err(Error::UndefinedCorrelation("table needs at least two N values".into()));
    }
    let x: Vec<f64> = table.cells.iter().map(|c| (c.n as f64).sqrt() * c.eps_max).collect();
    let y: Vec<f64> = table.cells.iter().map(|c| c.failure_rate).collect();
    spearman(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoOptions {
    pub columns: usize,
    pub antiferro_rung: usize,
    pub eps_max: f64,
    pub base_seed: u64,
    pub budget: u64,
    pub rescue: EncodingDescriptor,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            columns: 8,
            antiferro_rung: 0,
            eps_max: 0.3,
            base_seed: 0,
            budget: 10_000,
            rescue: EncodingDescriptor::grid(3, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub u: usize,
    pub v: usize,
    pub coupling: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescueReport {
    pub code: String,
    pub decoded: SpinConfig,
    pub in_code_space: bool,
    pub logical_energy: f64,
    pub failed: bool,
}

/// A noise draw that moves the ladder's ground state, and what the encoded
/// ladder does with the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub options: DemoOptions,
    pub ground_states: Vec<SpinConfig>,
    pub unperturbed_min: f64,
    pub trial_index: u64,
    /// Seeds tried before the reported one, including it.
    pub seeds_scanned: u64,
    /// Earlier failing seeds the encoding did not rescue.
    pub unrescued_seeds: Vec<u64>,
    pub error_model: ModelFile,
    pub perturbed_ground: SpinConfig,
    pub perturbed_value: f64,
    pub logical_energy: f64,
    /// Programmed couplings the perturbed ground state leaves unsatisfied.
    pub violated_intended: Vec<LinkReport>,
    /// Unprogrammed hardware edges whose error term the state satisfies.
    pub satisfied_unintended: Vec<LinkReport>,
    pub rescue: RescueReport,
}

/// All optima of `m` by enumeration.
fn ground_space(m: &IsingModel) -> Result<Vec<SpinConfig>> {
    let n = m.vertex_count();
    if n > BRUTE_LIMIT {
        return Err(Error::TooLarge { vertices: n, limit: BRUTE_LIMIT });
    }
    let best = solve_brute(m)?.value;
    Ok((0..1u64 << n)
        .map(|b| SpinConfig::from_bits(b, n))
        .filter(|s| m.energy(s).map(|e| e <= best + ENERGY_TOL).unwrap_or(false))
        .collect())
}

/// Scans trial indices from `base_seed` for a draw that makes the unencoded
/// ladder fail and that the encoding rescues.
pub fn demo_fig1(opts: &DemoOptions) -> Result<DemoReport> {
    let plain = Experiment::new(ExperimentConfig {
        instance: InstanceDescriptor::Ladder { columns: opts.columns, antiferro_rung: opts.antiferro_rung },
        noise: NoiseSpec::uniform(opts.eps_max),
        encoding: None,
        trials: opts.budget.max(1),
        master_seed: opts.base_seed,
        solver_policy: SolverPolicy::Auto,
    })?;
    let mut enc_cfg = plain.config.clone();
    enc_cfg.encoding = Some(opts.rescue.clone());
    let encoded = Experiment::new(enc_cfg)?;

    let mut unrescued = Vec::new();
    for t in 0..opts.budget {
        if !plain.run_trial(t)?.failed {
            continue;
        }
        let enc_rec = encoded.run_trial(t)?;
        if enc_rec.failed {
            unrescued.push(t);
            continue;
        }
        let m = plain.logical();
        let seed = TrialSeed::new(opts.base_seed, t);
        let error_model = draw_error_model(m, &plain.config.noise, seed);
        let perturbed = m.add(&error_model)?;
        let res = auto_solve(&perturbed)?;
        let s = &res.config;
        let link = |e: Edge, j: f64| LinkReport { u: e.lo, v: e.hi, coupling: j, error: error_model.coupling(e) };
        let sign = |e: Edge| f64::from(s.get(e.lo) * s.get(e.hi));
        let violated_intended = m
            .couplings()
            .filter(|&(e, j)| j * sign(e) > 0.0)
            .map(|(e, j)| link(e, j))
            .collect();
        let satisfied_unintended = m
            .graph()
            .edges()
            .iter()
            .filter(|&&e| m.coupling(e) == 0.0 && error_model.coupling(e) * sign(e) < 0.0)
            .map(|&e| link(e, 0.0))
            .collect();
        let enc_state = encoded.perturbed_model(t).and_then(|pm| auto_solve(&pm))?;
        let em = encoded.encoded().expect("encoded experiment");
        let d = decode(&enc_state.config, em.logical_vertices(), em.k())?;
        return Ok(DemoReport {
            options: opts.clone(),
            ground_states: ground_space(m)?,
            unperturbed_min: plain.unperturbed_min(),
            trial_index: t,
            seeds_scanned: t + 1,
            unrescued_seeds: unrescued,
            error_model: error_model.to_file(),
            perturbed_ground: s.clone(),
            perturbed_value: res.value,
            logical_energy: m.energy(s)?,
            violated_intended,
            satisfied_unintended,
            rescue: RescueReport {
                code: opts.rescue.label(),
                logical_energy: enc_rec.logical_energy_of_decode,
                decoded: d.logical,
                in_code_space: d.in_code_space,
                failed: enc_rec.failed,
            },
        });
    }
    Err(Error::SearchExhausted { first: opts.base_seed, scanned: opts.budget })
}

fn ladder_picture(s: &SpinConfig) -> String {
    let row = |off: usize| -> String {
        s.spins().iter().skip(off).step_by(2).map(|&x| if x > 0 { '+' } else { '-' }).collect()
    };
    format!("  top    {}\n  bottom {}\n", row(0), row(1))
}

impl DemoReport {
    pub fn render_text(&self) -> String {
        let o = &self.options;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}-column ladder, antiferromagnetic rung {}, noise uniform in [-{e}, {e}]",
            o.columns,
            o.antiferro_rung,
            e = o.eps_max
        );
        let _ = writeln!(out, "\nunperturbed ground states (E = {}):", self.unperturbed_min);
        for g in &self.ground_states {
            out.push_str(&ladder_picture(g));
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "failing draw: base seed {}, trial {} ({} seeds scanned)",
            o.base_seed, self.trial_index, self.seeds_scanned
        );
        let _ = writeln!(out, "perturbed ground state (perturbed E = {:.6}, logical E = {}):", self.perturbed_value, self.logical_energy);
        out.push_str(&ladder_picture(&self.perturbed_ground));
        let _ = writeln!(out, "violated intended links: {}", self.violated_intended.len());
        for l in &self.violated_intended {
            let _ = writeln!(out, "  ({}, {}) J = {} error = {:+.4}", l.u, l.v, l.coupling, l.error);
        }
        let _ = writeln!(out, "satisfied unintended links: {}", self.satisfied_unintended.len());
        for l in &self.satisfied_unintended {
            let _ = writeln!(out, "  ({}, {}) error = {:+.4}", l.u, l.v, l.error);
        }
        let r = &self.rescue;
        let _ = writeln!(
            out,
            "\nsame seed with {} encoding: decoded logical E = {}, in code space: {}, failed: {}",
            r.code, r.logical_energy, r.in_code_space, r.failed
        );
        out.push_str(&ladder_picture(&r.decoded));
        if !self.unrescued_seeds.is_empty() {
            let _ = writeln!(out, "earlier failing seeds not rescued: {:?}", self.unrescued_seeds);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sweep() -> SweepConfig {
        SweepConfig {
            master_seed: 11,
            unencoded: UnencodedSweep { n_values: vec![3, 5], eps_values: vec![0.0, 0.4, 0.8], trials: 40 },
            encoded: EncodedSweep {
                n: 4,
                codes: vec![EncodingDescriptor::grid(2, 2)],
                eps_values: vec![0.0, 0.5],
                trials: 20,
                compare_rescaled: true,
            },
            ..Default::default()
        }
    }

    fn ladder_cfg(eps: f64, encoding: Option<EncodingDescriptor>) -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceDescriptor::ladder(6),
            noise: NoiseSpec::uniform(eps),
            encoding,
            trials: 30,
            master_seed: 5,
            solver_policy: SolverPolicy::Auto,
        }
    }

    #[test]
    fn zero_noise_never_fails() {
        for enc in [None, Some(EncodingDescriptor::path(3))] {
            let exp = Experiment::new(ladder_cfg(0.0, enc)).unwrap();
            assert!(exp.run_all(2).unwrap().iter().all(|r| !r.failed));
        }
    }

    #[test]
    fn failure_matches_energy_gap() {
        let exp = Experiment::new(ladder_cfg(0.9, None)).unwrap();
        let recs = exp.run_all(1).unwrap();
        assert!(recs.iter().any(|r| r.failed));
        for r in &recs {
            assert_eq!(r.failed, r.logical_energy_of_decode > r.unperturbed_min + 1e-9);
            assert_eq!(r.in_code_space, None);
        }
    }

    #[test]
    fn identity_encoding_reproduces_unencoded_trials() {
        let a = Experiment::new(ladder_cfg(0.7, None)).unwrap().run_all(1).unwrap();
        let b = Experiment::new(ladder_cfg(0.7, Some(EncodingDescriptor::path(1)))).unwrap().run_all(1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.failed, y.failed);
            assert_eq!(x.perturbed_value, y.perturbed_value);
            assert_eq!(y.in_code_space, Some(true));
        }
    }

    #[test]
    fn refusal_carries_trial_context() {
        let mut cfg = ladder_cfg(0.3, None);
        cfg.instance = InstanceDescriptor::ladder(13);
        cfg.solver_policy = SolverPolicy::Forced(SolverId::Brute);
        let err = Experiment::new(cfg).unwrap().run_trial(4).unwrap_err();
        assert!(matches!(err, Error::Trial { trial: 4, .. }));
        assert!(err.is_refusal());
    }

    #[test]
    fn config_problems_are_enumerated() {
        let mut cfg = ladder_cfg(-1.0, Some(EncodingDescriptor { dims: vec![0], ..EncodingDescriptor::path(1) }));
        cfg.trials = 0;
        assert_eq!(cfg.problems().len(), 3);
        let text = r#"{"instance":{"builder":"ladder","columns":4},"noise":{"eps_max":0.1},"trials":3,"master_seed":1,"solver_policy":"frontier"}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.solver_policy, SolverPolicy::Forced(SolverId::Frontier));
        assert!(serde_json::from_str::<ExperimentConfig>(&text.replace("frontier", "magic")).is_err());
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let cfg = small_sweep();
        let a = sweep_unencoded(&cfg, 1).unwrap();
        let b = sweep_unencoded(&cfg, 3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.audit.checked >= a.cells.len());
        assert_eq!(a.audit.mismatches, 0);
        for c in a.cells.iter().filter(|c| c.eps_max == 0.0) {
            assert_eq!(c.failure_rate, 0.0);
        }
        for c in &a.cells {
            let p = c.failure_rate;
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(c.std_err, (p * (1.0 - p) / c.trials as f64).sqrt());
        }
        assert!(a.monotonicity_violations(0.0).is_empty());
    }

    #[test]
    fn encoded_sweep_pairs_rescaled_cells() {
        let r = sweep_encoded(&small_sweep(), 2).unwrap();
        let rescaled = r.rescaled.unwrap();
        assert_eq!(r.encoded.cells.len(), 2);
        assert_eq!(rescaled.cells.len(), 2);
        assert_eq!(rescaled.cells[1].eps_max, 0.25);
        assert_eq!(rescaled.cells[1].eps_nominal, 0.5);
        assert_eq!(r.encoded.cells[0].code_space_rate, 1.0);
        assert!(rescaled.to_csv_extended().contains("rescaled-grid2x2"));
    }

    #[test]
    fn csv_layout() {
        let t = sweep_unencoded(
            &SweepConfig {
                unencoded: UnencodedSweep { n_values: vec![3], eps_values: vec![0.0], trials: 1 },
                ..Default::default()
            },
            1,
        )
        .unwrap();
        assert_eq!(t.to_csv(), format!("{CSV_HEADER}\n3,0,1,0,0,1,1\n"));
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(spearman(&[1.0, 2.0], &[5.0, 5.0]), Err(Error::UndefinedCorrelation(_))));
        // Ties take the average rank: ranks (1.5, 1.5, 3) against (1, 2, 3).
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    fn synthetic(f: impl Fn(f64, f64) -> f64) -> SweepTable {
        let mut cells = Vec::new();
        for n in [3usize, 7, 30, 200] {
            for i in 1..=10 {
                let eps = i as f64 / 100.0;
                let p = f(n as f64, eps);
                cells.push(SweepCell {
                    n,
                    eps_max: eps,
                    k: 1,
                    code: "none".into(),
                    eps_nominal: eps,
                    trials: 1,
                    failures: 0,
                    failure_rate: p,
                    std_err: 0.0,
                    code_space_rate: 1.0,
                    failures_in_code_space: 0,
                    near_degenerate: 0,
                    mean_wall_time: 0.0,
                    seed: 0,
                });
            }
        }
        SweepTable::from_cells(cells, AuditReport::default())
    }

    #[test]
    fn collapse_statistic_on_synthetic_tables() {
        let exact = synthetic(|n, e| 1.0 - (-(n.sqrt() * e)).exp());
        assert!((collapse_statistic(&exact).unwrap() - 1.0).abs() < 1e-12);
        let linear = synthetic(|n, e| 1.0 - (-(n * e)).exp());
        assert!(collapse_statistic(&linear).unwrap() < 0.99);
        let flat = synthetic(|_, _| 0.0);
        assert!(matches!(collapse_statistic(&flat), Err(Error::UndefinedCorrelation(_))));
        let mut one_row = exact.clone();
        one_row.n_values.truncate(1);
        assert!(collapse_statistic(&one_row).is_err());
    }

    #[test]
    fn audit_detects_tampering() {
        let exp = Experiment::new(ladder_cfg(0.5, None)).unwrap();
        let mut recs = exp.run_all(1).unwrap();
        assert_eq!(audit_records(&exp, &recs, 1.0).unwrap(), AuditReport { checked: 30, mismatches: 0 });
        recs[3].perturbed_value += 0.5;
        assert_eq!(audit_records(&exp, &recs, 1.0).unwrap().mismatches, 1);
    }
}
