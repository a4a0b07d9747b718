//! Benchmark sweeps over generated instances.

mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;

pub use output::{emit_residual_plot, emit_trace_csv, residual_plot_svg, trace_csv, TRACE_HEADER};

use crate::algorithms::{
    best_response_gap, rcpi_delta_limit, run_ft, run_hk, run_pai, run_rcpi, run_vi, run_ws, SolveReport, SolverConfig,
    StepKind, Termination,
};
use crate::benchgen::{generate, Domain, GenSpec};
use crate::error::SolveError;
use crate::model::Model;

pub const SMALL_GAMMAS: [f64; 4] = [0.5, 0.75, 0.9, 0.99];
pub const LARGE_GAMMAS: [f64; 3] = [0.9, 0.99, 0.999];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Vi,
    Pai,
    Ft,
    Hk,
    Ws,
    Rcpi0,
    RcpiInf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] =
        [Algorithm::Vi, Algorithm::Pai, Algorithm::Ft, Algorithm::Hk, Algorithm::Ws, Algorithm::Rcpi0, Algorithm::RcpiInf];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Vi => "vi",
            Algorithm::Pai => "pai",
            Algorithm::Ft => "ft",
            Algorithm::Hk => "hk",
            Algorithm::Ws => "ws",
            Algorithm::Rcpi0 => "rcpi0",
            Algorithm::RcpiInf => "rcpi_inf",
        }
    }

    /// Runs the solver, filling in `m` for the RCPI variants.
    pub fn run(self, model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
        match self {
            Algorithm::Vi => run_vi(model, config, v0),
            Algorithm::Pai => run_pai(model, config, v0),
            Algorithm::Ft => run_ft(model, config, v0),
            Algorithm::Hk => run_hk(model, config, v0),
            Algorithm::Ws => run_ws(model, config, v0),
            Algorithm::Rcpi0 => run_rcpi(model, &config.clone().with_m(Some(0)), v0),
            Algorithm::RcpiInf => run_rcpi(model, &config.clone().with_m(None), v0),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vi" => Ok(Algorithm::Vi),
            "pai" => Ok(Algorithm::Pai),
            "ft" => Ok(Algorithm::Ft),
            "hk" => Ok(Algorithm::Hk),
            "ws" => Ok(Algorithm::Ws),
            "rcpi0" | "rcpi_0" => Ok(Algorithm::Rcpi0),
            "rcpi" | "rcpi_inf" | "rcpiinf" => Ok(Algorithm::RcpiInf),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub specs: Vec<GenSpec>,
    pub gammas: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub delta: f64,
    pub time_cap: Duration,
    pub out_dir: Option<PathBuf>,
    pub audit: bool,
    /// Worker threads for the sweep; 0 uses the global pool.
    pub threads: usize,
}

fn geometric(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1).max(1) as f64;
            ((lo as f64) * (hi as f64 / lo as f64).powf(t)).round() as usize
        })
        .collect();
    v.dedup();
    v
}

impl BenchPlan {
    fn with_sizes(sizes: &[(Domain, Vec<usize>)], seeds: u64, gammas: &[f64]) -> Self {
        let specs = sizes
            .iter()
            .flat_map(|(d, ss)| ss.iter().flat_map(move |&s| (0..seeds).map(move |seed| GenSpec::new(*d, s, 0.9, seed))))
            .collect();
        Self {
            specs,
            gammas: gammas.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            epsilon: 1e-3,
            delta: 1e-9,
            time_cap: Duration::from_secs(30),
            out_dir: None,
            audit: false,
            threads: 0,
        }
    }

    /// Minutes-scale sweep on the small problem sets.
    pub fn desk() -> Self {
        Self::with_sizes(
            &[
                (Domain::RandomMg, vec![20, 30, 45]),
                (Domain::GamblersRuin, vec![10, 15, 22]),
                (Domain::Gridworld, vec![2, 4, 7]),
                (Domain::Inventory, vec![4, 9, 20]),
            ],
            1,
            &SMALL_GAMMAS,
        )
    }

    /// Small and large problem sets at full size, five sizes per range.
    pub fn paper_scale() -> Self {
        let small = Self::with_sizes(
            &[
                (Domain::RandomMg, geometric(20, 100, 5)),
                (Domain::GamblersRuin, geometric(10, 50, 5)),
                (Domain::Gridworld, geometric(2, 10, 5)),
                (Domain::Inventory, geometric(4, 20, 5)),
            ],
            1,
            &SMALL_GAMMAS,
        );
        let mut plan = small;
        plan.time_cap = Duration::from_secs(600);
        plan.specs.extend(
            [
                (Domain::RandomMg, geometric(200, 1000, 5)),
                (Domain::GamblersRuin, geometric(200, 1000, 5)),
                (Domain::Gridworld, geometric(4, 20, 5)),
                (Domain::Inventory, geometric(40, 200, 5)),
            ]
            .iter()
            .flat_map(|(d, ss)| ss.iter().map(move |&s| GenSpec::new(*d, s, 0.99, 1000))),
        );
        plan
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.specs.is_empty() || self.algorithms.is_empty() || self.gammas.is_empty() {
            return Err("plan needs at least one instance, one gamma and one algorithm".into());
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(format!("gamma {g} outside (0,1)"));
        }
        Ok(())
    }

    /// Solver settings for one cell. δ is lowered where RCPI's hypothesis needs it.
    pub fn config_for(&self, alg: Algorithm, gamma: f64) -> SolverConfig {
        let cap = if alg == Algorithm::Vi { self.time_cap * 4 } else { self.time_cap };
        SolverConfig {
            epsilon: self.epsilon,
            delta: self.delta.min(0.5 * rcpi_delta_limit(gamma, self.epsilon)),
            time_cap: Some(cap),
            ..SolverConfig::default()
        }
    }
}

/// Outcome of one (instance, γ, algorithm) cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub instance: String,
    pub domain: Domain,
    pub size: usize,
    pub n_states: usize,
    pub gamma: f64,
    pub algorithm: Algorithm,
    pub result: Result<RunStats, String>,
}

#[derive(Debug, Clone)]
pub struct RunStats {
    pub termination: Termination,
    pub iterations: usize,
    pub backups: usize,
    pub evaluations: usize,
    pub elapsed_s: f64,
    pub certified_epsilon: f64,
    pub delta: f64,
    pub r_max: f64,
    pub max_recoveries: usize,
    /// `ψ₂²` increased somewhere along the trace.
    pub l2_nonmonotone: bool,
    pub audit_gaps: Option<(f64, f64)>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub domain: Domain,
    pub gamma: f64,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub median_runtime_s: f64,
    pub median_backups: f64,
    pub median_evaluations: f64,
    pub tallies: BTreeMap<&'static str, usize>,
    pub errors: usize,
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub records: Vec<RunRecord>,
    pub rows: Vec<SummaryRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

const TALLY_KEYS: [Termination; 5] = [
    Termination::Converged,
    Termination::NoDescentStep,
    Termination::IterCap,
    Termination::TimeCap,
    Termination::CycleDetected,
];

impl BenchSummary {
    fn from_records(records: Vec<RunRecord>) -> Self {
        let mut groups: BTreeMap<(Domain, u64, Algorithm), Vec<&RunRecord>> = BTreeMap::new();
        for r in &records {
            groups.entry((r.domain, r.gamma.to_bits(), r.algorithm)).or_default().push(r);
        }
        let rows = groups
            .into_iter()
            .map(|((domain, g, algorithm), rs)| {
                let ok: Vec<&RunStats> = rs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
                let mut tallies: BTreeMap<&'static str, usize> = TALLY_KEYS.iter().map(|t| (t.as_str(), 0)).collect();
                for s in &ok {
                    *tallies.get_mut(s.termination.as_str()).expect("known key") += 1;
                }
                SummaryRow {
                    domain,
                    gamma: f64::from_bits(g),
                    algorithm,
                    runs: rs.len(),
                    median_runtime_s: median(ok.iter().map(|s| s.elapsed_s).collect()),
                    median_backups: median(ok.iter().map(|s| s.backups as f64).collect()),
                    median_evaluations: median(ok.iter().map(|s| s.evaluations as f64).collect()),
                    tallies,
                    errors: rs.len() - ok.len(),
                }
            })
            .collect();
        Self { records, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,gamma,algorithm,runs,median_runtime_s,median_backups,median_evaluations");
        for t in TALLY_KEYS {
            out.push(',');
            out.push_str(t.as_str());
        }
        out.push_str(",errors\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{}",
                r.domain, r.gamma, r.algorithm, r.runs, r.median_runtime_s, r.median_backups, r.median_evaluations
            ));
            for t in TALLY_KEYS {
                out.push_str(&format!(",{}", r.tallies[t.as_str()]));
            }
            out.push_str(&format!(",{}\n", r.errors));
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "instance,domain,size,states,gamma,algorithm,termination,iterations,backups,evaluations,elapsed_s,certified_epsilon,max_recoveries,gap_max,gap_min,error\n",
        );
        for r in &self.records {
            let head = format!("{},{},{},{},{},{}", r.instance, r.domain, r.size, r.n_states, r.gamma, r.algorithm);
            match &r.result {
                Ok(s) => {
                    let (gmax, gmin) = s.audit_gaps.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
                    out.push_str(&format!(
                        "{head},{},{},{},{},{:.6},{:e},{},{gmax},{gmin},\n",
                        s.termination, s.iterations, s.backups, s.evaluations, s.elapsed_s, s.certified_epsilon, s.max_recoveries
                    ));
                }
                Err(e) => out.push_str(&format!("{head},error,,,,,,,,,\"{}\"\n", e.replace('"', "'"))),
            }
        }
        out
    }
}

fn run_cell(plan: &BenchPlan, spec: &GenSpec, model: &Model, alg: Algorithm) -> RunRecord {
    let gamma = model.gamma();
    let config = plan.config_for(alg, gamma);
    let v0 = vec![0.0; model.n_states()];
    let result = alg.run(model, &config, &v0).map_err(|e| e.to_string()).and_then(|report| {
        let max_recoveries = report
            .trace
            .iter()
            .map(|t| if let StepKind::Evaluation { recoveries } = t.step_kind { recoveries } else { 0 })
            .max()
            .unwrap_or(0);
        let l2_nonmonotone = report.trace.windows(2).any(|w| w[1].residual_l2_sq > w[0].residual_l2_sq);
        let audit_gaps = if plan.audit && report.converged() {
            Some(best_response_gap(model, &report.final_policies).map_err(|e| e.to_string())?)
        } else {
            None
        };
        Ok(RunStats {
            termination: report.termination,
            iterations: report.iterations,
            backups: report.backups(),
            evaluations: report.evaluations(),
            elapsed_s: report.elapsed.as_secs_f64(),
            certified_epsilon: report.certified_epsilon,
            delta: report.delta,
            r_max: model.r_max(),
            max_recoveries,
            l2_nonmonotone,
            audit_gaps,
            report,
        })
    });
    RunRecord {
        instance: spec.label(),
        domain: spec.domain,
        size: spec.size,
        n_states: model.n_states(),
        gamma,
        algorithm: alg,
        result,
    }
}

fn run_file_stem(r: &RunRecord) -> String {
    format!("{}-g{}", r.instance, r.gamma)
}

/// Runs every (instance, γ, algorithm) cell. Solver failures are recorded in
/// the summary; only output errors abort.
pub fn run_bench(plan: &BenchPlan) -> io::Result<BenchSummary> {
    plan.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let cells: Vec<(GenSpec, Algorithm)> = plan
        .specs
        .iter()
        .flat_map(|s| plan.gammas.iter().map(move |&g| GenSpec { gamma: g, ..s.clone() }))
        .flat_map(|s| plan.algorithms.iter().map(move |&a| (s.clone(), a)))
        .collect();
    let work = || -> Vec<RunRecord> {
        cells
            .par_iter()
            .map(|(spec, alg)| {
                let model = generate(spec);
                run_cell(plan, spec, &model, *alg)
            })
            .collect()
    };
    let records = if plan.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(plan.threads)
            .build()
            .map_err(|e| io::Error::other(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let summary = BenchSummary::from_records(records);
    if let Some(dir) = &plan.out_dir {
        write_outputs(&summary, dir)?;
    }
    Ok(summary)
}

fn write_outputs(summary: &BenchSummary, dir: &std::path::Path) -> io::Result<()> {
    output::write_creating_dirs(&dir.join("summary.csv"), &summary.to_csv())?;
    output::write_creating_dirs(&dir.join("runs.csv"), &summary.runs_csv())?;
    let mut by_instance: BTreeMap<String, Vec<&SolveReport>> = BTreeMap::new();
    for r in &summary.records {
        if let Ok(s) = &r.result {
            let stem = run_file_stem(r);
            emit_trace_csv(&s.report, dir.join("traces").join(format!("{stem}-{}.csv", r.algorithm)))?;
            by_instance.entry(stem).or_default().push(&s.report);
        }
    }
    for (stem, reports) in by_instance {
        emit_residual_plot(&reports, dir.join("plots").join(format!("{stem}.svg")))?;
    }
    Ok(())
}
