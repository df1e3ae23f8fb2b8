//! Command orchestration: load the problem, run one command, write artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use lagphase::phase::choose_a;
use lagphase::report;
use lagphase::solver::{continuity_solve, verify_subsolution};
use lagphase::verify::{run_all_suites, suite_hessian_cone, suite_solution, DEFAULT_SEED};
use lagphase::{GridField, NewtonConfig, ProblemSpec, SolveError, SolveReport, SuiteReport};
use serde::Serialize;

use crate::problem::{parse_problem_file, Problem, ProblemError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

pub const REPORT_FILE: &str = "report.json";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const MARGIN_FILE: &str = "margin.csv";
pub const FORWARD_FILE: &str = "forward.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Continuity-method solve followed by post-solve verification.
    Solve,
    /// Check `F(D²ū) ≥ h` and `ū = φ` on the boundary.
    VerifySubsolution,
    /// Cone facts on the Hessian spectra of `ū` (or of `--field`).
    CheckCone,
    /// Every library property suite at default sample counts.
    Suites,
    /// Evaluate `F(D²u)` on the field given by `--field`.
    Forward,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::VerifySubsolution => "verify-subsolution",
            Command::CheckCone => "check-cone",
            Command::Suites => "suites",
            Command::Forward => "forward",
        }
    }

    fn needs_spec(self) -> bool {
        self != Command::Suites
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub spec_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub newton: NewtonConfig,
    pub seed: u64,
    /// Input field for `forward` and `check-cone`.
    pub field_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            command,
            spec_path: None,
            output_dir: output_dir.into(),
            newton: NewtonConfig::default(),
            seed: DEFAULT_SEED,
            field_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.newton.validate()?;
        if self.command.needs_spec() {
            match &self.spec_path {
                None => return Err(format!("command {} requires --spec", self.command.name())),
                Some(p) if !p.is_file() => return Err(format!("spec file {} does not exist", p.display())),
                Some(_) => {}
            }
        }
        if self.command == Command::Forward && self.field_path.is_none() {
            return Err("command forward requires --field".into());
        }
        if let Some(p) = &self.field_path {
            if !p.is_file() {
                return Err(format!("field file {} does not exist", p.display()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    VerificationFailed,
    SolverError,
    ValidationError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::VerificationFailed | Status::SolverError => EXIT_FAILURE,
            Status::ValidationError => EXIT_INVALID,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemSummary {
    pub setting: String,
    pub dim: usize,
    pub resolution: usize,
    #[serde(serialize_with = "report::reals")]
    pub lower: Vec<f64>,
    #[serde(serialize_with = "report::reals")]
    pub upper: Vec<f64>,
    #[serde(serialize_with = "report::real")]
    pub delta: f64,
    /// `(n−2)π/2 + δ`.
    #[serde(serialize_with = "report::real")]
    pub band_threshold: f64,
    /// `nπ/2`.
    #[serde(serialize_with = "report::real")]
    pub band_ceiling: f64,
    #[serde(rename = "A", serialize_with = "report::real")]
    pub a: f64,
}

impl ProblemSummary {
    fn of(spec: &ProblemSpec) -> Self {
        let d = spec.domain();
        let band = spec.band();
        Self {
            setting: spec.setting().name().to_string(),
            dim: d.dim(),
            resolution: d.resolution(),
            lower: d.lower().to_vec(),
            upper: d.upper().to_vec(),
            delta: spec.delta(),
            band_threshold: band.threshold(),
            band_ceiling: band.ceiling(),
            a: choose_a(&band),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsolutionSummary {
    pub pass: bool,
    pub boundary_exact: bool,
    /// `min (F(D²ū) − h)` over interior nodes.
    #[serde(serialize_with = "report::real")]
    pub margin: f64,
    pub worst_node: Option<String>,
    pub margin_field: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ForwardSummary {
    #[serde(serialize_with = "report::real")]
    pub min: f64,
    #[serde(serialize_with = "report::real")]
    pub max: f64,
    pub field: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    #[serde(serialize_with = "report::real")]
    pub parse: f64,
    #[serde(serialize_with = "report::real")]
    pub command: f64,
    #[serde(serialize_with = "report::real")]
    pub total: f64,
}

/// Structured run report. Every key is always present; absent sections are `null`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<String>,
    pub seed: u64,
    pub newton: NewtonConfig,
    pub problem: Option<ProblemSummary>,
    pub solve: Option<SolveReport>,
    pub subsolution: Option<SubsolutionSummary>,
    pub cone: Option<SuiteReport>,
    pub forward: Option<ForwardSummary>,
    pub suites: Option<Vec<SuiteReport>>,
    pub artifacts: Vec<String>,
    pub timings: Timings,
}

impl RunReport {
    fn new(config: &RunConfig) -> Self {
        Self {
            command: config.command,
            status: Status::Ok,
            exit_code: EXIT_OK,
            error: None,
            seed: config.seed,
            newton: config.newton,
            problem: None,
            solve: None,
            subsolution: None,
            cone: None,
            forward: None,
            suites: None,
            artifacts: Vec::new(),
            timings: Timings::default(),
        }
    }

    fn set(&mut self, status: Status, error: Option<String>) {
        self.status = status;
        self.exit_code = status.exit_code();
        self.error = error;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Solver(String),
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Failure::Solver(e.to_string())
    }
}

impl From<lagphase::GridError> for Failure {
    fn from(e: lagphase::GridError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

/// Runs one command, writes `report.json` and the command's artifacts, and
/// returns the report. The exit code is `report.exit_code`.
pub fn run(config: &RunConfig) -> RunReport {
    let started = Instant::now();
    let mut report = RunReport::new(config);
    let result = config
        .validate()
        .map_err(Failure::Invalid)
        .and_then(|()| execute(config, &mut report, started));
    match result {
        Ok(status) => report.set(status, None),
        Err(Failure::Invalid(msg)) => report.set(Status::ValidationError, Some(msg)),
        Err(Failure::Solver(msg)) => report.set(Status::SolverError, Some(msg)),
    }
    report.timings.total = started.elapsed().as_secs_f64();
    if let Err(e) = write_report(&config.output_dir, &report) {
        report.set(Status::ValidationError, Some(format!("cannot write report: {e}")));
    }
    report
}

fn write_report(dir: &Path, report: &RunReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join(REPORT_FILE))?);
    f.write_all(report.to_json().as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()
}

fn write_field(dir: &Path, name: &str, field: &GridField, report: &mut RunReport) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Invalid(format!("cannot write {name}: {e}"));
    std::fs::create_dir_all(dir).map_err(io)?;
    let f = File::create(dir.join(name)).map_err(io)?;
    field.write_csv(BufWriter::new(f))?;
    report.artifacts.push(name.to_string());
    Ok(())
}

fn read_field(path: &Path, spec: &ProblemSpec) -> Result<GridField, Failure> {
    let f = File::open(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    GridField::read_csv(spec.domain(), BufReader::new(f))
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn execute(config: &RunConfig, report: &mut RunReport, started: Instant) -> Result<Status, Failure> {
    let problem: Option<Problem> = match (&config.spec_path, config.command.needs_spec()) {
        (Some(p), _) => Some(parse_problem_file(p)?),
        (None, false) => None,
        (None, true) => unreachable!("validated"),
    };
    report.problem = problem.as_ref().map(|p| ProblemSummary::of(&p.spec));
    report.timings.parse = started.elapsed().as_secs_f64();
    let command_started = Instant::now();
    let status = match (config.command, problem) {
        (Command::Suites, _) => suites(config, report)?,
        (cmd, Some(p)) => match cmd {
            Command::Solve => solve(config, &p.spec, report)?,
            Command::VerifySubsolution => subsolution(config, &p.spec, report)?,
            Command::CheckCone => check_cone(config, &p.spec, report)?,
            Command::Forward => forward(config, &p.spec, report)?,
            Command::Suites => unreachable!(),
        },
        (_, None) => unreachable!("validated"),
    };
    report.timings.command = command_started.elapsed().as_secs_f64();
    Ok(status)
}

fn verdict(pass: bool) -> Status {
    if pass {
        Status::Ok
    } else {
        Status::VerificationFailed
    }
}

fn solve(config: &RunConfig, spec: &ProblemSpec, report: &mut RunReport) -> Result<Status, Failure> {
    let (u, mut solve) = continuity_solve(spec, &config.newton)?;
    let check = suite_solution(spec, &u, &config.newton)?;
    let pass = check.pass;
    solve.verification = Some(check);
    report.solve = Some(solve);
    write_field(&config.output_dir, SOLUTION_FILE, &u, report)?;
    Ok(verdict(pass))
}

fn subsolution(config: &RunConfig, spec: &ProblemSpec, report: &mut RunReport) -> Result<Status, Failure> {
    let v = verify_subsolution(spec)?;
    write_field(&config.output_dir, MARGIN_FILE, &v.margin, report)?;
    report.subsolution = Some(SubsolutionSummary {
        pass: v.pass,
        boundary_exact: v.boundary_exact,
        margin: v.worst_margin,
        worst_node: v.worst_node.map(|p| spec.domain().describe_node(p)),
        margin_field: MARGIN_FILE.to_string(),
    });
    Ok(verdict(v.pass))
}

fn check_cone(config: &RunConfig, spec: &ProblemSpec, report: &mut RunReport) -> Result<Status, Failure> {
    let target = match &config.field_path {
        Some(path) => {
            let u = read_field(path, spec)?;
            ProblemSpec::new(
                spec.domain().clone(),
                *spec.setting(),
                spec.h().clone(),
                u.clone(),
                u,
                spec.delta(),
            )?
        }
        None => spec.clone(),
    };
    let suite = suite_hessian_cone(&target)?;
    let pass = suite.pass;
    report.cone = Some(suite);
    Ok(verdict(pass))
}

fn forward(config: &RunConfig, spec: &ProblemSpec, report: &mut RunReport) -> Result<Status, Failure> {
    let path = config.field_path.as_deref().expect("validated");
    let u = read_field(path, spec)?;
    let f = lagphase::grid::eval_operator_field(spec, &u)?;
    let (min, max) = f
        .values()
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    write_field(&config.output_dir, FORWARD_FILE, &f, report)?;
    report.forward = Some(ForwardSummary {
        min,
        max,
        field: FORWARD_FILE.to_string(),
    });
    Ok(Status::Ok)
}

fn suites(config: &RunConfig, report: &mut RunReport) -> Result<Status, Failure> {
    let reports = run_all_suites(config.seed).map_err(|e| Failure::Solver(e.to_string()))?;
    let pass = reports.iter().all(|r| r.pass);
    report.suites = Some(reports);
    Ok(verdict(pass))
}
