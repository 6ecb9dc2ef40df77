//! Batch commands: `validate`, `build`, `eval`, `verify`.
//!
//! Each command returns its report as text; the binary prints it and maps
//! the outcome to an exit status (0 success, 1 failed checks, 2 error).

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::assignment::{condition_report, ConditionReport, Role};
use crate::config::{Pipeline, RunConfig};
use crate::error::{Error, Result};
use crate::kernel::{write_grid_csv, write_pgm};
use crate::operator::{gamma_hs_summary, validate_null_sequence_default, HsSummary, NullSequenceReport};
use crate::schmidt::{nuclearity_report, NuclearityReport};
use crate::verify::{
    check_carleman, check_conditions, check_equivalence, check_hs_bound, check_orthonormality, check_smoothness,
    check_supnorm_table, check_vanishing, CarlemanParams, EquivalenceParams, OrthoParams, SmoothnessParams,
    VanishingParams, VerifyReport,
};

pub const DEFAULT_GRID: &str = "-8:8:257,-8:8:257";

#[derive(Debug, Parser)]
#[command(name = "carleman", version, about = "Smooth Carleman kernels for truncated closed operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Seed for randomized checks; overrides `seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the operator description.
    Validate,
    /// Build the kernel model and write it with the assignment report.
    Build,
    /// Evaluate the kernel (or a derivative) on a grid.
    Eval {
        /// "s0:s1:ns,t0:t1:nt"
        #[arg(long, default_value = DEFAULT_GRID, allow_hyphen_values = true)]
        grid: GridSpec,
        /// Derivative orders "i,j".
        #[arg(long, default_value = "0,0")]
        deriv: DerivSpec,
        /// Also write a graymap of |K|.
        #[arg(long)]
        heatmap: bool,
    },
    /// Run the verification suite.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn nodes(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|n| self.start + (self.end - self.start) * n as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub s: AxisSpec,
    pub t: AxisSpec,
}

fn parse_axis(text: &str) -> Result<AxisSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    let err = || Error::InvalidParameter(format!("axis `{text}` is not start:end:count"));
    if parts.len() != 3 {
        return Err(err());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let end: f64 = parts[1].trim().parse().map_err(|_| err())?;
    let count: usize = parts[2].trim().parse().map_err(|_| err())?;
    if count == 0 || !start.is_finite() || !end.is_finite() {
        return Err(err());
    }
    Ok(AxisSpec { start, end, count })
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (s, t) = text
            .split_once(',')
            .ok_or_else(|| Error::InvalidParameter(format!("grid `{text}` is not s0:s1:ns,t0:t1:nt")))?;
        Ok(Self { s: parse_axis(s)?, t: parse_axis(t)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivSpec {
    pub i: usize,
    pub j: usize,
}

impl FromStr for DerivSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let err = || Error::InvalidParameter(format!("derivative `{text}` is not i,j"));
        let (i, j) = text.split_once(',').ok_or_else(err)?;
        Ok(Self { i: i.trim().parse().map_err(|_| err())?, j: j.trim().parse().map_err(|_| err())? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub report: String,
    pub success: bool,
}

fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::Config(e.to_string()))
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    command: &'static str,
    pass: bool,
    dim: usize,
    null_count: usize,
    perp_count: usize,
    warnings: &'a [String],
    null_sequence: &'a NullSequenceReport,
    hilbert_schmidt: &'a HsSummary,
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<CommandOutput> {
    let spec = cfg.operator.build()?;
    let null = validate_null_sequence_default(&spec)?;
    let hs = gamma_hs_summary(&spec);
    let pass = null.pass && hs.total <= hs.bound + 1e-12;
    let report = to_toml(&ValidateReport {
        command: "validate",
        pass,
        dim: spec.dim(),
        null_count: spec.null_indices().len(),
        perp_count: spec.perp_indices().len(),
        warnings: spec.warnings(),
        null_sequence: &null,
        hilbert_schmidt: &hs,
    })?;
    Ok(CommandOutput { report, success: pass })
}

#[derive(Serialize)]
struct PairRow {
    op_index: usize,
    role: Role,
    role_pos: usize,
    frame_pos: usize,
    j: i32,
    k: i64,
    d: f64,
}

#[derive(Serialize)]
struct BuildReport {
    command: &'static str,
    dim: usize,
    schmidt_rank: usize,
    p_terms: usize,
    f_terms: usize,
    i_max: usize,
    a_constants: Vec<f64>,
    nk: Vec<usize>,
    x_index: Vec<usize>,
    sumrk_targets_met: bool,
    pairs: Vec<PairRow>,
    nuclearity: NuclearityReport,
    conditions: ConditionReport,
}

pub fn cmd_build(cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput> {
    let p = Pipeline::build(cfg)?;
    let a = &p.assignment;
    let conditions = condition_report(a, a.i_max)?;
    let pairs = a
        .pairs
        .iter()
        .map(|pr| {
            let e = a.enumeration.entries[pr.enum_index];
            PairRow {
                op_index: pr.op_index,
                role: pr.role,
                role_pos: pr.role_pos,
                frame_pos: a.op_to_frame[pr.op_index],
                j: e.j,
                k: e.k,
                d: e.d,
            }
        })
        .collect();
    let (p_terms, f_terms) = p.model.truncation();
    let met = conditions.sumrk_targets_met();
    let report = to_toml(&BuildReport {
        command: "build",
        dim: p.spec.dim(),
        schmidt_rank: p.schmidt.rank(),
        p_terms,
        f_terms,
        i_max: a.i_max,
        a_constants: a.a_constants.clone(),
        nk: a.nk.clone(),
        x_index: a.x_index.clone(),
        sumrk_targets_met: met,
        pairs,
        nuclearity: nuclearity_report(&p.schmidt),
        conditions,
    })?;
    write_file(out_dir, "kernel.toml", p.model.to_toml().as_bytes())?;
    write_file(out_dir, "assignment.toml", report.as_bytes())?;
    let summary = format!(
        "built kernel: dim = {}, {p_terms} P terms, {f_terms} F terms\nwrote {}\nwrote {}\n",
        p.spec.dim(),
        out_dir.join("kernel.toml").display(),
        out_dir.join("assignment.toml").display()
    );
    Ok(CommandOutput { report: summary, success: met })
}

pub fn cmd_eval(cfg: &RunConfig, grid: &GridSpec, deriv: DerivSpec, out_dir: &Path, heatmap: bool) -> Result<CommandOutput> {
    let p = Pipeline::build(cfg)?;
    let s = grid.s.nodes();
    let t = grid.t.nodes();
    let g = p.model.grid(deriv.i, deriv.j, &s, &t)?;
    let residual = p.model.residual(deriv.i, deriv.j)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("grid.csv");
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    write_grid_csv(&mut w, &s, &t, &g, residual)?;
    drop(w);
    let mut report = format!(
        "evaluated d^({},{}) K on {} x {} grid; max |K| = {:.6e}\nwrote {}\n",
        deriv.i,
        deriv.j,
        s.len(),
        t.len(),
        g.max_abs().0,
        csv_path.display()
    );
    if heatmap || cfg.output.heatmap {
        let pgm_path = out_dir.join("heatmap.pgm");
        let mut w = BufWriter::new(fs::File::create(&pgm_path)?);
        write_pgm(&mut w, &g)?;
        report.push_str(&format!("wrote {}\n", pgm_path.display()));
    }
    Ok(CommandOutput { report, success: true })
}

/// The full check suite for one pipeline.
pub fn verify_suite(p: &Pipeline, cfg: &RunConfig) -> Result<VerifyReport> {
    let v = &cfg.verify;
    let w = p.model.wavelet();
    let q = cfg.quadrature;
    let checks = vec![
        check_hs_bound(&p.aux),
        check_supnorm_table(&p.assignment, w, v.supnorm_order.min(w.max_order()))?,
        check_conditions(&p.assignment, p.assignment.i_max)?,
        check_orthonormality(w, &p.model.frame, &OrthoParams { tol: v.orthonormality_tol, ..Default::default() }),
        check_equivalence(
            &p.model,
            &p.spec,
            &EquivalenceParams {
                m_test: v.m_test,
                tol: v.equivalence_tol,
                scaled_horizon: q.scaled_horizon,
                nodes_per_panel: q.nodes_per_panel,
            },
        )?,
        check_smoothness(
            &p.model,
            &SmoothnessParams {
                points: v.smoothness_points,
                tol: v.smoothness_tol,
                seed: cfg.seed,
                order_cap: 2.min(p.model.max_order),
                ..Default::default()
            },
        )?,
        check_vanishing(
            &p.model,
            &VanishingParams { radii: v.radii.clone(), threshold: v.vanishing_threshold, ..Default::default() },
        )?,
        check_carleman(
            &p.model,
            &CarlemanParams {
                samples: v.carleman_samples,
                tol: v.carleman_tol,
                seed: cfg.seed.wrapping_add(1),
                scaled_horizon: q.scaled_horizon,
                nodes_per_panel: q.nodes_per_panel,
                ..Default::default()
            },
        )?,
    ];
    Ok(VerifyReport { checks })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = Pipeline::build(cfg)?;
    let report = verify_suite(&p, cfg)?;
    Ok(CommandOutput { report: report.to_text(), success: report.all_pass() })
}

/// Parses arguments, runs one command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.report);
            if out.success {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(cli: &Cli) -> Result<CommandOutput> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let out = match &cli.command {
        Command::Validate => cmd_validate(&cfg)?,
        Command::Build => cmd_build(&cfg, &out_dir)?,
        Command::Eval { grid, deriv, heatmap } => cmd_eval(&cfg, grid, *deriv, &out_dir, *heatmap)?,
        Command::Verify => cmd_verify(&cfg)?,
    };
    if cli.out.is_some() {
        match cli.command {
            Command::Validate => {
                write_file(&out_dir, "validate.toml", out.report.as_bytes())?;
            }
            Command::Verify => {
                write_file(&out_dir, "verify.txt", out.report.as_bytes())?;
            }
            _ => {}
        }
    }
    Ok(out)
}
