//! Command-line front end: argument parsing, run orchestration, and the
//! on-disk output formats.
//!
//! Five subcommands cover the workflow: `simulate` runs one config (with
//! optional checkpoint resume), `sweep` re-runs it across a parameter axis,
//! `bounds` evaluates the closed-form existence horizons, and the two
//! `verify-*` commands re-measure the kernel-positivity and inequality
//! corpora. Exit codes are part of the interface: 0 for success, 1 for any
//! validation or I/O failure, 2 when a run ends in a suspected blow-up
//! (monitor fired or finiteness lost).
//!
//! Environment overrides are deliberately minimal: `FJMGT_OUT_DIR` redirects
//! all file output, `FJMGT_WORKERS` sizes the worker pool. Everything else
//! lives in the config so experiments stay diffable.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array3};

use crate::bounds::{bounds_curve, t0, t_star, BoundsQuery, CProfile};
use crate::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::config::{
    initial_coefficients, parse_config, physics_hash, steps_for, OutputFormat, SimulationConfig,
};
use crate::diagnostics::{
    monitor_verdict, record_from_sample, verify_inequalities, DiagnosticsRecord,
    DissipationAccumulator,
};
use crate::dynamics::{
    drive, run, PhysicalParams, RunConfig, Sample, SampleVerdict, Stepper, Termination,
};
use crate::kernel::{coercivity_corpus, KernelKind, KernelSpec};
use crate::spectral::{
    assemble_operators, eigenpairs, load_or_assemble_tensor, sobolev_norm, SpectralBasis,
};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "fjmgt",
    version,
    about = "Spectral simulator and bound toolkit for a third-order damped wave model \
             with fractional memory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one simulation from a TOML config; writes the diagnostics stream,
    /// a status file, and (when enabled) a resumable checkpoint.
    Simulate {
        /// Path to the TOML config.
        #[arg(long)]
        config: PathBuf,
        /// Continue from the checkpoint in the output directory instead of
        /// starting over; new records are appended to the existing stream.
        #[arg(long)]
        resume: bool,
    },
    /// Re-run one config across a list of values on a single parameter axis;
    /// writes one summary row per value, ordered by value.
    Sweep {
        /// Path to the baseline TOML config.
        #[arg(long)]
        config: PathBuf,
        /// Which parameter the values replace.
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated list of parameter values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Evaluate the closed-form existence horizons for given initial-data
    /// size and growth-constant profile.
    Bounds {
        /// Initial-data size N0.
        #[arg(long)]
        n0: f64,
        /// Scale relating N0 to the comparison ODE's initial value.
        #[arg(long, default_value_t = 1.0)]
        z0_scale: f64,
        /// Growth constant (the value at t = 0 for the affine profile).
        #[arg(long)]
        c0: f64,
        /// Constant profile C, or affine profile C·(1+t).
        #[arg(long, value_enum, default_value_t = ProfileArg::Const)]
        profile: ProfileArg,
        /// Largest horizon on the tabulated curve.
        #[arg(long, default_value_t = 2.0)]
        t_max: f64,
        /// Number of points on the tabulated curve.
        #[arg(long, default_value_t = 101)]
        samples: usize,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check positivity of the discretised memory pairing over a seeded
    /// signal corpus, one report row per kernel order.
    VerifyKernel {
        /// Comma-separated Abel orders to test.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
        alpha: Vec<f64>,
        /// Signals per kernel order.
        #[arg(long, default_value_t = 100)]
        corpus: usize,
        /// Quadrature step.
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        /// Samples per signal.
        #[arg(long, default_value_t = 256)]
        len: usize,
        /// Corpus RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-measure the embedding-inequality ratio maxima over a seeded corpus
    /// of random trigonometric polynomials.
    VerifyInequalities {
        /// Spatial dimension of the corpus (2 or 3).
        #[arg(long)]
        dim: usize,
        /// Number of random fields.
        #[arg(long, default_value_t = 200)]
        corpus: usize,
        /// Corpus RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Sweepable parameter axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    /// Rescale the initial data to the given size N0 (quadratic form
    /// ‖ψ0‖²_{H²} + ‖ψ1‖²_{H²} + ‖ψ2‖²_{H¹}).
    N0,
    /// Nonlinearity strength.
    K,
    /// Memory coupling strength.
    Delta,
    /// Abel kernel order (requires an Abel kernel in the config).
    Alpha,
    /// Relaxation time.
    Tau,
    /// Wave speed.
    C,
    /// Time step (t_end and stride divisibility are revalidated).
    Dt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Const,
    Affine,
}

/// Column header of the diagnostics CSV stream.
pub const DIAGNOSTICS_HEADER: &str =
    "t,E,E_full,D_cum,Q,grad_psi_tt,lap_psi,lap_psi_t,psi_ttt,conv_lap_psi_tt";

/// Entry point used by the binary: builds the worker pool, parses arguments,
/// runs the subcommand, and maps errors onto the exit-code contract.
pub fn main_entry() -> i32 {
    init_worker_pool();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Dispatches a parsed command line, returning the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { config, resume } => cmd_simulate(&config, resume),
        Command::Sweep { config, axis, values } => cmd_sweep(&config, axis, &values),
        Command::Bounds { n0, z0_scale, c0, profile, t_max, samples, out } => {
            cmd_bounds(n0, z0_scale, c0, profile, t_max, samples, out.as_deref())
        }
        Command::VerifyKernel { alpha, corpus, dt, len, seed, out } => {
            cmd_verify_kernel(&alpha, corpus, dt, len, seed, out.as_deref())
        }
        Command::VerifyInequalities { dim, corpus, seed, out } => {
            cmd_verify_inequalities(dim, corpus, seed, out.as_deref())
        }
    }
}

fn init_worker_pool() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("FJMGT_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a global pool already exists, which is fine.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// `FJMGT_OUT_DIR`, when set, redirects every file this process writes.
fn effective_out_dir(configured: &Path) -> PathBuf {
    std::env::var_os("FJMGT_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| configured.into())
}

/// One-line, machine-readable form of a termination status.
pub fn status_line(term: &Termination) -> String {
    match term {
        Termination::Completed => "status=completed".into(),
        Termination::MonitorFired { t, q } => format!("status=monitor_fired t={t} q={q}"),
        Termination::BlowupSuspected { t } => format!("status=blowup_suspected t={t}"),
        Termination::MaxStepsReached { t } => format!("status=max_steps_reached t={t}"),
    }
}

fn status_token(term: &Termination) -> &'static str {
    match term {
        Termination::Completed => "completed",
        Termination::MonitorFired { .. } => "monitor_fired",
        Termination::BlowupSuspected { .. } => "blowup_suspected",
        Termination::MaxStepsReached { .. } => "max_steps_reached",
    }
}

/// Exit code for a finished run: suspected blow-up (monitor fired or
/// finiteness lost) maps to 2, everything else to 0.
pub fn exit_code_for(term: &Termination) -> i32 {
    match term {
        Termination::Completed | Termination::MaxStepsReached { .. } => 0,
        Termination::MonitorFired { .. } | Termination::BlowupSuspected { .. } => 2,
    }
}

// ---------------------------------------------------------------------------
// Diagnostics stream
// ---------------------------------------------------------------------------

fn csv_row(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.t,
        r.e,
        r.e_full,
        r.d_cum,
        r.q,
        r.grad_psi_tt,
        r.lap_psi,
        r.lap_psi_t,
        r.psi_ttt,
        r.conv_lap_psi_tt
    )
}

struct RecordWriter {
    out: std::io::BufWriter<fs::File>,
    format: OutputFormat,
}

impl RecordWriter {
    fn create(path: &Path, format: OutputFormat) -> Result<Self> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        if format == OutputFormat::Csv {
            writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        }
        Ok(Self { out, format })
    }

    /// Resume path: extend an existing stream without re-emitting the
    /// header, or fall back to a fresh file if none is there.
    fn append_or_create(path: &Path, format: OutputFormat) -> Result<Self> {
        if path.exists() {
            let out = std::io::BufWriter::new(fs::OpenOptions::new().append(true).open(path)?);
            Ok(Self { out, format })
        } else {
            Self::create(path, format)
        }
    }

    fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        match self.format {
            OutputFormat::Csv => writeln!(self.out, "{}", csv_row(r))?,
            OutputFormat::Ndjson => {
                let line = serde_json::to_string(r).map_err(std::io::Error::from)?;
                writeln!(self.out, "{line}")?;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn resolve_tensor(
    cfg: &SimulationConfig,
    basis: &SpectralBasis,
    out_dir: &Path,
) -> Result<Array3<f64>> {
    match &cfg.output.tensor_cache {
        None => Ok(assemble_operators(basis).tensor),
        Some(p) => {
            let path = if p.is_absolute() { p.clone() } else { out_dir.join(p) };
            load_or_assemble_tensor(basis, &path)
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(config: &Path, resume: bool) -> Result<i32> {
    let cfg = parse_config(&fs::read_to_string(config)?)?;
    let out_dir = effective_out_dir(&cfg.output.dir);
    fs::create_dir_all(&out_dir)?;
    let basis = eigenpairs(&cfg.domain, cfg.n_modes)?;
    let tensor = resolve_tensor(&cfg, &basis, &out_dir)?;
    let hash = physics_hash(&cfg);
    let diag_path = out_dir.join(format!("diagnostics.{}", cfg.output.format.extension()));
    let ck_path = out_dir.join("run.ck");

    let (mut stepper, mut acc, mut writer, fresh) = if resume {
        let ck = read_checkpoint(&ck_path, hash)?;
        (
            Stepper::restore(&basis, &tensor, &cfg.params, cfg.dt, cfg.n_steps, ck.snapshot)?,
            DissipationAccumulator::restore(ck.d_cum, ck.prev_point),
            RecordWriter::append_or_create(&diag_path, cfg.output.format)?,
            false,
        )
    } else {
        let init = initial_coefficients(&cfg.init, &basis)?;
        (
            Stepper::new(&basis, &tensor, &cfg.params, &init, cfg.dt, cfg.n_steps)?,
            DissipationAccumulator::new(),
            RecordWriter::create(&diag_path, cfg.output.format)?,
            true,
        )
    };

    let limit = cfg.max_steps.map_or(cfg.n_steps, |cap| cap.min(cfg.n_steps));
    let interval = cfg.output.checkpoint_interval;
    let mut stashed: Option<Error> = None;
    let mut records: u64 = 0;

    let status = {
        let mut on_sample = |st: &Stepper, smp: &Sample| -> SampleVerdict {
            // Record first so a firing sample is still visible in the
            // stream; I/O and shape errors halt the run and surface after.
            let record = match record_from_sample(
                &cfg.params,
                &basis,
                smp,
                cfg.monitor.as_ref(),
                &mut acc,
            ) {
                Ok(r) => r,
                Err(e) => {
                    stashed = Some(e);
                    return SampleVerdict::Halt(Termination::Completed);
                }
            };
            if let Err(e) = writer.write(&record) {
                stashed = Some(e);
                return SampleVerdict::Halt(Termination::Completed);
            }
            records += 1;
            let verdict = cfg
                .monitor
                .as_ref()
                .map_or(SampleVerdict::Continue, |m| monitor_verdict(&basis, m, smp));
            let halting = matches!(verdict, SampleVerdict::Halt(_));
            if interval > 0
                && (records.is_multiple_of(interval) || st.step_index() >= limit || halting)
            {
                let ck = Checkpoint {
                    config_hash: hash,
                    snapshot: st.snapshot(),
                    d_cum: acc.total(),
                    prev_point: acc.prev(),
                };
                if let Err(e) = write_checkpoint(&ck_path, &ck) {
                    stashed = Some(e);
                    return SampleVerdict::Halt(Termination::Completed);
                }
            }
            verdict
        };
        if fresh {
            let first = stepper.sample();
            match on_sample(&stepper, &first) {
                SampleVerdict::Halt(s) => s,
                SampleVerdict::Continue => {
                    drive(&mut stepper, limit, cfg.output_stride, &mut on_sample)?.1
                }
            }
        } else {
            drive(&mut stepper, limit, cfg.output_stride, &mut on_sample)?.1
        }
    };
    writer.finish()?;
    if let Some(e) = stashed {
        return Err(e);
    }

    let line = status_line(&status);
    fs::write(out_dir.join("status.txt"), format!("{line}\n"))?;
    println!("{line}");
    Ok(exit_code_for(&status))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    value: f64,
    n0: f64,
    status: Termination,
    t_term: f64,
    max_q: f64,
    final_e: f64,
}

/// Initial-data size: ‖ψ0‖²_{H²} + ‖ψ1‖²_{H²} + ‖ψ2‖²_{H¹} on the basis.
fn data_size(basis: &SpectralBasis, init: &[Array1<f64>; 3]) -> Result<f64> {
    let a = sobolev_norm(basis, &init[0], 2.0)?;
    let b = sobolev_norm(basis, &init[1], 2.0)?;
    let c = sobolev_norm(basis, &init[2], 1.0)?;
    Ok(a * a + b * b + c * c)
}

fn kernel_with_delta(kernel: &KernelSpec, delta: f64) -> Result<KernelSpec> {
    match kernel.kind() {
        KernelKind::Abel { alpha } => KernelSpec::abel(alpha, delta),
        KernelKind::Exponential { rate, scale } => KernelSpec::exponential(rate, scale, delta),
        KernelKind::Zero if delta == 0.0 => Ok(KernelSpec::zero()),
        KernelKind::Zero => Err(Error::InvalidParameter(
            "the zero kernel cannot carry a memory coefficient; configure a kernel first".into(),
        )),
    }
}

/// Applies one sweep value to the base config, yielding the per-run
/// parameters, grid, and (possibly rescaled) initial data.
fn apply_axis(
    cfg: &SimulationConfig,
    basis: &SpectralBasis,
    axis: SweepAxis,
    value: f64,
    base_init: &[Array1<f64>; 3],
) -> Result<(PhysicalParams, f64, u64, [Array1<f64>; 3])> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter(format!("sweep value must be finite, got {value}")));
    }
    let p = &cfg.params;
    let mut init = base_init.clone();
    let mut dt = cfg.dt;
    let mut n_steps = cfg.n_steps;
    let params = match axis {
        SweepAxis::N0 => {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "target data size must be positive, got {value}"
                )));
            }
            let current = data_size(basis, &init)?;
            if current <= 0.0 {
                return Err(Error::InvalidParameter(
                    "initial data is identically zero; its size cannot be rescaled".into(),
                ));
            }
            let s = (value / current).sqrt();
            for field in &mut init {
                *field *= s;
            }
            p.clone()
        }
        SweepAxis::K => PhysicalParams::new(p.tau(), p.c(), value, *p.kernel())?,
        SweepAxis::Tau => PhysicalParams::new(value, p.c(), p.k(), *p.kernel())?,
        SweepAxis::C => PhysicalParams::new(p.tau(), value, p.k(), *p.kernel())?,
        SweepAxis::Delta => {
            PhysicalParams::new(p.tau(), p.c(), p.k(), kernel_with_delta(p.kernel(), value)?)?
        }
        SweepAxis::Alpha => {
            let KernelKind::Abel { .. } = p.kernel().kind() else {
                return Err(Error::InvalidParameter(
                    "sweeping the fractional order requires an abel kernel".into(),
                ));
            };
            let kern = KernelSpec::abel(value, p.kernel().delta())?;
            PhysicalParams::new(p.tau(), p.c(), p.k(), kern)?
        }
        SweepAxis::Dt => {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "step size must be positive, got {value}"
                )));
            }
            dt = value;
            n_steps = steps_for(value, cfg.t_end, cfg.output_stride)
                .map_err(|m| Error::InvalidParameter(format!("dt = {value}: {m}")))?;
            p.clone()
        }
    };
    Ok((params, dt, n_steps, init))
}

fn sweep_one(
    cfg: &SimulationConfig,
    basis: &SpectralBasis,
    tensor: &Array3<f64>,
    axis: SweepAxis,
    value: f64,
    base_init: &[Array1<f64>; 3],
) -> Result<SweepRow> {
    let (params, dt, n_steps, init) = apply_axis(cfg, basis, axis, value, base_init)?;
    let run_cfg =
        RunConfig { dt, n_steps, output_stride: cfg.output_stride, hard_cap: cfg.max_steps };
    let mut acc = DissipationAccumulator::new();
    let mut max_q = f64::NEG_INFINITY;
    let mut final_e = f64::NAN;
    let mut stashed: Option<Error> = None;
    let traj = run(basis, tensor, &params, &init, &run_cfg, |_, smp| {
        match record_from_sample(&params, basis, smp, cfg.monitor.as_ref(), &mut acc) {
            Ok(r) => {
                max_q = max_q.max(r.q);
                final_e = r.e;
                cfg.monitor
                    .as_ref()
                    .map_or(SampleVerdict::Continue, |m| monitor_verdict(basis, m, smp))
            }
            Err(e) => {
                stashed = Some(e);
                SampleVerdict::Halt(Termination::Completed)
            }
        }
    })?;
    if let Some(e) = stashed {
        return Err(e);
    }
    let t_term = match traj.status {
        Termination::Completed => n_steps as f64 * dt,
        Termination::MonitorFired { t, .. }
        | Termination::BlowupSuspected { t }
        | Termination::MaxStepsReached { t } => t,
    };
    Ok(SweepRow {
        value,
        n0: data_size(basis, &init)?,
        status: traj.status,
        t_term,
        max_q,
        final_e,
    })
}

/// Order-preserving map over the sweep values; parallel when the feature is
/// active, plain iteration otherwise.
fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

pub fn cmd_sweep(config: &Path, axis: SweepAxis, values: &[f64]) -> Result<i32> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("a sweep needs at least one value".into()));
    }
    let cfg = parse_config(&fs::read_to_string(config)?)?;
    let out_dir = effective_out_dir(&cfg.output.dir);
    fs::create_dir_all(&out_dir)?;
    let basis = eigenpairs(&cfg.domain, cfg.n_modes)?;
    let tensor = resolve_tensor(&cfg, &basis, &out_dir)?;
    let base_init = initial_coefficients(&cfg.init, &basis)?;

    // Rows are keyed and ordered by the swept value, independent of worker
    // completion order.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = map_ordered(&sorted, |&v| sweep_one(&cfg, &basis, &tensor, axis, v, &base_init))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut text = String::from("# schema: fjmgt-sweep-v1\nvalue,n0,status,t_term,max_q,final_e\n");
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.value,
            r.n0,
            status_token(&r.status),
            r.t_term,
            r.max_q,
            r.final_e
        )
        .expect("writing to a String cannot fail");
    }
    fs::write(out_dir.join("sweep.csv"), &text)?;
    print!("{text}");

    let any_fired = rows.iter().any(|r| {
        matches!(r.status, Termination::MonitorFired { .. } | Termination::BlowupSuspected { .. })
    });
    Ok(if any_fired { 2 } else { 0 })
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

pub fn cmd_bounds(
    n0: f64,
    z0_scale: f64,
    c0: f64,
    profile: ProfileArg,
    t_max: f64,
    samples: usize,
    out: Option<&Path>,
) -> Result<i32> {
    let profile = match profile {
        ProfileArg::Const => CProfile::Constant(c0),
        ProfileArg::Affine => CProfile::Affine(c0),
    };
    let query = BoundsQuery::new(n0, z0_scale, profile)?;
    let star = t_star(&query)?;
    let horizon = t0(n0, profile.value_at(star), z0_scale)?;
    let curve = bounds_curve(&query, t_max, samples)?;

    let out_dir = effective_out_dir(out.unwrap_or(Path::new("out")));
    fs::create_dir_all(&out_dir)?;
    let mut text = String::from("# schema: fjmgt-bounds-v1\nt,t0\n");
    for p in &curve {
        writeln!(text, "{},{}", p.t, p.t0).expect("writing to a String cannot fail");
    }
    fs::write(out_dir.join("bounds.csv"), &text)?;

    let summary = format!("T* = {star:.6}\nT0 at T* = {horizon:.6}\n");
    fs::write(out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify-kernel / verify-inequalities
// ---------------------------------------------------------------------------

pub fn cmd_verify_kernel(
    alphas: &[f64],
    corpus: usize,
    dt: f64,
    len: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<i32> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("needs at least one kernel order".into()));
    }
    let mut text = String::from(
        "# schema: fjmgt-kernel-report-v1\nalpha,samples,min_lhs_ratio,min_c_estimate,mean_c_estimate\n",
    );
    let mut all_positive = true;
    for &alpha in alphas {
        let kernel = KernelSpec::abel(alpha, 1.0)?;
        let summary = coercivity_corpus(&kernel, dt, corpus, len, seed)?;
        all_positive &= summary.min_lhs_ratio >= -1e-12 && summary.min_c_estimate > 0.0;
        writeln!(
            text,
            "{},{},{},{},{}",
            alpha,
            summary.samples,
            summary.min_lhs_ratio,
            summary.min_c_estimate,
            summary.mean_c_estimate
        )
        .expect("writing to a String cannot fail");
    }
    let out_dir = effective_out_dir(out.unwrap_or(Path::new("out")));
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("kernel_report.csv"), &text)?;
    print!("{text}");
    Ok(if all_positive { 0 } else { 1 })
}

pub fn cmd_verify_inequalities(
    dim: usize,
    corpus: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<i32> {
    let report = verify_inequalities(dim, corpus, seed)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut text = String::from(
        "# schema: fjmgt-inequality-report-v1\ndim,samples,seed,max_bg,max_bgw,max_lady,max_l4\n",
    );
    writeln!(
        text,
        "{},{},{},{},{},{},{}",
        report.dim,
        report.samples,
        report.seed,
        opt(report.max_bg),
        opt(report.max_bgw),
        report.max_lady,
        opt(report.max_l4)
    )
    .expect("writing to a String cannot fail");
    let out_dir = effective_out_dir(out.unwrap_or(Path::new("out")));
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("inequality_report.csv"), &text)?;
    print!("{text}");

    let finite = report.max_lady.is_finite()
        && [report.max_bg, report.max_bgw, report.max_l4].into_iter().flatten().all(f64::is_finite);
    Ok(if finite { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_every_subcommand() {
        Cli::try_parse_from(["fjmgt", "simulate", "--config", "run.toml", "--resume"]).unwrap();
        let cli = Cli::try_parse_from([
            "fjmgt",
            "sweep",
            "--config",
            "run.toml",
            "--axis",
            "n0",
            "--values",
            "1e-4,1e-2,1",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep { axis, values, .. } => {
                assert_eq!(axis, SweepAxis::N0);
                assert_eq!(values, vec![1e-4, 1e-2, 1.0]);
            }
            other => panic!("parsed into {other:?}"),
        }
        Cli::try_parse_from(["fjmgt", "bounds", "--n0", "1", "--c0", "1"]).unwrap();
        Cli::try_parse_from(["fjmgt", "verify-kernel", "--alpha", "0.5"]).unwrap();
        Cli::try_parse_from(["fjmgt", "verify-inequalities", "--dim", "2"]).unwrap();
    }

    #[test]
    fn status_lines_and_exit_codes_follow_the_contract() {
        let cases = [
            (Termination::Completed, "status=completed", 0),
            (Termination::MonitorFired { t: 0.5, q: 2e4 }, "status=monitor_fired t=0.5 q=20000", 2),
            (Termination::BlowupSuspected { t: 0.25 }, "status=blowup_suspected t=0.25", 2),
            (Termination::MaxStepsReached { t: 1.5 }, "status=max_steps_reached t=1.5", 0),
        ];
        for (term, line, code) in cases {
            assert_eq!(status_line(&term), line);
            assert_eq!(exit_code_for(&term), code);
        }
    }

    #[test]
    fn csv_rows_use_shortest_round_trip_formatting() {
        let r = DiagnosticsRecord {
            t: 0.1,
            e: 2.0,
            e_full: 3.5,
            d_cum: 0.0,
            q: 1.25,
            grad_psi_tt: 0.5,
            lap_psi: 1.0,
            lap_psi_t: 0.0,
            psi_ttt: 4.0,
            conv_lap_psi_tt: 0.0,
        };
        assert_eq!(csv_row(&r), "0.1,2,3.5,0,1.25,0.5,1,0,4,0");
        let json: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(json["E"], 2.0);
        assert_eq!(json["D_cum"], 0.0);
        assert_eq!(json["conv_lap_psi_tt"], 0.0);
    }

    #[test]
    fn sweep_axis_application_rebuilds_parameters() {
        use crate::spectral::DomainSpec;
        let cfg = parse_config(
            "[domain]\nn_modes = 3\n\n[params]\nk = 1.0\n\n[params.kernel]\nkind = \"abel\"\nalpha = 0.5\ndelta = 0.2\n\n[time]\ndt = 1e-3\nt_end = 0.1\n",
        )
        .unwrap();
        let basis =
            eigenpairs(&DomainSpec::new(1, vec![std::f64::consts::PI]).unwrap(), 3).unwrap();
        let init = initial_coefficients(&cfg.init, &basis).unwrap();

        let (p, _, _, _) = apply_axis(&cfg, &basis, SweepAxis::K, 7.0, &init).unwrap();
        assert_eq!(p.k(), 7.0);
        let (p, _, _, _) = apply_axis(&cfg, &basis, SweepAxis::Alpha, 0.75, &init).unwrap();
        assert!(matches!(p.kernel().kind(), KernelKind::Abel { alpha } if alpha == 0.75));
        assert_eq!(p.kernel().delta(), 0.2);

        let (_, _, _, scaled) = apply_axis(&cfg, &basis, SweepAxis::N0, 4.0, &init).unwrap();
        approx::assert_relative_eq!(data_size(&basis, &scaled).unwrap(), 4.0, max_relative = 1e-12);

        let (_, dt, n_steps, _) = apply_axis(&cfg, &basis, SweepAxis::Dt, 5e-4, &init).unwrap();
        assert_eq!((dt, n_steps), (5e-4, 200));
        let err = apply_axis(&cfg, &basis, SweepAxis::Dt, 3e-4, &init).unwrap_err();
        assert!(err.to_string().contains("divide"));

        let zero_kernel_cfg = parse_config("[time]\ndt = 1e-3\nt_end = 0.1\n").unwrap();
        let err = apply_axis(&zero_kernel_cfg, &basis, SweepAxis::Alpha, 0.5, &init).unwrap_err();
        assert!(err.to_string().contains("abel"));
    }
}
