//! TOML experiment configuration: parsing, exhaustive validation, defaults,
//! round-trip serialization, and the physics hash that ties checkpoints to
//! the run that produced them.
//!
//! Parsing is two-staged. Serde handles syntax strictly (unknown keys are
//! rejected by name); the semantic pass then checks *every* field and
//! reports all violations at once rather than stopping at the first, so a
//! config can be fixed in one edit cycle.

use std::path::PathBuf;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::diagnostics::MonitorSpec;
use crate::dynamics::PhysicalParams;
use crate::kernel::KernelSpec;
use crate::spectral::{project_initial_data, DomainSpec, SpectralBasis};
use crate::{Error, Result};

/// Which file format the diagnostics stream is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Ndjson,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Ndjson => "ndjson",
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Ndjson => "ndjson",
        }
    }
}

/// Output plumbing: directory, stream format, checkpoint cadence (in output
/// strides; 0 disables checkpointing), and an optional interaction-tensor
/// cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: OutputFormat,
    pub checkpoint_interval: u64,
    pub tensor_cache: Option<PathBuf>,
}

/// How the three initial fields are specified: a named analytic profile
/// scaled per field and projected, or explicit per-mode amplitude triples.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Profile { name: ProfileKind, amplitudes: [f64; 3] },
    Modes(Vec<ModeInit>),
}

/// Named analytic initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// The polynomial bump `Π_a x_a·(L_a − x_a)`, smooth and
    /// boundary-compatible on any box.
    Bump,
}

/// Explicit initial data for one mode, addressed by its 1-based rank in the
/// eigenvalue-sorted basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeInit {
    pub index: usize,
    pub psi0: f64,
    pub psi1: f64,
    pub psi2: f64,
}

/// A fully validated experiment: every invariant checked, every default
/// resolved. Obtained from [`parse_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub domain: DomainSpec,
    pub n_modes: usize,
    pub params: PhysicalParams,
    pub init: InitSpec,
    pub dt: f64,
    pub t_end: f64,
    /// `t_end / dt`, exact by the divisibility invariant.
    pub n_steps: u64,
    pub output_stride: u64,
    pub max_steps: Option<u64>,
    pub monitor: Option<MonitorSpec>,
    pub output: OutputSpec,
}

// ---------------------------------------------------------------------------
// Raw (serde) layer
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<RawDomain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<RawParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<RawInit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time: Option<RawTime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monitor: Option<RawMonitor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lengths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_modes: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<RawKernel>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<RawModeInit>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModeInit {
    index: usize,
    #[serde(default)]
    psi0: f64,
    #[serde(default)]
    psi1: f64,
    #[serde(default)]
    psi2: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_stride: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_steps: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonitor {
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaled: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_interval: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tensor_cache: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, path: &str, message: impl std::fmt::Display) {
        self.0.push(format!("{path}: {message}"));
    }

    /// Folds a constructor result into the list, returning the value on
    /// success.
    fn take<T>(&mut self, path: &str, result: Result<T>) -> Option<T> {
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(path, e);
                None
            }
        }
    }
}

fn validate_kernel(raw: Option<&RawKernel>, v: &mut Violations) -> Option<KernelSpec> {
    let Some(raw) = raw else {
        return Some(KernelSpec::zero());
    };
    let delta = raw.delta.unwrap_or(0.0);
    let kind = raw.kind.as_deref().unwrap_or("zero");
    let reject_extras = |v: &mut Violations, fields: &[(&str, bool)]| {
        for (name, present) in fields {
            if *present {
                v.push(
                    &format!("params.kernel.{name}"),
                    format!("not a parameter of the {kind} kernel"),
                );
            }
        }
    };
    match kind {
        "abel" => {
            reject_extras(v, &[("rate", raw.rate.is_some()), ("scale", raw.scale.is_some())]);
            let Some(alpha) = raw.alpha else {
                v.push("params.kernel.alpha", "required for the abel kernel");
                return None;
            };
            v.take("params.kernel", KernelSpec::abel(alpha, delta))
        }
        "exponential" => {
            reject_extras(v, &[("alpha", raw.alpha.is_some())]);
            let (Some(rate), Some(scale)) = (raw.rate, raw.scale) else {
                if raw.rate.is_none() {
                    v.push("params.kernel.rate", "required for the exponential kernel");
                }
                if raw.scale.is_none() {
                    v.push("params.kernel.scale", "required for the exponential kernel");
                }
                return None;
            };
            v.take("params.kernel", KernelSpec::exponential(rate, scale, delta))
        }
        "zero" => {
            reject_extras(
                v,
                &[
                    ("alpha", raw.alpha.is_some()),
                    ("rate", raw.rate.is_some()),
                    ("scale", raw.scale.is_some()),
                ],
            );
            if delta != 0.0 {
                v.push(
                    "params.kernel.delta",
                    "the zero kernel has no memory term; delta must be 0 or omitted",
                );
                return None;
            }
            Some(KernelSpec::zero())
        }
        other => {
            v.push(
                "params.kernel.kind",
                format!("unknown kernel kind {other:?} (expected abel, exponential, or zero)"),
            );
            None
        }
    }
}

fn validate_init(
    raw: Option<&RawInit>,
    n_modes: Option<usize>,
    v: &mut Violations,
) -> Option<InitSpec> {
    let Some(raw) = raw else {
        return Some(InitSpec::Profile { name: ProfileKind::Bump, amplitudes: [1.0, 0.0, 0.0] });
    };
    match (&raw.profile, &raw.modes) {
        (Some(_), Some(_)) => {
            v.push("init", "give either a profile or explicit modes, not both");
            None
        }
        (None, None) => {
            v.push("init", "needs either a profile or explicit modes");
            None
        }
        (Some(name), None) => {
            let kind = match name.as_str() {
                "bump" => Some(ProfileKind::Bump),
                other => {
                    v.push("init.profile", format!("unknown profile {other:?} (expected bump)"));
                    None
                }
            };
            let amps = raw.amplitudes.clone().unwrap_or_else(|| vec![1.0, 0.0, 0.0]);
            if amps.len() != 3 {
                v.push(
                    "init.amplitudes",
                    format!("needs exactly 3 entries (psi0, psi1, psi2), got {}", amps.len()),
                );
                return None;
            }
            if let Some(bad) = amps.iter().find(|a| !a.is_finite()) {
                v.push("init.amplitudes", format!("must be finite, got {bad}"));
                return None;
            }
            Some(InitSpec::Profile { name: kind?, amplitudes: [amps[0], amps[1], amps[2]] })
        }
        (None, Some(modes)) => {
            if raw.amplitudes.is_some() {
                v.push("init.amplitudes", "only meaningful with a profile");
            }
            if modes.is_empty() {
                v.push("init.modes", "needs at least one entry");
                return None;
            }
            let mut seen = std::collections::BTreeSet::new();
            let mut ok = true;
            for (i, m) in modes.iter().enumerate() {
                let path = format!("init.modes[{i}]");
                if m.index == 0 {
                    v.push(&path, "mode indices are 1-based ranks in the eigenbasis");
                    ok = false;
                } else if let Some(n) = n_modes {
                    if m.index > n {
                        v.push(&path, format!("index {} exceeds n_modes = {n}", m.index));
                        ok = false;
                    }
                }
                if !seen.insert(m.index) {
                    v.push(&path, format!("duplicate mode index {}", m.index));
                    ok = false;
                }
                if ![m.psi0, m.psi1, m.psi2].iter().all(|x| x.is_finite()) {
                    v.push(&path, "amplitudes must be finite");
                    ok = false;
                }
            }
            ok.then(|| {
                InitSpec::Modes(
                    modes
                        .iter()
                        .map(|m| ModeInit {
                            index: m.index,
                            psi0: m.psi0,
                            psi1: m.psi1,
                            psi2: m.psi2,
                        })
                        .collect(),
                )
            })
        }
    }
}

/// Step count for a grid on which the run ends exactly on an output record:
/// `dt·stride` must divide `t_end` to within 1e−12 relative. Shared by
/// config validation and by sweeps that vary `dt` after parsing.
pub(crate) fn steps_for(dt: f64, t_end: f64, stride: u64) -> std::result::Result<u64, String> {
    let block = dt * stride as f64;
    let blocks = (t_end / block).round();
    let off = (blocks * block - t_end).abs();
    if blocks < 1.0 || off > 1e-12 * t_end.max(1.0) {
        return Err(format!(
            "dt·output_stride = {block} must divide t_end = {t_end} \
             (closest multiple misses by {off:e})"
        ));
    }
    Ok(blocks as u64 * stride)
}

/// Parses and validates a config document.
///
/// Syntax problems (malformed TOML, unknown keys, wrong types) surface as
/// [`Error::TomlParse`] naming the offending key; semantic problems are
/// collected exhaustively into one [`Error::InvalidConfig`].
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let raw: RawConfig = toml::from_str(text)?;
    let mut v = Violations(Vec::new());

    // Domain.
    let rd = raw.domain.unwrap_or_default();
    let dim = rd.dim.unwrap_or(1);
    let lengths = rd.lengths.unwrap_or_else(|| vec![std::f64::consts::PI; dim.clamp(1, 3)]);
    let domain = v.take("domain", DomainSpec::new(dim, lengths));
    let n_modes = rd.n_modes.unwrap_or(8);
    if n_modes == 0 {
        v.push("domain.n_modes", "needs at least one mode");
    }

    // Physical parameters. A broken kernel spec must not mask tau/c/k
    // violations, so those are checked against a placeholder kernel — the
    // config is rejected either way once any violation is on the list.
    let rp = raw.params.unwrap_or_default();
    let kernel = validate_kernel(rp.kernel.as_ref(), &mut v);
    let params = v.take(
        "params",
        PhysicalParams::new(
            rp.tau.unwrap_or(1.0),
            rp.c.unwrap_or(1.0),
            rp.k.unwrap_or(0.0),
            kernel.unwrap_or_else(KernelSpec::zero),
        ),
    );

    // Initial data.
    let init = validate_init(raw.init.as_ref(), (n_modes > 0).then_some(n_modes), &mut v);

    // Time grid.
    let rt = raw.time.unwrap_or_default();
    let output_stride = rt.output_stride.unwrap_or(1);
    if output_stride == 0 {
        v.push("time.output_stride", "must be at least 1");
    }
    let mut n_steps = 0u64;
    let dt = rt.dt;
    let t_end = rt.t_end;
    match (dt, t_end) {
        (None, _) => v.push("time.dt", "required"),
        (_, None) => v.push("time.t_end", "required"),
        (Some(dt), Some(t_end)) => {
            let mut grid_ok = true;
            if !(dt > 0.0 && dt.is_finite()) {
                v.push("time.dt", format!("must be positive and finite, got {dt}"));
                grid_ok = false;
            }
            if !(t_end > 0.0 && t_end.is_finite()) {
                v.push("time.t_end", format!("must be positive and finite, got {t_end}"));
                grid_ok = false;
            }
            if grid_ok && output_stride > 0 {
                match steps_for(dt, t_end, output_stride) {
                    Ok(n) => n_steps = n,
                    Err(msg) => v.push("time", msg),
                }
            }
        }
    }
    if let Some(cap) = rt.max_steps {
        if cap == 0 {
            v.push("time.max_steps", "must be at least 1 when given");
        }
    }

    // Monitor.
    let monitor = match raw.monitor {
        None => None,
        Some(rm) => {
            let cap = rm.cap;
            let mdim = rm.dim.unwrap_or(dim);
            let scaled = rm.scaled.unwrap_or(false);
            match cap {
                None => {
                    v.push("monitor.cap", "required when the monitor section is present");
                    None
                }
                Some(cap) => v.take("monitor", MonitorSpec::new(cap, mdim, scaled)),
            }
        }
    };

    // Output.
    let ro = raw.output.unwrap_or_default();
    let format = match ro.format.as_deref() {
        None | Some("csv") => Some(OutputFormat::Csv),
        Some("ndjson") => Some(OutputFormat::Ndjson),
        Some(other) => {
            v.push("output.format", format!("unknown format {other:?} (expected csv or ndjson)"));
            None
        }
    };
    let output = format.map(|format| OutputSpec {
        dir: ro.dir.unwrap_or_else(|| PathBuf::from("out")),
        format,
        checkpoint_interval: ro.checkpoint_interval.unwrap_or(0),
        tensor_cache: ro.tensor_cache,
    });

    if !v.0.is_empty() {
        return Err(Error::InvalidConfig(v.0));
    }
    Ok(SimulationConfig {
        seed: raw.seed.unwrap_or(0),
        domain: domain.expect("validated"),
        n_modes,
        params: params.expect("validated"),
        init: init.expect("validated"),
        dt: dt.expect("validated"),
        t_end: t_end.expect("validated"),
        n_steps,
        output_stride,
        max_steps: rt.max_steps,
        monitor,
        output: output.expect("validated"),
    })
}

/// Serialises a validated config back to TOML with every default made
/// explicit; `parse_config(to_toml(cfg))` reproduces `cfg` exactly.
pub fn to_toml(cfg: &SimulationConfig) -> Result<String> {
    use crate::kernel::KernelKind;
    let kernel = cfg.params.kernel();
    let raw_kernel = match kernel.kind() {
        KernelKind::Abel { alpha } => RawKernel {
            kind: Some("abel".into()),
            alpha: Some(alpha),
            rate: None,
            scale: None,
            delta: Some(kernel.delta()),
        },
        KernelKind::Exponential { rate, scale } => RawKernel {
            kind: Some("exponential".into()),
            alpha: None,
            rate: Some(rate),
            scale: Some(scale),
            delta: Some(kernel.delta()),
        },
        KernelKind::Zero => RawKernel {
            kind: Some("zero".into()),
            alpha: None,
            rate: None,
            scale: None,
            delta: Some(0.0),
        },
    };
    let raw_init = match &cfg.init {
        InitSpec::Profile { name, amplitudes } => RawInit {
            profile: Some(match name {
                ProfileKind::Bump => "bump".into(),
            }),
            amplitudes: Some(amplitudes.to_vec()),
            modes: None,
        },
        InitSpec::Modes(modes) => RawInit {
            profile: None,
            amplitudes: None,
            modes: Some(
                modes
                    .iter()
                    .map(|m| RawModeInit {
                        index: m.index,
                        psi0: m.psi0,
                        psi1: m.psi1,
                        psi2: m.psi2,
                    })
                    .collect(),
            ),
        },
    };
    let raw = RawConfig {
        seed: Some(cfg.seed),
        domain: Some(RawDomain {
            dim: Some(cfg.domain.dim()),
            lengths: Some(cfg.domain.lengths().to_vec()),
            n_modes: Some(cfg.n_modes),
        }),
        params: Some(RawParams {
            tau: Some(cfg.params.tau()),
            c: Some(cfg.params.c()),
            k: Some(cfg.params.k()),
            kernel: Some(raw_kernel),
        }),
        init: Some(raw_init),
        time: Some(RawTime {
            dt: Some(cfg.dt),
            t_end: Some(cfg.t_end),
            output_stride: Some(cfg.output_stride),
            max_steps: cfg.max_steps,
        }),
        monitor: cfg.monitor.map(|m| RawMonitor {
            cap: Some(m.cap()),
            dim: Some(m.dim()),
            scaled: Some(m.scaled()),
        }),
        output: Some(RawOutput {
            dir: Some(cfg.output.dir.clone()),
            format: Some(cfg.output.format.as_str().into()),
            checkpoint_interval: Some(cfg.output.checkpoint_interval),
            tensor_cache: cfg.output.tensor_cache.clone(),
        }),
    };
    Ok(toml::to_string_pretty(&raw)?)
}

/// Resolves the initial-data spec to modal coefficient vectors on a basis.
pub fn initial_coefficients(init: &InitSpec, basis: &SpectralBasis) -> Result<[Array1<f64>; 3]> {
    let n = basis.n_modes();
    match init {
        InitSpec::Modes(modes) => {
            let mut out = [Array1::zeros(n), Array1::zeros(n), Array1::zeros(n)];
            for m in modes {
                if m.index == 0 || m.index > n {
                    return Err(Error::InvalidParameter(format!(
                        "mode index {} out of range 1..={n}",
                        m.index
                    )));
                }
                out[0][m.index - 1] = m.psi0;
                out[1][m.index - 1] = m.psi1;
                out[2][m.index - 1] = m.psi2;
            }
            Ok(out)
        }
        InitSpec::Profile { name: ProfileKind::Bump, amplitudes } => {
            let lengths = basis.domain().lengths().to_vec();
            let bump = move |x: &[f64]| -> f64 {
                x.iter().zip(&lengths).map(|(xi, l)| xi * (l - xi)).product()
            };
            let f0 = |x: &[f64]| amplitudes[0] * bump(x);
            let f1 = |x: &[f64]| amplitudes[1] * bump(x);
            let f2 = |x: &[f64]| amplitudes[2] * bump(x);
            project_initial_data(basis, [&f0, &f1, &f2], None)
        }
    }
}

/// FNV-1a hash of the physics-defining subset of a config: domain, physical
/// parameters, initial data, `dt`, and seed. Output-side settings (paths,
/// format, strides, monitor) deliberately do not participate, so a checkpoint
/// stays valid when only plumbing changes.
pub fn physics_hash(cfg: &SimulationConfig) -> u64 {
    let mut canon = String::new();
    use std::fmt::Write;
    write!(canon, "dim={};", cfg.domain.dim()).unwrap();
    for l in cfg.domain.lengths() {
        write!(canon, "L={};", l.to_bits()).unwrap();
    }
    write!(canon, "n={};", cfg.n_modes).unwrap();
    write!(
        canon,
        "tau={};c={};k={};",
        cfg.params.tau().to_bits(),
        cfg.params.c().to_bits(),
        cfg.params.k().to_bits()
    )
    .unwrap();
    use crate::kernel::KernelKind;
    match cfg.params.kernel().kind() {
        KernelKind::Abel { alpha } => write!(canon, "kern=abel:{};", alpha.to_bits()).unwrap(),
        KernelKind::Exponential { rate, scale } => {
            write!(canon, "kern=exp:{}:{};", rate.to_bits(), scale.to_bits()).unwrap()
        }
        KernelKind::Zero => write!(canon, "kern=zero;").unwrap(),
    }
    write!(canon, "delta={};", cfg.params.kernel().delta().to_bits()).unwrap();
    match &cfg.init {
        InitSpec::Profile { name: ProfileKind::Bump, amplitudes } => {
            write!(
                canon,
                "init=bump:{}:{}:{};",
                amplitudes[0].to_bits(),
                amplitudes[1].to_bits(),
                amplitudes[2].to_bits()
            )
            .unwrap();
        }
        InitSpec::Modes(modes) => {
            write!(canon, "init=modes;").unwrap();
            for m in modes {
                write!(
                    canon,
                    "m={}:{}:{}:{};",
                    m.index,
                    m.psi0.to_bits(),
                    m.psi1.to_bits(),
                    m.psi2.to_bits()
                )
                .unwrap();
            }
        }
    }
    write!(canon, "dt={};seed={};", cfg.dt.to_bits(), cfg.seed).unwrap();

    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canon.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
