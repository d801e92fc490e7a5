//! Binary run checkpoints.
//!
//! A checkpoint captures everything `drive` needs to continue a run with
//! bit-identical results: the stepper snapshot (state triple, convolution
//! history, nonlinear-term lag) plus the dissipation accumulator. The file
//! is tied to its run by a hash over the physics-defining config subset, so
//! resuming under altered physics fails loudly instead of silently mixing
//! trajectories.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   [u8; 8]  = "FJMGTCK1"
//! version u32      = 1
//! hash    u64        physics hash of the owning config
//! step    u64        completed steps
//! n       u32        mode count
//! xi, xi_t, xi_tt    3 × n × f64
//! hist_len u64       convolution history rows (0 when memory is off)
//! history  hist_len × n × f64
//! n_prev   u8 flag + n × f64 when set (lagged nonlinear term)
//! d_cum    f64       accumulated dissipation integral
//! prev     u8 flag + 2 × f64 when set (last (t, integrand) sample point)
//! ```

use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::Array1;

use crate::dynamics::StepperSnapshot;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"FJMGTCK1";
const VERSION: u32 = 1;

/// Resumable run state: stepper snapshot plus dissipation-integral carry.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Physics hash of the config the run was started from.
    pub config_hash: u64,
    pub snapshot: StepperSnapshot,
    /// Dissipation integral accumulated up to the snapshot step.
    pub d_cum: f64,
    /// Last `(t, integrand)` pair fed to the trapezoid accumulator, if any.
    pub prev_point: Option<(f64, f64)>,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let snap = &ck.snapshot;
    let n = snap.xi.len();
    if snap.xi_t.len() != n || snap.xi_tt.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "state triple has inconsistent lengths {}/{}/{}",
            snap.xi.len(),
            snap.xi_t.len(),
            snap.xi_tt.len()
        )));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&ck.config_hash.to_le_bytes())?;
    w.write_all(&snap.step.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    let write_vec = |w: &mut std::io::BufWriter<std::fs::File>, v: &Array1<f64>| -> Result<()> {
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    write_vec(&mut w, &snap.xi)?;
    write_vec(&mut w, &snap.xi_t)?;
    write_vec(&mut w, &snap.xi_tt)?;
    w.write_all(&(snap.history.len() as u64).to_le_bytes())?;
    for row in &snap.history {
        if row.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "history row has {} entries, state has {n}",
                row.len()
            )));
        }
        write_vec(&mut w, row)?;
    }
    match &snap.n_prev {
        Some(v) => {
            w.write_all(&[1])?;
            write_vec(&mut w, v)?;
        }
        None => w.write_all(&[0])?,
    }
    w.write_all(&ck.d_cum.to_le_bytes())?;
    match ck.prev_point {
        Some((t, integrand)) => {
            w.write_all(&[1])?;
            w.write_all(&t.to_le_bytes())?;
            w.write_all(&integrand.to_le_bytes())?;
        }
        None => w.write_all(&[0])?,
    }
    w.flush()?;
    Ok(())
}

/// Sequential reader over the checkpoint byte buffer; every primitive read
/// checks for truncation.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::MalformedCheckpoint(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Array1<f64>> {
        let raw = self.bytes(n * 8)?;
        Ok(Array1::from_iter(
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())),
        ))
    }
}

/// Reads a checkpoint and verifies it belongs to the config with
/// `expected_hash`. Structural damage surfaces as
/// [`Error::MalformedCheckpoint`]; a clean file from a different run as
/// [`Error::CheckpointMismatch`].
pub fn read_checkpoint(path: &Path, expected_hash: u64) -> Result<Checkpoint> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };

    if c.bytes(8)? != MAGIC {
        return Err(Error::MalformedCheckpoint("bad magic; not a checkpoint file".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::MalformedCheckpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let config_hash = c.u64()?;
    if config_hash != expected_hash {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint was written by a different run \
             (physics hash {config_hash:#018x}, config gives {expected_hash:#018x})"
        )));
    }
    let step = c.u64()?;
    let n = c.u32()? as usize;
    let xi = c.f64_vec(n)?;
    let xi_t = c.f64_vec(n)?;
    let xi_tt = c.f64_vec(n)?;
    let hist_len = c.u64()?;
    // A hard sanity bound before allocating: the remaining bytes must cover
    // the claimed history.
    let remaining = (c.buf.len() - c.pos) as u64;
    if hist_len > remaining / (n.max(1) as u64 * 8) + 1 {
        return Err(Error::MalformedCheckpoint(format!(
            "history length {hist_len} exceeds what the file can hold"
        )));
    }
    let mut history = Vec::with_capacity(hist_len as usize);
    for _ in 0..hist_len {
        history.push(c.f64_vec(n)?);
    }
    let n_prev = match c.u8()? {
        0 => None,
        1 => Some(c.f64_vec(n)?),
        other => return Err(Error::MalformedCheckpoint(format!("invalid lag-term flag {other}"))),
    };
    let d_cum = c.f64()?;
    let prev_point = match c.u8()? {
        0 => None,
        1 => Some((c.f64()?, c.f64()?)),
        other => {
            return Err(Error::MalformedCheckpoint(format!("invalid accumulator flag {other}")))
        }
    };
    if c.pos != c.buf.len() {
        return Err(Error::MalformedCheckpoint(format!(
            "{} trailing bytes after the accumulator record",
            c.buf.len() - c.pos
        )));
    }
    Ok(Checkpoint {
        config_hash,
        snapshot: StepperSnapshot { step, xi, xi_t, xi_tt, history, n_prev },
        d_cum,
        prev_point,
    })
}
