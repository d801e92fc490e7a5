//! Closed-form existence-time and energy-growth machinery.
//!
//! The comparison ODE `z′ = z + C·z^{3/2}` linearises under `u = z^{−1/2}`
//! to `u′ = −(u + C)/2`, giving the explicit solution
//! `z(t) = (( z0^{−1/2} + C )·e^{−t/2} − C)^{−2}` with finite-time blow-up at
//! `t₀ = 2·ln((z0^{−1/2} + C)/C)`. On top of this sit the existence-time
//! curve `T₀(N₀, T)`, its optimal fixed point `T*` (the abscissa where the
//! diagonal meets the curve), and the logarithmic bound on the growth
//! functional `G`.

use crate::{Error, Result};

/// The estimate constant as a profile in the horizon `T`: either a plain
/// constant `C₀` or the affine growth `C₀·(1 + T)`.
///
/// The underlying analysis never quantifies its constants, so the profile is
/// user-supplied and every output is conditional on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CProfile {
    Constant(f64),
    Affine(f64),
}

impl CProfile {
    fn c0(&self) -> f64 {
        match *self {
            CProfile::Constant(c0) | CProfile::Affine(c0) => c0,
        }
    }

    /// `C(T)`; positive and nondecreasing in `T` for valid profiles.
    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            CProfile::Constant(c0) => c0,
            CProfile::Affine(c0) => c0 * (1.0 + t),
        }
    }
}

/// An existence-time query: initial-data size `N₀`, the profile for `C(T)`,
/// and the scale relating the comparison-ODE start to the data
/// (`z₀ = scale·N₀`; the analysis writes `z₀ = C·N₀` with an unnamed `C`,
/// default scale 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsQuery {
    n0: f64,
    z0_scale: f64,
    profile: CProfile,
}

impl BoundsQuery {
    pub fn new(n0: f64, z0_scale: f64, profile: CProfile) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial-data size must be positive and finite, got {n0}"
            )));
        }
        if !(z0_scale > 0.0 && z0_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "z0 scale must be positive and finite, got {z0_scale}"
            )));
        }
        let c0 = profile.c0();
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "the C profile must have a positive finite base constant, got {c0}"
            )));
        }
        Ok(Self { n0, z0_scale, profile })
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn z0_scale(&self) -> f64 {
        self.z0_scale
    }

    pub fn profile(&self) -> CProfile {
        self.profile
    }

    /// The comparison-ODE initial value `z₀ = scale·N₀`.
    pub fn z0(&self) -> f64 {
        self.z0_scale * self.n0
    }
}

/// Value of the comparison solution at a time: finite, or already past
/// blow-up. Divergence is an expected answer here, not a failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GronwallValue {
    Finite(f64),
    Diverged,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Closed-form solution of `z′ = z + C·z^{3/2}`, `z(0) = z0`.
///
/// Returns `Diverged` at or beyond the blow-up time
/// `2·ln((z0^{−1/2} + C)/C)`.
pub fn gronwall_z(z0: f64, c: f64, t: f64) -> Result<GronwallValue> {
    check_positive("z0", z0)?;
    check_positive("C", c)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    // u = z^{−1/2} solves u′ = −(u + C)/2 and hits zero exactly at blow-up.
    let u = (1.0 / z0.sqrt() + c) * (-0.5 * t).exp() - c;
    if u > 0.0 {
        Ok(GronwallValue::Finite(1.0 / (u * u)))
    } else {
        Ok(GronwallValue::Diverged)
    }
}

/// Blow-up time of the comparison solution started at `z0` with constant `c`:
/// `2·ln((z0^{−1/2} + c)/c)`.
pub fn blowup_time(z0: f64, c: f64) -> Result<f64> {
    check_positive("z0", z0)?;
    check_positive("C", c)?;
    Ok(2.0 * ((1.0 / z0.sqrt() + c) / c).ln())
}

/// Existence time `T₀(N₀, T) = 2·ln((z0^{−1/2} + C)/C)` with `z0 = scale·N₀`;
/// strictly decreasing in both `N₀` and `C`.
pub fn t0(n0: f64, c: f64, z0_scale: f64) -> Result<f64> {
    check_positive("N0", n0)?;
    check_positive("z0 scale", z0_scale)?;
    blowup_time(z0_scale * n0, c)
}

/// Optimal existence horizon `T* = sup_T min{T, T₀(N₀, T)}`.
///
/// For a constant profile the sup is attained at `T = T₀`, so `T*` is the
/// blow-up time itself. For the affine profile, `T ↦ T − T₀(N₀, T)` is
/// strictly increasing (both terms move the same way), so `T*` is the unique
/// fixed point `T = T₀(N₀, T)`, bracketed by doubling and bisected to 1e−10.
pub fn t_star(query: &BoundsQuery) -> Result<f64> {
    let z0 = query.z0();
    match query.profile {
        CProfile::Constant(c0) => blowup_time(z0, c0),
        CProfile::Affine(_) => {
            let f = |t: f64| -> Result<f64> { Ok(t - blowup_time(z0, query.profile.value_at(t))?) };
            let mut lo = 0.0;
            let mut hi = 1.0;
            let mut grow = 0;
            while f(hi)? < 0.0 {
                lo = hi;
                hi *= 2.0;
                grow += 1;
                if grow > 60 {
                    return Err(Error::Bracket(format!(
                        "no sign change for the T* fixed point up to T = {hi:e} \
                         (N0 = {}, scale = {})",
                        query.n0, query.z0_scale
                    )));
                }
            }
            while hi - lo > 1e-11 {
                let mid = 0.5 * (lo + hi);
                if f(mid)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

/// The logarithmic growth bound
/// `G(t) ≤ exp((C·t + 2·√(ln(1+G₀)))²/4) − 1`, finite for all finite times.
///
/// At `t = 0` the exponent collapses to `ln(1+G₀)`, so the bound equals `G₀`
/// exactly.
pub fn log_energy_bound(g0: f64, c: f64, t: f64) -> Result<f64> {
    if !(g0 >= 0.0 && g0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "G0 must be nonnegative and finite, got {g0}"
        )));
    }
    check_positive("C", c)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    let root = c * t + 2.0 * (1.0 + g0).ln().sqrt();
    Ok((root * root / 4.0).exp() - 1.0)
}

/// One point of the existence-time curve: the candidate horizon `T` and the
/// existence time `T₀(N₀, T)` under the query's profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub t0: f64,
}

/// Samples the `(T, T₀(N₀, T))` curve on `[0, t_max]`; the discrete argmax of
/// `min{T, T₀}` lands within one grid cell of [`t_star`].
pub fn bounds_curve(query: &BoundsQuery, t_max: f64, samples: usize) -> Result<Vec<CurvePoint>> {
    check_positive("t_max", t_max)?;
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "the curve needs at least 2 samples, got {samples}"
        )));
    }
    let z0 = query.z0();
    (0..samples)
        .map(|i| {
            let t = t_max * i as f64 / (samples - 1) as f64;
            Ok(CurvePoint { t, t0: blowup_time(z0, query.profile.value_at(t))? })
        })
        .collect()
}
