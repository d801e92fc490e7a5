//! Along-trajectory diagnostics: the two energy functionals, the cumulative
//! dissipation, dimension-dependent blow-up indicators with the continuation
//! monitor built on them, and the random-polynomial inequality suites.
//!
//! Everything here works on modal coefficient vectors; the eigenbasis is
//! orthonormal in L², so L²-type norms are plain coefficient sums and the
//! differential operators act diagonally (`‖∇u‖² = Σ λ c²`, `‖Δu‖² = Σ λ²c²`).

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dynamics::{PhysicalParams, Sample, SampleVerdict, Termination};
use crate::spectral::{
    default_sup_resolution, eigenpairs, l4_norm, sobolev_norm, sup_norm, weighted_seminorm,
    DomainSpec, SpectralBasis,
};
use crate::{Error, Result};

/// One diagnostics row, serialised as written (the field names double as the
/// CSV header and the NDJSON keys).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Weighted energy `(τ/2)‖∇ψ_tt‖² + (τc²/2)‖Δψ_t‖²`.
    #[serde(rename = "E")]
    pub e: f64,
    /// Unweighted energy `‖∇ψ_tt‖² + ‖Δψ‖² + ‖Δψ_t‖²`.
    #[serde(rename = "E_full")]
    pub e_full: f64,
    /// Cumulative dissipation `∫₀^t (‖ψ_ttt‖² + δ‖𝔎∗Δψ_tt‖²)`, trapezoid on
    /// the output stride.
    #[serde(rename = "D_cum")]
    pub d_cum: f64,
    /// Blow-up indicator for the configured dimension.
    #[serde(rename = "Q")]
    pub q: f64,
    pub grad_psi_tt: f64,
    pub lap_psi: f64,
    pub lap_psi_t: f64,
    pub psi_ttt: f64,
    pub conv_lap_psi_tt: f64,
}

fn check_lengths(basis: &SpectralBasis, arrays: &[&Array1<f64>]) -> Result<()> {
    let n = basis.n_modes();
    for a in arrays {
        if a.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "coefficient vector has length {}, basis has {n} modes",
                a.len()
            )));
        }
    }
    Ok(())
}

fn sum_weighted(eigenvalues: &[f64], coeffs: &Array1<f64>, power: u32) -> f64 {
    coeffs.iter().zip(eigenvalues).map(|(c, l)| l.powi(power as i32) * c * c).sum()
}

/// The weighted energy `E(t) = (τ/2)‖∇ψ_tt‖² + (τc²/2)‖Δψ_t‖²`.
pub fn energy(
    params: &PhysicalParams,
    basis: &SpectralBasis,
    xi_t: &Array1<f64>,
    xi_tt: &Array1<f64>,
) -> Result<f64> {
    check_lengths(basis, &[xi_t, xi_tt])?;
    let l = basis.eigenvalues();
    let tau = params.tau();
    let c2 = params.c() * params.c();
    Ok(0.5 * tau * sum_weighted(l, xi_tt, 1) + 0.5 * tau * c2 * sum_weighted(l, xi_t, 2))
}

/// The unweighted energy `𝐄[ψ] = ‖∇ψ_tt‖² + ‖Δψ‖² + ‖Δψ_t‖²`.
pub fn full_energy(
    basis: &SpectralBasis,
    xi: &Array1<f64>,
    xi_t: &Array1<f64>,
    xi_tt: &Array1<f64>,
) -> Result<f64> {
    check_lengths(basis, &[xi, xi_t, xi_tt])?;
    let l = basis.eigenvalues();
    Ok(sum_weighted(l, xi_tt, 1) + sum_weighted(l, xi, 2) + sum_weighted(l, xi_t, 2))
}

/// Trapezoid accumulator for the cumulative dissipation; fed once per output
/// record, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DissipationAccumulator {
    total: f64,
    prev: Option<(f64, f64)>,
}

impl DissipationAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds the accumulator mid-run (checkpoint resume); `prev` is the
    /// `(t, integrand)` pair of the record current when the state was saved.
    pub fn restore(total: f64, prev: Option<(f64, f64)>) -> Self {
        Self { total, prev }
    }

    /// Folds in the integrand at time `t` and returns the running total.
    pub fn push(&mut self, t: f64, integrand: f64) -> f64 {
        if let Some((t0, f0)) = self.prev {
            self.total += 0.5 * (t - t0) * (f0 + integrand);
        }
        self.prev = Some((t, integrand));
        self.total
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// The last `(t, integrand)` pair, for checkpointing.
    pub fn prev(&self) -> Option<(f64, f64)> {
        self.prev
    }
}

/// Dimension-dependent blow-up indicator.
///
/// The proven `d ≤ 2` criterion tracks `‖ψ_t‖_{H¹} + ‖ψ_tt‖_{L²}` and the
/// 3D criterion `‖ψ_t‖_{H^{3/2}} + ‖ψ_tt‖_{H^{1/2}}`. The scaled variant
/// uses the dimension-generic pair `(H^{d/2}, H^{d/2−1})`, which for `d = 3`
/// coincides with the proven one and for `d = 1` dips into a negative-order
/// norm.
pub fn blowup_indicator(
    basis: &SpectralBasis,
    xi_t: &Array1<f64>,
    xi_tt: &Array1<f64>,
    dim: usize,
    scaled: bool,
) -> Result<f64> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!(
            "indicator dimension must be 1, 2, or 3, got {dim}"
        )));
    }
    check_lengths(basis, &[xi_t, xi_tt])?;
    let (s_t, s_tt) = if scaled {
        (dim as f64 / 2.0, dim as f64 / 2.0 - 1.0)
    } else if dim <= 2 {
        (1.0, 0.0)
    } else {
        (1.5, 0.5)
    };
    let l = basis.eigenvalues();
    Ok(weighted_seminorm(l, xi_t, s_t) + weighted_seminorm(l, xi_tt, s_tt))
}

/// Continuation-monitor policy: the cap `M₀`, the dimension whose criterion
/// applies, and whether to use the scaled norm pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSpec {
    cap: f64,
    dim: usize,
    scaled: bool,
}

impl MonitorSpec {
    pub fn new(cap: f64, dim: usize, scaled: bool) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "monitor cap must be positive and finite, got {cap}"
            )));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "monitor dimension must be 1, 2, or 3, got {dim}"
            )));
        }
        Ok(Self { cap, dim, scaled })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled(&self) -> bool {
        self.scaled
    }
}

/// Evaluates the monitor on one record: halts with `MonitorFired` on the
/// first sample whose indicator exceeds the cap.
pub fn monitor_verdict(
    basis: &SpectralBasis,
    spec: &MonitorSpec,
    sample: &Sample,
) -> SampleVerdict {
    let q = blowup_indicator(basis, &sample.xi_t, &sample.xi_tt, spec.dim, spec.scaled)
        .expect("monitor spec was validated at construction");
    if q > spec.cap {
        SampleVerdict::Halt(Termination::MonitorFired { t: sample.t, q })
    } else {
        SampleVerdict::Continue
    }
}

/// Builds the diagnostics row for a state record, folding its dissipation
/// contribution into the accumulator.
///
/// The `Q` column uses the monitor's dimension and scaling when a monitor is
/// configured, and the plain basis-dimension indicator otherwise.
pub fn record_from_sample(
    params: &PhysicalParams,
    basis: &SpectralBasis,
    sample: &Sample,
    monitor: Option<&MonitorSpec>,
    acc: &mut DissipationAccumulator,
) -> Result<DiagnosticsRecord> {
    check_lengths(
        basis,
        &[&sample.xi, &sample.xi_t, &sample.xi_tt, &sample.xi_ttt, &sample.conv_xi_tt],
    )?;
    let l = basis.eigenvalues();
    let grad_psi_tt = sum_weighted(l, &sample.xi_tt, 1).sqrt();
    let lap_psi = sum_weighted(l, &sample.xi, 2).sqrt();
    let lap_psi_t = sum_weighted(l, &sample.xi_t, 2).sqrt();
    let psi_ttt = sample.xi_ttt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let conv_lap_psi_tt = sum_weighted(l, &sample.conv_xi_tt, 2).sqrt();

    let (dim, scaled) = monitor.map_or((basis.dim(), false), |m| (m.dim, m.scaled));
    let q = blowup_indicator(basis, &sample.xi_t, &sample.xi_tt, dim, scaled)?;
    let integrand = psi_ttt * psi_ttt + params.kernel().delta() * conv_lap_psi_tt * conv_lap_psi_tt;
    let d_cum = acc.push(sample.t, integrand);

    Ok(DiagnosticsRecord {
        t: sample.t,
        e: energy(params, basis, &sample.xi_t, &sample.xi_tt)?,
        e_full: full_energy(basis, &sample.xi, &sample.xi_t, &sample.xi_tt)?,
        d_cum,
        q,
        grad_psi_tt,
        lap_psi,
        lap_psi_t,
        psi_ttt,
        conv_lap_psi_tt,
    })
}

// ---------------------------------------------------------------------------
// Inequality suites
// ---------------------------------------------------------------------------

/// Ratios `lhs / rhs-without-constant` of the functional inequalities on one
/// coefficient vector; `None` for inequalities outside the basis dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityRatios {
    /// 2D log-Sobolev sup bound: `‖u‖_∞ / (‖u‖_{H¹}·√(ln(1+‖u‖_{H²})) + 1)`.
    pub bg: Option<f64>,
    /// 3D variant: `‖u‖_∞ / (‖u‖_{H^{3/2}}·√(ln(1+‖u‖_{H²})) + 1)`.
    pub bgw: Option<f64>,
    /// L⁴ interpolation `‖u‖_{L⁴} / (‖u‖_{L²}^{1−d/4}·‖u‖_{H¹}^{d/4})`.
    pub lady: f64,
    /// 3D half-order interpolation `‖u‖_{L⁴} / (‖u‖_{H^{1/2}}^{1/2}·‖u‖_{H¹}^{1/2})`.
    pub l4: Option<f64>,
}

fn safe_ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Computes every inequality ratio applicable to the basis dimension
/// (2 or 3) on one coefficient vector.
pub fn inequality_ratios(basis: &SpectralBasis, coeffs: &Array1<f64>) -> Result<InequalityRatios> {
    let dim = basis.dim();
    if !(dim == 2 || dim == 3) {
        return Err(Error::InvalidParameter(format!(
            "the inequality suite applies in dimension 2 or 3, got {dim}"
        )));
    }
    let sup = sup_norm(basis, coeffs, default_sup_resolution(basis))?;
    let l4v = l4_norm(basis, coeffs)?;
    let l2 = sobolev_norm(basis, coeffs, 0.0)?;
    let h1 = sobolev_norm(basis, coeffs, 1.0)?;
    let h2 = sobolev_norm(basis, coeffs, 2.0)?;
    let lady = safe_ratio(l4v, l2.powf(1.0 - dim as f64 / 4.0) * h1.powf(dim as f64 / 4.0));
    if dim == 2 {
        let bg = safe_ratio(sup, h1 * (1.0 + h2).ln().sqrt() + 1.0);
        Ok(InequalityRatios { bg: Some(bg), bgw: None, lady, l4: None })
    } else {
        let h32 = sobolev_norm(basis, coeffs, 1.5)?;
        let h12 = sobolev_norm(basis, coeffs, 0.5)?;
        let bgw = safe_ratio(sup, h32 * (1.0 + h2).ln().sqrt() + 1.0);
        let l4i = safe_ratio(l4v, h12.sqrt() * h1.sqrt());
        Ok(InequalityRatios { bg: None, bgw: Some(bgw), lady, l4: Some(l4i) })
    }
}

/// Maxima of the inequality ratios over a seeded corpus of random
/// trigonometric polynomials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub max_bg: Option<f64>,
    pub max_bgw: Option<f64>,
    pub max_lady: f64,
    pub max_l4: Option<f64>,
}

fn inequality_basis(dim: usize) -> Result<SpectralBasis> {
    // Rich enough to mix low and moderately high modes while keeping the
    // sup-norm lattice cheap: 36 modes in 2D, 40 in 3D.
    let (lengths, n) = match dim {
        2 => (vec![std::f64::consts::PI; 2], 36),
        3 => (vec![std::f64::consts::PI; 3], 40),
        d => {
            return Err(Error::InvalidParameter(format!(
                "the inequality suite applies in dimension 2 or 3, got {d}"
            )))
        }
    };
    eigenpairs(&DomainSpec::new(dim, lengths)?, n)
}

/// Draws the corpus: smooth random fields with independent `N(0,1)/(1+λ)`
/// coefficients, all from one stream so the corpus depends only on the seed.
fn corpus_fields(basis: &SpectralBasis, samples: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            Array1::from_iter(basis.eigenvalues().iter().map(|l| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g / (1.0 + l)
            }))
        })
        .collect()
}

fn fold_report(
    dim: usize,
    samples: usize,
    seed: u64,
    ratios: Vec<InequalityRatios>,
) -> InequalityReport {
    let fold = |get: fn(&InequalityRatios) -> Option<f64>| -> Option<f64> {
        ratios.iter().filter_map(get).fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    };
    InequalityReport {
        dim,
        samples,
        seed,
        max_bg: fold(|r| r.bg),
        max_bgw: fold(|r| r.bgw),
        max_lady: ratios.iter().map(|r| r.lady).fold(0.0, f64::max),
        max_l4: fold(|r| r.l4),
    }
}

/// Runs the inequality suite on a seeded corpus. Dispatches to the parallel
/// implementation when the `parallel` feature is active; both paths produce
/// identical reports because the corpus is drawn sequentially and the maxima
/// are folded in sample order.
pub fn verify_inequalities(dim: usize, samples: usize, seed: u64) -> Result<InequalityReport> {
    #[cfg(feature = "parallel")]
    {
        verify_inequalities_par(dim, samples, seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        verify_inequalities_seq(dim, samples, seed)
    }
}

/// Sequential inequality suite; always available.
pub fn verify_inequalities_seq(dim: usize, samples: usize, seed: u64) -> Result<InequalityReport> {
    let basis = inequality_basis(dim)?;
    let fields = corpus_fields(&basis, samples, seed);
    let ratios = fields.iter().map(|c| inequality_ratios(&basis, c)).collect::<Result<Vec<_>>>()?;
    Ok(fold_report(dim, samples, seed, ratios))
}

/// Parallel inequality suite over the corpus samples.
#[cfg(feature = "parallel")]
pub fn verify_inequalities_par(dim: usize, samples: usize, seed: u64) -> Result<InequalityReport> {
    use rayon::prelude::*;
    let basis = inequality_basis(dim)?;
    let fields = corpus_fields(&basis, samples, seed);
    let ratios =
        fields.par_iter().map(|c| inequality_ratios(&basis, c)).collect::<Result<Vec<_>>>()?;
    Ok(fold_report(dim, samples, seed, ratios))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn basis_nd(dim: usize, n: usize) -> SpectralBasis {
        eigenpairs(&DomainSpec::new(dim, vec![PI; dim]).unwrap(), n).unwrap()
    }

    fn params(tau: f64, c: f64, delta: f64) -> PhysicalParams {
        let kernel =
            if delta > 0.0 { KernelSpec::abel(0.5, delta).unwrap() } else { KernelSpec::zero() };
        PhysicalParams::new(tau, c, 0.0, kernel).unwrap()
    }

    #[test]
    fn energy_matches_the_hand_example() {
        // τ = 2, c = 1, single mode λ = 1, ξ_t = ξ_tt = 1:
        // E = (2/2)·1·1 + (2·1/2)·1·1 = 2.
        let basis = basis_nd(1, 1);
        let one = Array1::from_vec(vec![1.0]);
        let e = energy(&params(2.0, 1.0, 0.0), &basis, &one, &one).unwrap();
        assert_relative_eq!(e, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn full_energy_traces_the_oscillator_identity() {
        // For ξ = cos t on the λ = 1 mode, 𝐄 = cos²t + cos²t + sin²t = 1 + cos²t.
        let basis = basis_nd(1, 1);
        for t in [0.0f64, 0.3, 1.7, 4.0] {
            let xi = Array1::from_vec(vec![t.cos()]);
            let xi_t = Array1::from_vec(vec![-t.sin()]);
            let xi_tt = Array1::from_vec(vec![-t.cos()]);
            let e = full_energy(&basis, &xi, &xi_t, &xi_tt).unwrap();
            assert_relative_eq!(e, 1.0 + t.cos().powi(2), max_relative = 1e-14);
        }
    }

    #[test]
    fn dissipation_accumulator_is_a_trapezoid_rule() {
        let mut acc = DissipationAccumulator::new();
        assert_eq!(acc.push(0.0, 1.0), 0.0);
        assert_relative_eq!(acc.push(1.0, 3.0), 2.0);
        assert_relative_eq!(acc.push(3.0, 5.0), 10.0);
        // Restoring from the mid-state continues identically.
        let mut resumed = DissipationAccumulator::restore(2.0, Some((1.0, 3.0)));
        assert_eq!(resumed.push(3.0, 5.0), acc.total());
    }

    #[test]
    fn blowup_indicator_matches_frozen_single_mode_values() {
        // 2D mode (1,1): λ = 2 → H¹ + L² = √3 + 1.
        let basis2 = basis_nd(2, 1);
        let one = Array1::from_vec(vec![1.0]);
        let q2 = blowup_indicator(&basis2, &one, &one, 2, false).unwrap();
        assert_relative_eq!(q2, 3.0f64.sqrt() + 1.0, max_relative = 1e-14);
        // 3D mode (1,1,1): λ = 3 → H^{3/2} + H^{1/2} = 4^{3/4} + 4^{1/4}.
        let basis3 = basis_nd(3, 1);
        let q3 = blowup_indicator(&basis3, &one, &one, 3, false).unwrap();
        assert_relative_eq!(q3, 4.0f64.powf(0.75) + 4.0f64.powf(0.25), max_relative = 1e-14);
        // Scaled d = 3 coincides with the proven 3D pair.
        let q3s = blowup_indicator(&basis3, &one, &one, 3, true).unwrap();
        assert_relative_eq!(q3, q3s, max_relative = 1e-15);
        // Scaled d = 1 uses the negative-order norm: 2^{1/4} + 2^{−1/4} on λ = 1.
        let basis1 = basis_nd(1, 1);
        let q1s = blowup_indicator(&basis1, &one, &one, 1, true).unwrap();
        assert_relative_eq!(q1s, 2.0f64.powf(0.25) + 2.0f64.powf(-0.25), max_relative = 1e-14);
        assert!(blowup_indicator(&basis1, &one, &one, 4, false).is_err());
    }

    #[test]
    fn indicator_ignores_zero_padding() {
        let small = basis_nd(2, 2);
        let large = basis_nd(2, 5);
        let c_small = Array1::from_vec(vec![0.7, -0.3]);
        let mut c_large = Array1::zeros(5);
        c_large[0] = 0.7;
        c_large[1] = -0.3;
        let qs = blowup_indicator(&small, &c_small, &c_small, 2, false).unwrap();
        let ql = blowup_indicator(&large, &c_large, &c_large, 2, false).unwrap();
        assert_relative_eq!(qs, ql, max_relative = 1e-15);
        let es = full_energy(&small, &c_small, &c_small, &c_small).unwrap();
        let el = full_energy(&large, &c_large, &c_large, &c_large).unwrap();
        assert_relative_eq!(es, el, max_relative = 1e-15);
    }

    fn synthetic_sample(t: f64, amp: f64, n: usize) -> Sample {
        Sample {
            step: (t * 1000.0) as u64,
            t,
            xi: Array1::from_elem(n, amp),
            xi_t: Array1::from_elem(n, amp),
            xi_tt: Array1::from_elem(n, amp),
            xi_ttt: Array1::from_elem(n, amp),
            conv_xi_tt: Array1::from_elem(n, 0.5 * amp),
        }
    }

    #[test]
    fn monitor_fires_on_first_exceedance_and_earlier_for_tighter_caps() {
        let basis = basis_nd(2, 1);
        let ramp: Vec<Sample> =
            (0..10).map(|i| synthetic_sample(i as f64 * 0.1, i as f64, 1)).collect();
        let first_fire = |cap: f64| -> Option<f64> {
            let spec = MonitorSpec::new(cap, 2, false).unwrap();
            ramp.iter().find_map(|s| match monitor_verdict(&basis, &spec, s) {
                SampleVerdict::Halt(Termination::MonitorFired { t, .. }) => Some(t),
                _ => None,
            })
        };
        let loose = first_fire(20.0).unwrap();
        let tight = first_fire(5.0).unwrap();
        assert!(tight <= loose, "tighter caps must fire no later ({tight} vs {loose})");
        assert!(first_fire(1e9).is_none());
    }

    #[test]
    fn record_wires_all_columns_consistently() {
        let basis = basis_nd(2, 3);
        let p = params(1.5, 0.8, 0.6);
        let mut acc = DissipationAccumulator::new();
        let s0 = synthetic_sample(0.0, 0.4, 3);
        let s1 = synthetic_sample(0.5, 0.8, 3);
        let r0 = record_from_sample(&p, &basis, &s0, None, &mut acc).unwrap();
        let r1 = record_from_sample(&p, &basis, &s1, None, &mut acc).unwrap();
        // Energy identity against the norm columns.
        let tau = 1.5;
        let c2 = 0.8 * 0.8;
        assert_relative_eq!(
            r1.e,
            0.5 * tau * r1.grad_psi_tt.powi(2) + 0.5 * tau * c2 * r1.lap_psi_t.powi(2),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            r1.e_full,
            r1.grad_psi_tt.powi(2) + r1.lap_psi.powi(2) + r1.lap_psi_t.powi(2),
            max_relative = 1e-13
        );
        // Q column is the basis-dimension indicator by default.
        let q = blowup_indicator(&basis, &s1.xi_t, &s1.xi_tt, 2, false).unwrap();
        assert_relative_eq!(r1.q, q, max_relative = 1e-15);
        // Dissipation: trapezoid of ‖ψ_ttt‖² + δ‖𝔎∗Δψ_tt‖².
        let integrand = |r: &DiagnosticsRecord| r.psi_ttt.powi(2) + 0.6 * r.conv_lap_psi_tt.powi(2);
        assert_eq!(r0.d_cum, 0.0);
        assert_relative_eq!(
            r1.d_cum,
            0.5 * 0.5 * (integrand(&r0) + integrand(&r1)),
            max_relative = 1e-13
        );
    }

    #[test]
    fn single_mode_ratios_match_the_frozen_oracle_values() {
        let one = Array1::from_vec(vec![1.0]);
        let r2 = inequality_ratios(&basis_nd(2, 1), &one).unwrap();
        assert_relative_eq!(r2.bg.unwrap(), 0.209_460_288_499_411, max_relative = 1e-9);
        assert_relative_eq!(r2.lady, 0.525_037_567_904_332, max_relative = 1e-9);
        assert!(r2.bgw.is_none() && r2.l4.is_none());
        let r3 = inequality_ratios(&basis_nd(3, 1), &one).unwrap();
        assert_relative_eq!(r3.bgw.unwrap(), 0.110_706_614_447_354, max_relative = 1e-9);
        assert_relative_eq!(r3.lady, 0.341_533_684_231_438, max_relative = 1e-9);
        assert_relative_eq!(r3.l4.unwrap(), 0.341_533_684_231_438, max_relative = 1e-9);
    }

    #[test]
    fn zero_field_has_zero_ratios() {
        let z = Array1::zeros(1);
        let r = inequality_ratios(&basis_nd(2, 1), &z).unwrap();
        assert_eq!((r.bg.unwrap(), r.lady), (0.0, 0.0));
    }

    #[test]
    fn inequality_corpus_is_deterministic_and_finite() {
        let a = verify_inequalities(2, 20, 7).unwrap();
        let b = verify_inequalities(2, 20, 7).unwrap();
        assert_eq!(a, b, "same seed must reproduce the report exactly");
        assert!(a.max_bg.unwrap().is_finite() && a.max_bg.unwrap() > 0.0);
        assert!(a.max_lady.is_finite() && a.max_lady > 0.0);
        let c = verify_inequalities(2, 20, 8).unwrap();
        assert_ne!(a.max_lady, c.max_lady, "different seeds should move the maxima");
        assert!(verify_inequalities(1, 5, 0).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_corpora_agree_exactly() {
        let a = verify_inequalities_seq(3, 12, 11).unwrap();
        let b = verify_inequalities_par(3, 12, 11).unwrap();
        assert_eq!(a, b);
    }
}
