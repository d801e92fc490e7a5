//! Dirichlet–Laplace sine eigenbasis on a box, and everything built on it:
//! eigenpair enumeration, projection of initial data, the cubic interaction
//! tensor, and spectral / grid norms.
//!
//! On `Ω = Π_a (0, L_a)` the eigenfunctions are
//! `v_m(x) = Π_a √(2/L_a)·sin(m_a π x_a / L_a)` with eigenvalues
//! `λ_m = Σ_a (m_a π / L_a)²`, orthonormal in L². All field-space work
//! (projection, L⁴ norms, the interaction tensor) evaluates the basis on
//! tensorised Gauss–Legendre grids; sup norms sample a uniform interior
//! lattice and are therefore lower bounds that converge under refinement.

use ndarray::{Array1, Array2, Array3};

use crate::{Error, Result};

/// Axis-aligned box domain `Π_a (0, L_a)` in 1, 2, or 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    dim: usize,
    lengths: Vec<f64>,
}

impl DomainSpec {
    /// Validates `dim ∈ {1,2,3}` and one positive finite length per axis.
    pub fn new(dim: usize, lengths: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "domain dimension must be 1, 2, or 3, got {dim}"
            )));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "expected {dim} side lengths, got {}",
                lengths.len()
            )));
        }
        if let Some(bad) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "side lengths must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { dim, lengths })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }
}

/// The `n` lowest Dirichlet–Laplace eigenpairs on a box, sorted by eigenvalue
/// with lexicographic tie-breaking on the multi-index (so the ordering is
/// deterministic even on symmetric domains).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    domain: DomainSpec,
    /// 1-based per-axis mode numbers; axes beyond `dim` are padded with 1 and
    /// carry no meaning.
    modes: Vec<[usize; 3]>,
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn modes(&self) -> &[[usize; 3]] {
        &self.modes
    }

    /// Eigenvalues in nondecreasing order, aligned with `modes`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Largest per-axis mode number present in the basis.
    pub fn max_index(&self) -> usize {
        self.modes.iter().flat_map(|m| m[..self.dim()].iter()).copied().max().unwrap_or(1)
    }

    fn check_coeffs(&self, coeffs: &Array1<f64>) -> Result<()> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient vector has length {}, basis has {} modes",
                coeffs.len(),
                self.n_modes()
            )));
        }
        Ok(())
    }
}

fn lambda_of(domain: &DomainSpec, idx: &[usize; 3]) -> f64 {
    (0..domain.dim)
        .map(|a| {
            let f = idx[a] as f64 * std::f64::consts::PI / domain.lengths[a];
            f * f
        })
        .sum()
}

/// Enumerates the `n_modes` lowest eigenpairs.
///
/// Candidate multi-indices are taken from an expanding box `{1..=side}^dim`;
/// the box is grown until the n-th smallest eigenvalue is provably below the
/// eigenvalue of any index outside the box, which makes the enumeration exact
/// for arbitrarily anisotropic domains.
pub fn eigenpairs(domain: &DomainSpec, n_modes: usize) -> Result<SpectralBasis> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("basis needs at least one mode".into()));
    }
    let dim = domain.dim;
    let l_max = domain.lengths.iter().cloned().fold(0.0f64, f64::max);
    let mut side = (n_modes as f64).powf(1.0 / dim as f64).ceil() as usize + 1;
    loop {
        let mut candidates: Vec<([usize; 3], f64)> = Vec::new();
        let bound = |a: usize| if a < dim { side } else { 1 };
        for m0 in 1..=bound(0) {
            for m1 in 1..=bound(1) {
                for m2 in 1..=bound(2) {
                    let idx = [m0, m1, m2];
                    candidates.push((idx, lambda_of(domain, &idx)));
                }
            }
        }
        if candidates.len() >= n_modes {
            candidates.sort_by(|(ia, la), (ib, lb)| {
                la.partial_cmp(lb).expect("finite eigenvalues").then(ia.cmp(ib))
            });
            // Any index outside the box has some component ≥ side+1, hence
            // eigenvalue > ((side+1)·π/L_max)².
            let outside_floor = {
                let f = (side + 1) as f64 * std::f64::consts::PI / l_max;
                f * f
            };
            if candidates[n_modes - 1].1 < outside_floor {
                let (modes, eigenvalues) = candidates.into_iter().take(n_modes).unzip();
                return Ok(SpectralBasis { domain: domain.clone(), modes, eigenvalues });
            }
        }
        side *= 2;
    }
}

// ---------------------------------------------------------------------------
// Gauss–Legendre quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            // P_n'(x) = n·(x·P_n − P_{n−1})/(x² − 1)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // The cosine guesses run right-to-left; present nodes ascending.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Gauss–Legendre rule mapped onto `[0, length]`.
fn gauss_legendre_on(length: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let half = 0.5 * length;
    (xs.iter().map(|x| half * (x + 1.0)).collect(), ws.iter().map(|w| w * half).collect())
}

// ---------------------------------------------------------------------------
// Separable basis evaluation
// ---------------------------------------------------------------------------

/// `table[m−1][p] = √(2/L)·sin(m·π·x_p/L)` for one axis.
fn sin_table(length: f64, m_max: usize, points: &[f64]) -> Array2<f64> {
    let norm = (2.0 / length).sqrt();
    Array2::from_shape_fn((m_max, points.len()), |(m, p)| {
        norm * ((m + 1) as f64 * std::f64::consts::PI * points[p] / length).sin()
    })
}

/// `table[m−1][p] = √(2/L)·(mπ/L)·cos(m·π·x_p/L)` — the axis derivative.
fn dsin_table(length: f64, m_max: usize, points: &[f64]) -> Array2<f64> {
    let norm = (2.0 / length).sqrt();
    Array2::from_shape_fn((m_max, points.len()), |(m, p)| {
        let freq = (m + 1) as f64 * std::f64::consts::PI / length;
        norm * freq * (freq * points[p]).cos()
    })
}

/// Contracts a rank-3 tensor with one matrix per axis:
/// `out[i,j,k] = Σ_{pqr} tables[0][i,p]·tables[1][j,q]·tables[2][k,r]·t[p,q,r]`.
///
/// Unused axes are handled by 1×1 identity tables. This single helper powers
/// both field evaluation (tables = transposed sine tables) and projection
/// (tables = weight-folded sine tables).
fn contract3(t: Array3<f64>, tables: [&Array2<f64>; 3]) -> Array3<f64> {
    let mut cur = t;
    for table in tables {
        let (i0, i1, i2) = cur.dim();
        assert_eq!(table.ncols(), i0, "contraction table width mismatch");
        let flat = cur.into_shape_with_order((i0, i1 * i2)).expect("contiguous tensor reshape");
        let red = table.dot(&flat);
        let out0 = red.nrows();
        let r3 = red.into_shape_with_order((out0, i1, i2)).expect("contiguous tensor reshape");
        // Rotate the freshly contracted axis to the back; after three rounds
        // the axes return to their original order.
        cur = r3.permuted_axes([1, 2, 0]).as_standard_layout().into_owned();
    }
    cur
}

/// Dense (max₀ × max₁ × max₂) coefficient box with the basis coefficients
/// scattered by multi-index; absent box entries are zero.
fn scatter_coeffs(basis: &SpectralBasis, coeffs: &Array1<f64>) -> Array3<f64> {
    let dim = basis.dim();
    let max_a =
        |a: usize| if a < dim { basis.modes.iter().map(|m| m[a]).max().unwrap() } else { 1 };
    let mut boxed = Array3::zeros((max_a(0), max_a(1), max_a(2)));
    for (k, m) in basis.modes.iter().enumerate() {
        boxed[[m[0] - 1, m[1] - 1, m[2] - 1]] = coeffs[k];
    }
    boxed
}

/// Per-axis point sets for a tensor grid; virtual axes get a single dummy
/// point paired with an identity table.
struct AxisGrid {
    points: Vec<Vec<f64>>,
    weights: Option<Vec<Vec<f64>>>,
}

impl AxisGrid {
    fn uniform_interior(domain: &DomainSpec, resolution: usize) -> Self {
        let points = (0..3)
            .map(|a| {
                if a < domain.dim {
                    let l = domain.lengths[a];
                    (1..resolution).map(|j| j as f64 * l / resolution as f64).collect()
                } else {
                    vec![0.0]
                }
            })
            .collect();
        Self { points, weights: None }
    }

    fn gauss(domain: &DomainSpec, nodes: usize) -> Self {
        let mut points = Vec::with_capacity(3);
        let mut weights = Vec::with_capacity(3);
        for a in 0..3 {
            if a < domain.dim {
                let (x, w) = gauss_legendre_on(domain.lengths[a], nodes);
                points.push(x);
                weights.push(w);
            } else {
                points.push(vec![0.0]);
                weights.push(vec![1.0]);
            }
        }
        Self { points, weights: Some(weights) }
    }
}

/// Evaluates the expansion on the tensor grid; `derivative_axis` swaps one
/// axis factor for its derivative (for gradient quadrature).
fn evaluate_on_grid(
    basis: &SpectralBasis,
    coeffs: &Array1<f64>,
    grid: &AxisGrid,
    derivative_axis: Option<usize>,
) -> Array3<f64> {
    let dim = basis.dim();
    let boxed = scatter_coeffs(basis, coeffs);
    let mut tables = Vec::with_capacity(3);
    for a in 0..3 {
        if a < dim {
            let m_max = boxed.shape()[a];
            let l = basis.domain.lengths[a];
            let t = if derivative_axis == Some(a) {
                dsin_table(l, m_max, &grid.points[a])
            } else {
                sin_table(l, m_max, &grid.points[a])
            };
            tables.push(t.t().to_owned());
        } else {
            tables.push(Array2::ones((1, 1)));
        }
    }
    contract3(boxed, [&tables[0], &tables[1], &tables[2]])
}

/// Σ over the tensor grid of `w·f(values)`, with separable weights.
fn weighted_grid_sum(values: &Array3<f64>, weights: &[Vec<f64>], f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for ((p, q, r), v) in values.indexed_iter() {
        total += weights[0][p] * weights[1][q] * weights[2][r] * f(*v);
    }
    total
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Spectral Sobolev norm `(Σ_k (1+λ_k)^s·c_k²)^{1/2}` for `s ≥ 0`.
///
/// For `s = 1` this coincides with the standard `(‖u‖² + ‖∇u‖²)^{1/2}` on the
/// eigenbasis; `s = 0` is the plain L² norm.
pub fn sobolev_norm(basis: &SpectralBasis, coeffs: &Array1<f64>, s: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Sobolev exponent must be finite and >= 0, got {s}"
        )));
    }
    basis.check_coeffs(coeffs)?;
    Ok(weighted_seminorm(basis.eigenvalues(), coeffs, s))
}

/// Homogeneous spectral seminorm `(Σ_k λ_k^s·c_k²)^{1/2}`.
///
/// On the Dirichlet eigenbasis `s = 1` is `‖∇u‖_{L²}` and `s = 2` is
/// `‖Δu‖_{L²}` (Parseval); fractional and negative orders are admitted since
/// every eigenvalue is strictly positive.
pub fn homogeneous_seminorm(basis: &SpectralBasis, coeffs: &Array1<f64>, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("seminorm exponent must be finite, got {s}")));
    }
    basis.check_coeffs(coeffs)?;
    Ok(coeffs.iter().zip(basis.eigenvalues()).map(|(c, l)| l.powf(s) * c * c).sum::<f64>().sqrt())
}

/// `(Σ (1+λ)^s c²)^{1/2}` without the sign restriction on `s`; negative
/// orders are needed internally by the scaled blow-up indicator in d = 1.
pub(crate) fn weighted_seminorm(eigenvalues: &[f64], coeffs: &Array1<f64>, s: f64) -> f64 {
    coeffs.iter().zip(eigenvalues).map(|(c, l)| (1.0 + l).powf(s) * c * c).sum::<f64>().sqrt()
}

/// Grid-sampled sup norm over a uniform interior lattice with `resolution`
/// subintervals per axis.
///
/// This is a lower bound for `‖u‖_∞` that converges under refinement; the
/// resolution must be at least 4× the highest mode number so every mode is
/// oversampled.
pub fn sup_norm(basis: &SpectralBasis, coeffs: &Array1<f64>, resolution: usize) -> Result<f64> {
    basis.check_coeffs(coeffs)?;
    let needed = 4 * basis.max_index();
    if resolution < needed {
        return Err(Error::ResolutionTooCoarse { needed, got: resolution });
    }
    let grid = AxisGrid::uniform_interior(&basis.domain, resolution);
    let values = evaluate_on_grid(basis, coeffs, &grid, None);
    Ok(values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Default sup-norm lattice: comfortably finer than the 4×-per-mode floor,
/// and even, so that half-period maxima land on grid points.
pub fn default_sup_resolution(basis: &SpectralBasis) -> usize {
    (4 * basis.max_index()).max(64).next_multiple_of(2)
}

/// `‖u‖_{L⁴}` by tensorised Gauss–Legendre quadrature.
pub fn l4_norm(basis: &SpectralBasis, coeffs: &Array1<f64>) -> Result<f64> {
    basis.check_coeffs(coeffs)?;
    // Integrand bandwidth is 4× the highest mode; the node count tracks that
    // with a safety margin.
    let nodes = (3 * basis.max_index() + 16).max(24);
    let grid = AxisGrid::gauss(&basis.domain, nodes);
    let values = evaluate_on_grid(basis, coeffs, &grid, None);
    let weights = grid.weights.as_ref().expect("gauss grid has weights");
    let quartic = weighted_grid_sum(&values, weights, |v| v * v * v * v);
    Ok(quartic.max(0.0).powf(0.25))
}

/// `‖∇u‖_{L²}` by Gauss–Legendre quadrature of `Σ_a ∫ (∂_a u)²`.
///
/// Independent route from the spectral identity `‖∇u‖² = Σ λ_k c_k²`; the two
/// are cross-checked in the test suite.
pub fn gradient_l2_norm(basis: &SpectralBasis, coeffs: &Array1<f64>) -> Result<f64> {
    basis.check_coeffs(coeffs)?;
    let nodes = (2 * basis.max_index() + 16).max(24);
    let grid = AxisGrid::gauss(&basis.domain, nodes);
    let weights = grid.weights.as_ref().expect("gauss grid has weights");
    let mut total = 0.0;
    for axis in 0..basis.dim() {
        let values = evaluate_on_grid(basis, coeffs, &grid, Some(axis));
        total += weighted_grid_sum(&values, weights, |v| v * v);
    }
    Ok(total.sqrt())
}

// ---------------------------------------------------------------------------
// Projection of initial data
// ---------------------------------------------------------------------------

/// A scalar field evaluated at a point given as a `dim`-length slice.
pub type FieldFn<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Projects the three initial fields `(ψ₀, ψ₁, ψ₂)` onto the basis by
/// tensorised Gauss–Legendre quadrature with `nodes` points per axis
/// (`None` picks a default comfortably above the floor).
///
/// Each closure receives the point coordinates as a `dim`-length slice. The
/// node count must be at least `2 ×` the highest mode number, otherwise the
/// high modes are under-resolved and a resolution error is returned.
pub fn project_initial_data(
    basis: &SpectralBasis,
    fields: [FieldFn; 3],
    nodes: Option<usize>,
) -> Result<[Array1<f64>; 3]> {
    let floor = 2 * basis.max_index();
    let nodes = nodes.unwrap_or_else(|| (4 * basis.max_index() + 16).max(32));
    if nodes < floor {
        return Err(Error::ResolutionTooCoarse { needed: floor, got: nodes });
    }
    let dim = basis.dim();
    let grid = AxisGrid::gauss(&basis.domain, nodes);
    let weights = grid.weights.as_ref().expect("gauss grid has weights");

    // Weight-folded sine tables: contracting grid samples with these yields
    // the quadrature approximation of ∫ f·v_m per axis factor.
    let mut tables = Vec::with_capacity(3);
    let max_per_axis: Vec<usize> = (0..3)
        .map(|a| if a < dim { basis.modes.iter().map(|m| m[a]).max().unwrap() } else { 1 })
        .collect();
    for a in 0..3 {
        if a < dim {
            let mut t = sin_table(basis.domain.lengths[a], max_per_axis[a], &grid.points[a]);
            for (mut row, _) in t.outer_iter_mut().zip(0..) {
                for (v, w) in row.iter_mut().zip(weights[a].iter()) {
                    *v *= w;
                }
            }
            tables.push(t);
        } else {
            tables.push(Array2::ones((1, 1)));
        }
    }

    let shape = (grid.points[0].len(), grid.points[1].len(), grid.points[2].len());
    let mut out: Vec<Array1<f64>> = Vec::with_capacity(3);
    for field in fields {
        let mut samples = Array3::zeros(shape);
        let mut x = vec![0.0; dim];
        for ((p, q, r), v) in samples.indexed_iter_mut() {
            x[0] = grid.points[0][p];
            if dim > 1 {
                x[1] = grid.points[1][q];
            }
            if dim > 2 {
                x[2] = grid.points[2][r];
            }
            *v = field(&x);
        }
        let boxed = contract3(samples, [&tables[0], &tables[1], &tables[2]]);
        let coeffs =
            Array1::from_iter(basis.modes.iter().map(|m| boxed[[m[0] - 1, m[1] - 1, m[2] - 1]]));
        out.push(coeffs);
    }
    let [c0, c1, c2]: [Array1<f64>; 3] =
        out.try_into().expect("exactly three fields were projected");
    Ok([c0, c1, c2])
}

// ---------------------------------------------------------------------------
// Interaction tensor and assembled operators
// ---------------------------------------------------------------------------

/// Per-axis triple-product table `I[p,q,r] = ∫₀^L φ_p φ_q φ_r dx` for the
/// normalised 1D factors, by Gauss–Legendre quadrature.
///
/// The 1D parity rule (the integral vanishes whenever `p+q+r` is even) is
/// applied before quadrature, halving the work; odd entries are computed for
/// `p ≤ q ≤ r` only and mirrored, so the table is exactly symmetric.
fn axis_triple_table(length: f64, m_max: usize) -> Array3<f64> {
    let nodes = (6 * m_max + 16).max(32);
    let (xs, ws) = gauss_legendre_on(length, nodes);
    let table = sin_table(length, m_max, &xs);
    let mut out = Array3::zeros((m_max, m_max, m_max));
    for p in 0..m_max {
        for q in p..m_max {
            for r in q..m_max {
                if (p + q + r + 3) % 2 == 0 {
                    continue; // parity: ∫ sin·sin·sin = 0 for even index sum
                }
                let mut integral = 0.0;
                for (i, w) in ws.iter().enumerate() {
                    integral += w * table[[p, i]] * table[[q, i]] * table[[r, i]];
                }
                for perm in [[p, q, r], [p, r, q], [q, p, r], [q, r, p], [r, p, q], [r, q, p]] {
                    out[[perm[0], perm[1], perm[2]]] = integral;
                }
            }
        }
    }
    out
}

fn axis_tables(basis: &SpectralBasis) -> Vec<Array3<f64>> {
    let dim = basis.dim();
    (0..3)
        .map(|a| {
            if a < dim {
                let m_max = basis.modes.iter().map(|m| m[a]).max().unwrap();
                axis_triple_table(basis.domain.lengths[a], m_max)
            } else {
                Array3::ones((1, 1, 1))
            }
        })
        .collect()
}

fn tensor_entry(modes: &[[usize; 3]], axes: &[Array3<f64>], i: usize, j: usize, l: usize) -> f64 {
    let (mi, mj, ml) = (modes[i], modes[j], modes[l]);
    axes[0][[mi[0] - 1, mj[0] - 1, ml[0] - 1]]
        * axes[1][[mi[1] - 1, mj[1] - 1, ml[1] - 1]]
        * axes[2][[mi[2] - 1, mj[2] - 1, ml[2] - 1]]
}

/// Symmetric cubic interaction tensor `T[i,j,l] = ∫_Ω v_i v_j v_l dx`.
///
/// The integral factorises per axis, so the n³ assembly is a product of three
/// small 1D tables. Dispatches to the parallel assembly when the `parallel`
/// feature is active; both paths produce bitwise-identical tensors.
pub fn triple_product_tensor(basis: &SpectralBasis) -> Array3<f64> {
    #[cfg(feature = "parallel")]
    {
        triple_product_tensor_par(basis)
    }
    #[cfg(not(feature = "parallel"))]
    {
        triple_product_tensor_seq(basis)
    }
}

/// Sequential tensor assembly; always available.
pub fn triple_product_tensor_seq(basis: &SpectralBasis) -> Array3<f64> {
    let axes = axis_tables(basis);
    let n = basis.n_modes();
    let mut flat = vec![0.0; n * n * n];
    for (i, slab) in flat.chunks_mut(n * n).enumerate() {
        fill_tensor_slab(basis.modes(), &axes, i, n, slab);
    }
    Array3::from_shape_vec((n, n, n), flat).expect("tensor shape")
}

/// Parallel tensor assembly over the leading index.
#[cfg(feature = "parallel")]
pub fn triple_product_tensor_par(basis: &SpectralBasis) -> Array3<f64> {
    use rayon::prelude::*;
    let axes = axis_tables(basis);
    let n = basis.n_modes();
    let mut flat = vec![0.0; n * n * n];
    flat.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        fill_tensor_slab(basis.modes(), &axes, i, n, slab);
    });
    Array3::from_shape_vec((n, n, n), flat).expect("tensor shape")
}

fn fill_tensor_slab(
    modes: &[[usize; 3]],
    axes: &[Array3<f64>],
    i: usize,
    n: usize,
    slab: &mut [f64],
) {
    for j in 0..n {
        for l in 0..n {
            slab[j * n + l] = tensor_entry(modes, axes, i, j, l);
        }
    }
}

/// Galerkin operators in the orthonormal eigenbasis: the mass matrix
/// (identity, kept explicit for clarity), the stiffness matrix `diag(λ)`,
/// and the cubic interaction tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperators {
    pub mass: Array2<f64>,
    pub stiffness: Array2<f64>,
    pub tensor: Array3<f64>,
}

/// Assembles mass, stiffness, and the interaction tensor for a basis.
pub fn assemble_operators(basis: &SpectralBasis) -> AssembledOperators {
    let n = basis.n_modes();
    let mass = Array2::eye(n);
    let mut stiffness = Array2::zeros((n, n));
    for (k, l) in basis.eigenvalues().iter().enumerate() {
        stiffness[[k, k]] = *l;
    }
    AssembledOperators { mass, stiffness, tensor: triple_product_tensor(basis) }
}

// ---------------------------------------------------------------------------
// Tensor sidecar cache
// ---------------------------------------------------------------------------

const TENSOR_MAGIC: &[u8; 8] = b"FJMGTT1\0";

/// Loads the interaction tensor from a versioned sidecar file if one exists
/// and its key (dim, lengths, n_modes) matches; otherwise assembles the
/// tensor and writes the sidecar.
pub fn load_or_assemble_tensor(
    basis: &SpectralBasis,
    path: &std::path::Path,
) -> Result<Array3<f64>> {
    if path.exists() {
        match read_tensor_sidecar(basis, path) {
            Ok(t) => return Ok(t),
            Err(Error::CheckpointMismatch(_)) | Err(Error::MalformedCheckpoint(_)) => {
                // Stale or foreign sidecar: fall through and rebuild.
            }
            Err(e) => return Err(e),
        }
    }
    let tensor = triple_product_tensor(basis);
    write_tensor_sidecar(basis, &tensor, path)?;
    Ok(tensor)
}

fn write_tensor_sidecar(
    basis: &SpectralBasis,
    tensor: &Array3<f64>,
    path: &std::path::Path,
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(TENSOR_MAGIC);
    buf.extend_from_slice(&(basis.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(basis.n_modes() as u32).to_le_bytes());
    for l in basis.domain.lengths() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for v in tensor.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn read_tensor_sidecar(basis: &SpectralBasis, path: &std::path::Path) -> Result<Array3<f64>> {
    let bytes = std::fs::read(path)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(Error::MalformedCheckpoint(format!(
                "tensor sidecar truncated at byte {off}"
            )));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    if take(&mut off, 8)? != TENSOR_MAGIC {
        return Err(Error::MalformedCheckpoint("bad tensor sidecar magic".into()));
    }
    let dim = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
    if dim != basis.dim() || n != basis.n_modes() {
        return Err(Error::CheckpointMismatch(format!(
            "tensor sidecar keyed for dim={dim}, n={n}; basis has dim={}, n={}",
            basis.dim(),
            basis.n_modes()
        )));
    }
    for l_expected in basis.domain.lengths() {
        let l = f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
        if l.to_bits() != l_expected.to_bits() {
            return Err(Error::CheckpointMismatch(
                "tensor sidecar keyed for different side lengths".into(),
            ));
        }
    }
    let mut flat = Vec::with_capacity(n * n * n);
    for _ in 0..n * n * n {
        flat.push(f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
    }
    if off != bytes.len() {
        return Err(Error::MalformedCheckpoint("tensor sidecar has trailing bytes".into()));
    }
    Ok(Array3::from_shape_vec((n, n, n), flat).expect("tensor shape"))
}
