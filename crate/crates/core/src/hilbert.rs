//! Truncated number-basis (Fock) representation of mechanical states.
//!
//! This is the brute-force path of the suite: density matrices on a
//! truncated harmonic-oscillator basis with rotation, quadrature marginals,
//! Wigner functions, moments and fidelity. Every closed-form Gaussian result
//! elsewhere in the crate is checked against this representation.
//!
//! Conventions: `X = (b + b†)/√2`, `P = i(b† − b)/√2`, ground-state variance
//! 1/2. `rotate(theta)` multiplies matrix elements by `e^{iθ(m−n)}`, which
//! maps means as `X → X cos θ − P sin θ`, `P → X sin θ + P cos θ`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::grid::Grid;
use crate::linalg;
use crate::{Error, Result};

/// Trace tolerance after every normalizing operation.
pub const TRACE_TOL: f64 = 1e-10;
/// Hermiticity tolerance, max |rho - rho†|.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Positivity slack on the minimum eigenvalue.
pub const PSD_SLACK: f64 = 1e-9;
/// Adequacy bound on the combined population of the top two Fock levels.
pub const TAIL_BOUND: f64 = 1e-6;

/// Density matrix on the truncated basis {|0>, ..., |n_max>}.
#[derive(Debug, Clone)]
pub struct FockState {
    matrix: Array2<Complex64>,
}

/// First and symmetrized second quadrature moments of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

/// Which pair of coherent components makes up a cat state: `PlusI`/`MinusI`
/// place them at `±iδ` (along the momentum axis), `Real` at `±δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatAxis {
    PlusI,
    MinusI,
    Real,
}

impl FockState {
    /// Wraps a raw matrix, normalizing the trace and enforcing the
    /// density-matrix invariants (Hermiticity, positivity, tail adequacy).
    pub fn from_matrix(matrix: Array2<Complex64>) -> Result<Self> {
        Self::from_matrix_with_tail_bound(matrix, TAIL_BOUND)
    }

    /// Like [`Self::from_matrix`] with a caller-chosen adequacy bound;
    /// tomographic estimates carry a numerical noise floor well above the
    /// bound appropriate for exactly constructed states.
    pub fn from_matrix_with_tail_bound(matrix: Array2<Complex64>, tail_bound: f64) -> Result<Self> {
        let mut m = matrix;
        let dim = m.nrows();
        if dim != m.ncols() || dim < 2 {
            return Err(Error::InvalidState(format!(
                "density matrix must be square with dim >= 2, got {}x{}",
                dim,
                m.ncols()
            )));
        }
        let defect = linalg::hermiticity_defect(&m);
        if defect > 1e-8 {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        if defect > 0.0 {
            m = linalg::hermitize(&m);
        }
        let tr = linalg::trace(&m).re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} not positive")));
        }
        m.mapv_inplace(|z| z / tr);
        let state = Self { matrix: m };
        state.validate(tail_bound)?;
        Ok(state)
    }

    fn validate(&self, tail_bound: f64) -> Result<()> {
        let tr = linalg::trace(&self.matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let defect = linalg::hermiticity_defect(&self.matrix);
        if defect > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {defect:.3e}"
            )));
        }
        if !linalg::is_psd_within(&self.matrix, PSD_SLACK) {
            return Err(Error::InvalidState(
                "minimum eigenvalue below -1e-9".into(),
            ));
        }
        let tail = self.top_two_population();
        if tail > tail_bound {
            return Err(Error::TruncationTooSmall {
                context: format!("dim {}", self.dim()),
                tail,
                bound: tail_bound,
            });
        }
        Ok(())
    }

    /// Thermal state with mean occupation `nbar` on `n_max + 1` levels.
    pub fn thermal(nbar: f64, n_max: usize) -> Result<Self> {
        if nbar < 0.0 {
            return Err(Error::InvalidParameter {
                name: "nbar",
                requirement: ">= 0",
                value: nbar,
            });
        }
        let dim = n_max + 1;
        let q = nbar / (nbar + 1.0);
        let mut weights = Vec::with_capacity(dim);
        let mut w = 1.0;
        for _ in 0..dim {
            weights.push(w);
            w *= q;
        }
        let sum: f64 = weights.iter().sum();
        let tail = (weights[dim - 1] + weights[dim.saturating_sub(2)]) / sum;
        if tail > TAIL_BOUND {
            return Err(Error::TruncationTooSmall {
                context: format!("thermal nbar = {nbar}, n_max = {n_max}"),
                tail,
                bound: TAIL_BOUND,
            });
        }
        let mut m = Array2::zeros((dim, dim));
        for (n, w) in weights.iter().enumerate() {
            m[(n, n)] = Complex64::new(w / sum, 0.0);
        }
        Ok(Self { matrix: m })
    }

    /// Coherent state |alpha> on `n_max + 1` levels.
    pub fn coherent(alpha: Complex64, n_max: usize) -> Result<Self> {
        let load = alpha.norm_sqr() + 6.0 * alpha.norm();
        if load > n_max as f64 {
            return Err(Error::TruncationTooSmall {
                context: format!("coherent |alpha| = {:.3}, n_max = {n_max}", alpha.norm()),
                tail: load,
                bound: n_max as f64,
            });
        }
        let amps = coherent_amplitudes(alpha, n_max + 1);
        Self::from_pure(&amps)
    }

    /// Even cat state `|alpha> + |-alpha>` (normalized), with `alpha`
    /// selected by `axis`: `±iδ` or `δ`. `delta = 0` degenerates to the
    /// ground state.
    pub fn cat(delta: f64, axis: CatAxis, n_max: usize) -> Result<Self> {
        if delta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                requirement: ">= 0",
                value: delta,
            });
        }
        let alpha = match axis {
            CatAxis::PlusI => Complex64::new(0.0, delta),
            CatAxis::MinusI => Complex64::new(0.0, -delta),
            CatAxis::Real => Complex64::new(delta, 0.0),
        };
        let load = alpha.norm_sqr() + 6.0 * alpha.norm();
        if load > n_max as f64 {
            return Err(Error::TruncationTooSmall {
                context: format!("cat delta = {delta}, n_max = {n_max}"),
                tail: load,
                bound: n_max as f64,
            });
        }
        let plus = coherent_amplitudes(alpha, n_max + 1);
        let minus = coherent_amplitudes(-alpha, n_max + 1);
        let mut amps: Vec<Complex64> = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| a + b)
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        Self::from_pure(&amps)
    }

    /// Pure state from normalized amplitudes.
    pub fn from_pure(amps: &[Complex64]) -> Result<Self> {
        let dim = amps.len();
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = amps[i] * amps[j].conj() / norm2;
            }
        }
        let state = Self { matrix: m };
        state.validate(TAIL_BOUND)?;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    /// Population of Fock level `n`.
    pub fn population(&self, n: usize) -> f64 {
        self.matrix[(n, n)].re
    }

    fn top_two_population(&self) -> f64 {
        let d = self.dim();
        self.population(d - 1) + self.population(d - 2)
    }

    /// Harmonic evolution by angle `theta`.
    pub fn rotate(&self, theta: f64) -> Self {
        let dim = self.dim();
        let phases: Vec<Complex64> =
            (0..dim).map(|n| Complex64::from_polar(1.0, theta * n as f64)).collect();
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = phases[i] * self.matrix[(i, j)] * phases[j].conj();
            }
        }
        Self { matrix: m }
    }

    /// Mean occupation number.
    pub fn mean_n(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.population(n)).sum()
    }

    /// Purity Tr rho².
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                acc += (self.matrix[(i, j)] * self.matrix[(j, i)]).re;
            }
        }
        acc
    }

    /// First and symmetrized second quadrature moments.
    pub fn moments(&self) -> Moments {
        let d = self.dim();
        let mut b = Complex64::new(0.0, 0.0);
        let mut b2 = Complex64::new(0.0, 0.0);
        let mut n_mean = 0.0;
        for n in 1..d {
            b += (n as f64).sqrt() * self.matrix[(n, n - 1)];
        }
        for n in 2..d {
            b2 += ((n * (n - 1)) as f64).sqrt() * self.matrix[(n, n - 2)];
        }
        for n in 0..d {
            n_mean += n as f64 * self.matrix[(n, n)].re;
        }
        let mean_x = std::f64::consts::SQRT_2 * b.re;
        let mean_p = std::f64::consts::SQRT_2 * b.im;
        let xx = b2.re + n_mean + 0.5;
        let pp = -b2.re + n_mean + 0.5;
        let xp = b2.im;
        Moments {
            mean_x,
            mean_p,
            var_x: xx - mean_x * mean_x,
            var_p: pp - mean_p * mean_p,
            cov_xp: xp - mean_x * mean_p,
        }
    }

    /// Uhlmann fidelity between two states of equal dimension.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let root = linalg::hermitian_map(&self.matrix, |x| x.max(0.0).sqrt())?;
        let inner = root.dot(&other.matrix).dot(&root);
        let inner = linalg::hermitize(&inner);
        let (vals, _) = linalg::eigh(&inner)?;
        let f: f64 = vals.iter().map(|&l| l.max(0.0).sqrt()).sum();
        Ok((f * f).clamp(0.0, 1.0 + 1e-9).min(1.0))
    }
}

fn coherent_amplitudes(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut amps = Vec::with_capacity(dim);
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c *= alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// Truncation that keeps thermal/coherent weight tails below the adequacy
/// bound. Starts from `8 (nbar + |alpha|² + 1)` and expands the thermal part
/// analytically; the result always satisfies the constructors' tail check.
pub fn default_n_max(nbar: f64, alpha_abs: f64) -> usize {
    let base = (8.0 * (nbar + alpha_abs * alpha_abs + 1.0)).ceil();
    let coherent_need = alpha_abs * alpha_abs + 6.0 * alpha_abs;
    let thermal_need = if nbar > 1e-12 {
        let q = nbar / (nbar + 1.0);
        // Solve (1-q) q^{N-1} (1+q) <= TAIL_BOUND for N, with margin for the
        // moment accuracy of downstream oracles.
        let n = 1.0 + (TAIL_BOUND / ((1.0 - q) * (1.0 + q))).ln() / q.ln();
        1.6 * n
    } else {
        0.0
    };
    base.max(coherent_need.ceil()).max(thermal_need.ceil()) as usize + 2
}

/// Probability density of a rotated quadrature on a grid.
#[derive(Debug, Clone)]
pub struct Marginal {
    pub theta: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Marginal {
    /// Validated construction: non-negative values integrating to one.
    pub fn new(theta: f64, grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: grid.len(),
            });
        }
        if values.iter().any(|&v| v < -1e-12) {
            return Err(Error::InvalidState("negative marginal density".into()));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let integral = grid.trapezoid(&values);
        if (integral - 1.0).abs() > 1e-6 {
            return Err(Error::GridTooNarrow(format!(
                "marginal integrates to {integral}, expected 1 +- 1e-6"
            )));
        }
        Ok(Self { theta, grid, values })
    }

    /// Builds a marginal from an estimated density (histogram, deconvolved
    /// data), rescaling so the trapezoid integral is exactly one.
    pub fn from_density_estimate(theta: f64, grid: Grid, values: Vec<f64>) -> Result<Self> {
        let clipped: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let integral = grid.trapezoid(&clipped);
        if !(integral.is_finite() && integral > 0.0) {
            return Err(Error::InvalidState("density estimate has no weight".into()));
        }
        let values = clipped.into_iter().map(|v| v / integral).collect();
        Self::new(theta, grid, values)
    }

    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(x, &v)| x * v)
            .collect();
        self.grid.trapezoid(&weighted)
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let weighted: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(x, &v)| (x - mean).powi(2) * v)
            .collect();
        self.grid.trapezoid(&weighted)
    }
}

/// Matrix of Hermite functions: `out[(i, n)] = u_n(x_i)`.
///
/// Uses the normalized three-term recurrence, stable to a few hundred
/// levels without overflow.
pub fn position_basis(grid: &Grid, dim: usize) -> Array2<f64> {
    let n_pts = grid.len();
    let mut out = Array2::zeros((n_pts, dim));
    let norm0 = std::f64::consts::PI.powf(-0.25);
    for (i, x) in grid.iter().enumerate() {
        let u0 = norm0 * (-x * x / 2.0).exp();
        out[(i, 0)] = u0;
        if dim > 1 {
            out[(i, 1)] = std::f64::consts::SQRT_2 * x * u0;
        }
        for n in 2..dim {
            let nf = n as f64;
            out[(i, n)] = x * (2.0 / nf).sqrt() * out[(i, n - 1)]
                - ((nf - 1.0) / nf).sqrt() * out[(i, n - 2)];
        }
    }
    out
}

/// Quadrature marginal of `state` at angle `theta` on `x_grid`.
///
/// The grid must cover the rotated state out to six standard deviations on
/// both sides of its mean.
pub fn marginal(state: &FockState, theta: f64, x_grid: &Grid) -> Result<Marginal> {
    let rotated = state.rotate(theta);
    let m = rotated.moments();
    let sigma = m.var_x.sqrt();
    if x_grid.min() > m.mean_x - 6.0 * sigma || x_grid.max() < m.mean_x + 6.0 * sigma {
        return Err(Error::GridTooNarrow(format!(
            "grid [{}, {}] must cover mean {} +- 6 sigma ({})",
            x_grid.min(),
            x_grid.max(),
            m.mean_x,
            sigma
        )));
    }
    let values = marginal_values(&rotated, x_grid);
    Marginal::new(theta, *x_grid, values)
}

/// Raw marginal density values without span/normalization validation.
pub(crate) fn marginal_values(state: &FockState, x_grid: &Grid) -> Vec<f64> {
    let dim = state.dim();
    let u = position_basis(x_grid, dim);
    let re: Array2<f64> = state.matrix().mapv(|z| z.re);
    let ua = u.dot(&re);
    ua.outer_iter()
        .zip(u.outer_iter())
        .map(|(row_a, row_u)| row_a.iter().zip(row_u.iter()).map(|(a, b)| a * b).sum::<f64>())
        .map(|v: f64| v.max(0.0))
        .collect()
}

/// Wigner quasi-probability distribution on a rectangular grid.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub x_grid: Grid,
    pub p_grid: Grid,
    /// Row index runs over x, column over p.
    pub values: Array2<f64>,
}

impl WignerGrid {
    pub fn new(x_grid: Grid, p_grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (x_grid.len(), p_grid.len()) {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: x_grid.len() * p_grid.len(),
            });
        }
        let w = Self { x_grid, p_grid, values };
        let integral = w.integral();
        if (integral - 1.0).abs() > 1e-4 {
            return Err(Error::GridTooNarrow(format!(
                "Wigner grid integrates to {integral}, expected 1 +- 1e-4"
            )));
        }
        let min = w.min_value();
        if min < -1.0 / std::f64::consts::PI - 1e-6 {
            return Err(Error::InvalidState(format!(
                "Wigner minimum {min} below the -1/pi bound"
            )));
        }
        Ok(w)
    }

    pub fn integral(&self) -> f64 {
        let col_sums: Vec<f64> = self
            .values
            .outer_iter()
            .map(|row| self.p_grid.trapezoid(row.as_slice().unwrap()))
            .collect();
        self.x_grid.trapezoid(&col_sums)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Marginal over p: the position distribution.
    pub fn marginal_x(&self) -> Vec<f64> {
        self.values
            .outer_iter()
            .map(|row| self.p_grid.trapezoid(row.as_slice().unwrap()))
            .collect()
    }
}

/// Wigner function of a Fock-basis state, evaluated through the closed-form
/// Laguerre series of the number-basis kernel.
pub fn wigner(state: &FockState, x_grid: &Grid, p_grid: &Grid) -> Result<WignerGrid> {
    // Coarse span check; the 1e-4 integral invariant on construction is the
    // authoritative guard (variance overestimates the span of multimodal
    // states, so this stays loose).
    let m = state.moments();
    let sx = m.var_x.sqrt();
    let sp = m.var_p.sqrt();
    if x_grid.min() > m.mean_x - 3.5 * sx
        || x_grid.max() < m.mean_x + 3.5 * sx
        || p_grid.min() > m.mean_p - 3.5 * sp
        || p_grid.max() < m.mean_p + 3.5 * sp
    {
        return Err(Error::GridTooNarrow(
            "Wigner grids must cover the state to 3.5 sigma".into(),
        ));
    }
    let mut values = Array2::zeros((x_grid.len(), p_grid.len()));
    for (ix, x) in x_grid.iter().enumerate() {
        for (ip, p) in p_grid.iter().enumerate() {
            values[(ix, ip)] = wigner_point(state, x, p);
        }
    }
    WignerGrid::new(*x_grid, *p_grid, values)
}

/// Single-point Wigner evaluation.
pub fn wigner_point(state: &FockState, x: f64, p: f64) -> f64 {
    let dim = state.dim();
    let rho = state.matrix();
    let r2 = x * x + p * p;
    let z = Complex64::new(x, -p);
    let envelope = (-r2).exp();
    let arg = 2.0 * r2;

    let mut acc = 0.0f64;
    let mut z_pow = Complex64::new(1.0, 0.0);
    let mut lead = 1.0f64; // sqrt(2^k / k!)
    for k in 0..dim {
        if k > 0 {
            z_pow *= z;
            lead *= (2.0 / k as f64).sqrt();
        }
        // Associated Laguerre L_j^k(arg) by upward recurrence in j, folded
        // with the sign/normalization factor (-1)^j sqrt(j!/(j+k)!) 2^{k/2}.
        let mut coeff = lead;
        let mut l_prev = 0.0f64;
        let mut l_cur = 1.0f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..(dim - k) {
            if j > 0 {
                let jf = j as f64;
                let kf = k as f64;
                let l_next =
                    ((2.0 * jf - 1.0 + kf - arg) * l_cur - (jf - 1.0 + kf) * l_prev) / jf;
                l_prev = l_cur;
                l_cur = l_next;
                coeff *= -(jf / (jf + kf)).sqrt();
            }
            sum += rho[(j + k, j)] * (coeff * l_cur);
        }
        let contribution = (z_pow * sum).re;
        acc += if k == 0 { contribution } else { 2.0 * contribution };
    }
    envelope * acc / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2: f64 = std::f64::consts::SQRT_2;

    fn grid_for(state: &FockState, n: usize) -> Grid {
        let m = state.moments();
        let half = m.mean_x.abs() + m.mean_p.abs() + 8.0 * m.var_x.max(m.var_p).sqrt();
        Grid::symmetric(half, n).unwrap()
    }

    #[test]
    fn thermal_zero_is_ground_state() {
        let s = FockState::thermal(0.0, 4).unwrap();
        assert!((s.population(0) - 1.0).abs() < 1e-14);
        assert!(s.mean_n() < 1e-14);
    }

    #[test]
    fn thermal_moments_match_bose_einstein() {
        let s = FockState::thermal(10.0, 160).unwrap();
        assert!((s.mean_n() - 10.0).abs() < 1e-4, "mean n {}", s.mean_n());
        let m = s.moments();
        assert!((m.var_x - 10.5).abs() < 1e-3);
        assert!((m.var_p - 10.5).abs() < 1e-3);
        assert!(m.mean_x.abs() < 1e-12 && m.mean_p.abs() < 1e-12);
    }

    #[test]
    fn thermal_truncation_too_small_is_reported() {
        // At n_max = 120 the top-two-level population of an nbar = 10
        // thermal state is ~2e-6, above the 1e-6 adequacy bound.
        let err = FockState::thermal(10.0, 120).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall { .. }));
        assert!(FockState::thermal(-0.5, 10).is_err());
    }

    #[test]
    fn thermal_purity_closed_form() {
        let s = FockState::thermal(1.0, 40).unwrap();
        assert!((s.purity() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn coherent_examples() {
        let s = FockState::coherent(Complex64::new(0.0, 0.0), 8).unwrap();
        assert!((s.population(0) - 1.0).abs() < 1e-14);

        let s = FockState::coherent(Complex64::new(0.0, 1.5), 30).unwrap();
        let m = s.moments();
        assert!((m.mean_p - 1.5 * SQRT_2).abs() < 1e-6, "{}", m.mean_p);
        assert!(m.mean_x.abs() < 1e-9);
        assert!((m.var_x - 0.5).abs() < 1e-8);

        let s = FockState::coherent(Complex64::new(2.0, 0.0), 40).unwrap();
        assert!((s.mean_n() - 4.0).abs() < 1e-6);

        assert!(FockState::coherent(Complex64::new(3.0, 0.0), 10).is_err());
    }

    #[test]
    fn cat_degenerates_to_ground_state() {
        let s = FockState::cat(0.0, CatAxis::PlusI, 10).unwrap();
        assert!((s.population(0) - 1.0).abs() < 1e-12);
    }

    fn analytic_cat_marginal(delta: f64, x: f64) -> f64 {
        let norm = std::f64::consts::PI.sqrt() * (1.0 + (-2.0 * delta * delta).exp());
        2.0 * (-x * x).exp() * (SQRT_2 * delta * x).cos().powi(2) / norm
    }

    #[test]
    fn cat_marginal_matches_closed_form() {
        let s = FockState::cat(1.5, CatAxis::PlusI, 32).unwrap();
        let grid = Grid::symmetric(9.0, 601).unwrap();
        let m = marginal(&s, 0.0, &grid).unwrap();
        for (x, &v) in grid.iter().zip(&m.values) {
            assert!(
                (v - analytic_cat_marginal(1.5, x)).abs() < 1e-6,
                "x = {x}: {v}"
            );
        }
    }

    #[test]
    fn cat_quarter_period_marginal_is_bimodal() {
        let s = FockState::cat(1.5, CatAxis::PlusI, 32).unwrap();
        let grid = Grid::symmetric(14.0, 1401).unwrap();
        let m = marginal(&s, std::f64::consts::FRAC_PI_2, &grid).unwrap();
        // Local maxima must sit near +-delta*sqrt(2) = +-2.1213.
        let mut peaks = Vec::new();
        for i in 1..grid.len() - 1 {
            if m.values[i] > m.values[i - 1] && m.values[i] > m.values[i + 1] && m.values[i] > 0.05
            {
                peaks.push(grid.point(i));
            }
        }
        assert_eq!(peaks.len(), 2, "peaks at {peaks:?}");
        assert!((peaks[0] + 1.5 * SQRT_2).abs() < 0.05);
        assert!((peaks[1] - 1.5 * SQRT_2).abs() < 0.05);
        // And the theta = 0 marginal shows fringes: several sign changes of
        // the slope within one ground-state width around the origin.
        let m0 = marginal(&s, 0.0, &grid).unwrap();
        let center = grid.nearest_index(0.0);
        assert!(m0.values[center] > analytic_cat_marginal(1.5, 0.0) * 0.99);
        let trough = grid.nearest_index(std::f64::consts::PI / (2.0 * SQRT_2 * 1.5));
        assert!(m0.values[trough] < 0.05 * m0.values[center]);
    }

    #[test]
    fn rotate_identity_and_full_period() {
        let s = FockState::coherent(Complex64::new(1.0, 0.5), 24).unwrap();
        let r0 = s.rotate(0.0);
        let r2pi = s.rotate(2.0 * std::f64::consts::PI);
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                assert!((r0.matrix()[(i, j)] - s.matrix()[(i, j)]).norm() < 1e-15);
                assert!((r2pi.matrix()[(i, j)] - s.matrix()[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rotate_quarter_period_moves_means() {
        // X -> X cos - P sin, P -> X sin + P cos: alpha = 1 lands on +i.
        let s = FockState::coherent(Complex64::new(1.0, 0.0), 24).unwrap();
        let r = s.rotate(std::f64::consts::FRAC_PI_2);
        let m = r.moments();
        assert!(m.mean_x.abs() < 1e-9, "mean x {}", m.mean_x);
        assert!((m.mean_p - SQRT_2).abs() < 1e-9, "mean p {}", m.mean_p);
    }

    #[test]
    fn rotate_composes_additively() {
        let s = FockState::cat(1.0, CatAxis::PlusI, 24).unwrap();
        let a = s.rotate(0.4).rotate(0.9);
        let b = s.rotate(1.3);
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                assert!((a.matrix()[(i, j)] - b.matrix()[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn marginal_examples() {
        let ground = FockState::thermal(0.0, 6).unwrap();
        let grid = Grid::symmetric(6.0, 501).unwrap();
        let m = marginal(&ground, 0.7, &grid).unwrap();
        assert!((m.variance() - 0.5).abs() < 1e-6);
        assert!((grid.trapezoid(&m.values) - 1.0).abs() < 1e-6);

        let th = FockState::thermal(10.0, 160).unwrap();
        let grid = grid_for(&th, 801);
        let m = marginal(&th, 1.1, &grid).unwrap();
        assert!((m.variance() - 10.5).abs() < 1e-2);

        let narrow = Grid::symmetric(2.0, 101).unwrap();
        assert!(matches!(
            marginal(&th, 0.0, &narrow),
            Err(Error::GridTooNarrow(_))
        ));
    }

    #[test]
    fn marginal_grid_moments_match_operator_moments() {
        let s = FockState::coherent(Complex64::new(0.9, -0.6), 40).unwrap();
        let grid = Grid::symmetric(10.0, 801).unwrap();
        for &theta in &[0.0, 0.7, 2.1] {
            let m = marginal(&s, theta, &grid).unwrap();
            let rotated = s.rotate(theta).moments();
            assert!((m.mean() - rotated.mean_x).abs() < 1e-4);
            assert!((m.variance() - rotated.var_x).abs() < 1e-4);
        }
    }

    #[test]
    fn wigner_vacuum_closed_form() {
        let s = FockState::thermal(0.0, 8).unwrap();
        let g = Grid::symmetric(5.0, 101).unwrap();
        let w = wigner(&s, &g, &g).unwrap();
        for (ix, x) in g.iter().enumerate() {
            for (ip, p) in g.iter().enumerate() {
                let expect = (-x * x - p * p).exp() / std::f64::consts::PI;
                assert!(
                    (w.values[(ix, ip)] - expect).abs() < 1e-8,
                    "W({x},{p}) = {}",
                    w.values[(ix, ip)]
                );
            }
        }
    }

    #[test]
    fn wigner_cat_is_negative_thermal_is_not() {
        let cat = FockState::cat(1.5, CatAxis::PlusI, 32).unwrap();
        let g = Grid::symmetric(9.0, 181).unwrap();
        let w = wigner(&cat, &g, &g).unwrap();
        assert!(w.min_value() < -0.01, "min W = {}", w.min_value());

        let th = FockState::thermal(10.0, 160).unwrap();
        let g = Grid::symmetric(28.0, 161).unwrap();
        let w = wigner(&th, &g, &g).unwrap();
        assert!(w.min_value() > -1e-10);
        // Isotropy: W(x, p) = W(p, x) for this state.
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert!((w.values[(i, j)] - w.values[(j, i)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wigner_matches_brute_force_transform() {
        // Independent check of the Laguerre series: numerically Fourier
        // transform the position representation of rho.
        let s = FockState::cat(1.2, CatAxis::PlusI, 24).unwrap();
        let rho = s.matrix();
        let y_grid = Grid::symmetric(8.0, 1601).unwrap();
        let dim = s.dim();
        for &(x, p) in &[(0.0, 0.0), (0.3, -0.7), (1.1, 0.4), (-0.6, 1.3)] {
            let mut integrand = Vec::with_capacity(y_grid.len());
            for y in y_grid.iter() {
                let left = single_point_basis(x - y, dim);
                let right = single_point_basis(x + y, dim);
                let mut val = Complex64::new(0.0, 0.0);
                for m in 0..dim {
                    for n in 0..dim {
                        val += rho[(m, n)] * left[m] * right[n];
                    }
                }
                integrand.push((Complex64::new(0.0, 2.0 * p * y).exp() * val).re);
            }
            let brute = y_grid.trapezoid(&integrand) / std::f64::consts::PI;
            let series = wigner_point(&s, x, p);
            assert!(
                (brute - series).abs() < 1e-6,
                "W({x},{p}): brute {brute} vs series {series}"
            );
        }
    }

    fn single_point_basis(x: f64, dim: usize) -> Vec<f64> {
        let grid = Grid::new(x, x + 1.0, 2).unwrap();
        let u = position_basis(&grid, dim);
        (0..dim).map(|n| u[(0, n)]).collect()
    }

    #[test]
    fn wigner_marginal_consistency() {
        let s = FockState::cat(1.5, CatAxis::PlusI, 32).unwrap();
        let g = Grid::symmetric(8.0, 201).unwrap();
        let w = wigner(&s, &g, &g).unwrap();
        let from_wigner = w.marginal_x();
        let direct = marginal(&s, 0.0, &g).unwrap();
        for (a, b) in from_wigner.iter().zip(&direct.values) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn moments_examples() {
        let vac = FockState::thermal(0.0, 6).unwrap();
        let m = vac.moments();
        assert!(m.mean_x.abs() < 1e-14 && m.mean_p.abs() < 1e-14);
        assert!((m.var_x - 0.5).abs() < 1e-14 && (m.var_p - 0.5).abs() < 1e-14);

        let coh = FockState::coherent(Complex64::new(1.0, 1.0), 40).unwrap();
        let m = coh.moments();
        assert!((m.mean_x - SQRT_2).abs() < 1e-9);
        assert!((m.mean_p - SQRT_2).abs() < 1e-9);
        assert!((m.var_x - 0.5).abs() < 1e-9 && (m.var_p - 0.5).abs() < 1e-9);
        assert!(m.cov_xp.abs() < 1e-9);

        let th = FockState::thermal(5.0, 120).unwrap();
        let m = th.moments();
        assert!((m.var_x - 5.5).abs() < 1e-6 && (m.var_p - 5.5).abs() < 1e-6);
    }

    #[test]
    fn fidelity_examples() {
        let coh = FockState::coherent(Complex64::new(1.0, 0.3), 30).unwrap();
        assert!((coh.fidelity(&coh).unwrap() - 1.0).abs() < 1e-9);

        let zero = FockState::from_pure(&one_hot(0, 12)).unwrap();
        let one = FockState::from_pure(&one_hot(1, 12)).unwrap();
        assert!(coh_dim_mismatch(&coh, &zero));
        assert!(zero.fidelity(&one).unwrap() < 1e-9);

        let coh1 = FockState::coherent(Complex64::new(1.0, 0.0), 30).unwrap();
        let vac = FockState::thermal(0.0, 30).unwrap();
        assert!((coh1.fidelity(&vac).unwrap() - (-1.0f64).exp()).abs() < 1e-6);
    }

    fn coh_dim_mismatch(a: &FockState, b: &FockState) -> bool {
        matches!(a.fidelity(b), Err(Error::DimensionMismatch { .. }))
    }

    fn one_hot(n: usize, dim: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[n] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn default_n_max_is_always_adequate() {
        for &(nbar, alpha) in &[(0.0, 0.0), (1.0, 0.0), (10.0, 0.0), (0.0, 2.0), (5.0, 1.5)] {
            let n = default_n_max(nbar, alpha);
            if alpha == 0.0 {
                assert!(FockState::thermal(nbar, n).is_ok(), "nbar {nbar} n {n}");
            } else {
                assert!(FockState::coherent(Complex64::new(alpha, 0.0), n).is_ok());
            }
        }
    }
}
