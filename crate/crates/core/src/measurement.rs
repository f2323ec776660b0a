//! The pulsed position-measurement operator acting on number-basis states:
//! conditional updates, outcome probability densities and outcome sampling.
//!
//! For an outcome `p_l` the (non-unitary) measurement operator is, in the
//! position representation,
//!
//! ```text
//! M(x) = (2 pi V)^{-1/4} exp[ i omega x - (p_l - chi x)^2 / (4 V) ]
//! ```
//!
//! with `V` the input phase-noise variance. The state update is
//! `rho -> M rho M† / Tr(M rho M†)`; the outcome density is
//! `Pr(p_l) = Tr(M† M rho)`, a convolution of the position marginal with a
//! Gaussian kernel of variance `V`.

use ndarray::Array2;
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::hilbert::{self, FockState};
use crate::numeric;
use crate::{Error, Result};

/// How additive classical record noise (`extra_noise_var`) is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Noise broadens the recorded outcome only; the conditional state
    /// update uses the pure optical phase variance.
    #[default]
    RecordOnly,
    /// Noise is folded into the input phase variance, weakening the
    /// conditioning as well.
    Subsume,
}

/// Parameters of one pulsed measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    /// Position measurement strength.
    pub chi: f64,
    /// Deterministic momentum transfer.
    #[serde(default)]
    pub omega_kick: f64,
    /// Input optical phase-noise variance (1/2 for a coherent drive).
    #[serde(default = "default_var_pl_in")]
    pub var_pl_in: f64,
    /// Additive classical measurement-noise variance (detector noise,
    /// spurious mechanical modes).
    #[serde(default)]
    pub extra_noise_var: f64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
}

fn default_var_pl_in() -> f64 {
    0.5
}

impl MeasurementSpec {
    /// Coherent-drive spec: `var_pl_in = 1/2`, no kick, no extra noise.
    pub fn coherent_drive(chi: f64) -> Result<Self> {
        Self::new(chi, 0.0, 0.5, 0.0, NoiseMode::RecordOnly)
    }

    pub fn new(
        chi: f64,
        omega_kick: f64,
        var_pl_in: f64,
        extra_noise_var: f64,
        noise_mode: NoiseMode,
    ) -> Result<Self> {
        if chi < 0.0 {
            return Err(Error::InvalidParameter {
                name: "chi",
                requirement: ">= 0",
                value: chi,
            });
        }
        if var_pl_in <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "var_pl_in",
                requirement: "> 0",
                value: var_pl_in,
            });
        }
        if extra_noise_var < 0.0 {
            return Err(Error::InvalidParameter {
                name: "extra_noise_var",
                requirement: ">= 0",
                value: extra_noise_var,
            });
        }
        Ok(Self {
            chi,
            omega_kick,
            var_pl_in,
            extra_noise_var,
            noise_mode,
        })
    }

    pub fn with_kick(mut self, omega: f64) -> Self {
        self.omega_kick = omega;
        self
    }

    /// Re-checks the invariants, for specs built by deserialization.
    pub fn validate(&self) -> Result<()> {
        Self::new(
            self.chi,
            self.omega_kick,
            self.var_pl_in,
            self.extra_noise_var,
            self.noise_mode,
        )
        .map(|_| ())
    }

    /// Phase variance entering the conditional state update.
    pub fn conditioning_variance(&self) -> f64 {
        match self.noise_mode {
            NoiseMode::RecordOnly => self.var_pl_in,
            NoiseMode::Subsume => self.var_pl_in + self.extra_noise_var,
        }
    }

    /// Variance of the recorded-outcome kernel.
    pub fn record_variance(&self) -> f64 {
        self.var_pl_in + self.extra_noise_var
    }
}

/// One recorded pulse outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub p_l: f64,
    /// Quadrature angle at which the pulse was applied.
    pub theta: f64,
    pub spec: MeasurementSpec,
    /// Expected `chi <X>` for conditional-mean compensation, when known.
    pub known_mean: Option<f64>,
}

/// Subtracts the known conditional mean from the recorded outcome.
pub fn compensate(record: &MeasurementRecord) -> Result<f64> {
    record
        .known_mean
        .map(|m| record.p_l - m)
        .ok_or(Error::MissingKnownMean)
}

/// Position grid resolving products of basis functions of a `dim`-level
/// space, including the kick phase `e^{i omega x}`.
fn operator_grid(dim: usize, omega_abs: f64) -> Grid {
    let p_max = (2.0 * dim as f64 + 1.0).sqrt();
    let half = p_max + 6.0;
    let freq = 2.0 * p_max + omega_abs + 4.0;
    let dx = std::f64::consts::PI / freq / 2.0;
    let n = (2.0 * half / dx).ceil() as usize + 1;
    Grid::symmetric(half, n).expect("operator grid")
}

/// The measurement operator as a matrix on the truncated number basis.
pub fn upsilon_matrix(spec: &MeasurementSpec, p_l: f64, dim: usize) -> Array2<Complex64> {
    let grid = operator_grid(dim, spec.omega_kick.abs());
    let u = hilbert::position_basis(&grid, dim);
    let v = spec.conditioning_variance();
    let prefactor = (2.0 * std::f64::consts::PI * v).powf(-0.25);
    let dx = grid.step();
    let n_pts = grid.len();

    // Y = U^T diag(w M(x)) U, split into real and imaginary parts so the
    // matmuls stay in f64.
    let mut b_re = Array2::zeros((n_pts, dim));
    let mut b_im = Array2::zeros((n_pts, dim));
    for (i, x) in grid.iter().enumerate() {
        let w = if i == 0 || i == n_pts - 1 { 0.5 * dx } else { dx };
        let gauss = prefactor * (-(p_l - spec.chi * x).powi(2) / (4.0 * v)).exp();
        let phase = Complex64::from_polar(w * gauss, spec.omega_kick * x);
        for n in 0..dim {
            b_re[(i, n)] = u[(i, n)] * phase.re;
            b_im[(i, n)] = u[(i, n)] * phase.im;
        }
    }
    let y_re = u.t().dot(&b_re);
    let y_im = u.t().dot(&b_im);
    let mut y = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            y[(i, j)] = Complex64::new(y_re[(i, j)], y_im[(i, j)]);
        }
    }
    y
}

/// POVM element `Υ†Υ` for outcome `p_l` (real symmetric on this basis).
pub fn povm_element(spec: &MeasurementSpec, p_l: f64, dim: usize) -> Array2<f64> {
    let grid = operator_grid(dim, 0.0);
    let u = hilbert::position_basis(&grid, dim);
    let v = spec.conditioning_variance();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * v).sqrt();
    let dx = grid.step();
    let n_pts = grid.len();
    let mut b = Array2::zeros((n_pts, dim));
    for (i, x) in grid.iter().enumerate() {
        let w = if i == 0 || i == n_pts - 1 { 0.5 * dx } else { dx };
        let weight = w * norm * (-(p_l - spec.chi * x).powi(2) / (2.0 * v)).exp();
        for n in 0..dim {
            b[(i, n)] = u[(i, n)] * weight;
        }
    }
    u.t().dot(&b)
}

/// Conditional state after a pulse with outcome `p_l`.
///
/// The kick enters as `e^{i omega x}` in the position representation, so
/// position statistics are untouched while the mean momentum shifts by
/// `omega`. Fails with a truncation error when the squeezed output no
/// longer fits the basis.
pub fn apply_upsilon(state: &FockState, spec: &MeasurementSpec, p_l: f64) -> Result<FockState> {
    let dim = state.dim();
    let y = upsilon_matrix(spec, p_l, dim);
    let y_dag = crate::linalg::conj_transpose(&y);
    let updated = y.dot(state.matrix()).dot(&y_dag);
    FockState::from_matrix(updated)
}

/// Outcome probability density `Tr(Υ†Υ ρ)` evaluated on `p_grid`,
/// computed through its convolution form: position marginal of `state`
/// blurred by the Gaussian record kernel.
pub fn outcome_pdf(state: &FockState, spec: &MeasurementSpec, p_grid: &Grid) -> Result<Vec<f64>> {
    let m = state.moments();
    let (mean, var) = outcome_moments(state, spec);
    let sigma = var.sqrt();
    if p_grid.min() > mean - 6.0 * sigma || p_grid.max() < mean + 6.0 * sigma {
        return Err(Error::GridTooNarrow(format!(
            "outcome grid [{}, {}] must cover mean {mean} +- 6 sigma ({sigma})",
            p_grid.min(),
            p_grid.max()
        )));
    }

    // Position marginal on an internal grid wide enough for the state.
    let half = m.mean_x.abs() + 8.0 * m.var_x.sqrt() + 2.0;
    let n = ((2.0 * half) / 0.02).ceil() as usize + 1;
    let x_grid = Grid::symmetric(half, n)?;
    let marg = hilbert::marginal_values(state, &x_grid);

    let r = spec.record_variance();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * r).sqrt();
    let values = p_grid
        .iter()
        .map(|p_l| {
            let integrand: Vec<f64> = x_grid
                .iter()
                .zip(&marg)
                .map(|(x, &m)| m * norm * (-(p_l - spec.chi * x).powi(2) / (2.0 * r)).exp())
                .collect();
            x_grid.trapezoid(&integrand)
        })
        .collect();
    Ok(values)
}

/// Mean and variance of the outcome distribution from the state moments.
pub fn outcome_moments(state: &FockState, spec: &MeasurementSpec) -> (f64, f64) {
    let m = state.moments();
    (
        spec.chi * m.mean_x,
        spec.record_variance() + spec.chi * spec.chi * m.var_x,
    )
}

/// Draws one outcome by numerical inverse-CDF sampling of the outcome
/// density; deterministic under the seed.
pub fn sample_outcome_fock(state: &FockState, spec: &MeasurementSpec, rng_seed: u64) -> Result<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    sample_outcome_fock_with_rng(state, spec, &mut rng)
}

pub fn sample_outcome_fock_with_rng(
    state: &FockState,
    spec: &MeasurementSpec,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let table = OutcomeSampler::build(state, spec)?;
    Ok(table.draw(rng))
}

/// Precomputed inverse-CDF table for repeated outcome draws from one state.
pub struct OutcomeSampler {
    grid: Grid,
    cdf: Vec<f64>,
}

impl OutcomeSampler {
    pub fn build(state: &FockState, spec: &MeasurementSpec) -> Result<Self> {
        let (mean, var) = outcome_moments(state, spec);
        let sigma = var.sqrt();
        let grid = Grid::new(mean - 8.0 * sigma, mean + 8.0 * sigma, 2001)?;
        let pdf = outcome_pdf(state, spec, &grid)?;
        let mut cdf = numeric::cumtrapz(&pdf, grid.step());
        let total = *cdf.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Numerical("outcome CDF integrates to zero".into()));
        }
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { grid, cdf })
    }

    pub fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        self.quantile(numeric::uniform_open01(rng))
    }

    /// Inverse CDF at `u` in (0, 1), linear within bins.
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < u);
        if idx == 0 {
            return self.grid.point(0);
        }
        if idx >= self.cdf.len() {
            return self.grid.point(self.cdf.len() - 1);
        }
        let c0 = self.cdf[idx - 1];
        let c1 = self.cdf[idx];
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid.point(idx - 1) + frac * self.grid.step()
    }
}
