//! Mechanical quantum state reconstruction from pulsed homodyne records:
//! simulated data sets over quadrature angles, convolution-kernel
//! calibration, Wiener deconvolution of the optical phase noise and
//! filtered-backprojection inversion to a Wigner function and density
//! matrix.
//!
//! The marginal at angle `theta` is the distribution of
//! `X cos θ − P sin θ`; the recorded outcome is `chi`-scaled position plus
//! Gaussian phase noise, so the rescaled record `P_L/chi` is the marginal
//! blurred by a kernel of variance `record_variance/chi²`.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::hilbert::{self, FockState, Marginal, WignerGrid};
use crate::measurement::{self, MeasurementSpec, OutcomeSampler};
use crate::numeric;
use crate::{Error, Result};

/// Bins per histogram (over mean +- 5 sigma of each angle's outcomes).
pub const HISTOGRAM_BINS: usize = 101;
/// Default Wiener regularization, as a fraction of the kernel's peak
/// spectral power.
pub const DEFAULT_DECONV_REG: f64 = 1e-4;
/// Width of the Gaussian apodization of the Ram-Lak filter, in units of
/// the projection grid step.
pub const DEFAULT_APODIZATION: f64 = 0.3;

/// Binned outcomes at one angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Uniform bins spanning `lo..hi`; outliers are clamped into the edge
    /// bins so the total count is preserved.
    pub fn bin(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &s in samples {
            let idx = ((s - lo) / width).floor();
            let idx = (idx.max(0.0) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Normalized density at the bin centers.
    pub fn density(&self) -> (Grid, Vec<f64>) {
        let centers = self.centers();
        let width = self.edges[1] - self.edges[0];
        let total = self.total() as f64;
        let grid = Grid::new(centers[0], centers[centers.len() - 1], centers.len())
            .expect("histogram grid");
        let values = self
            .counts
            .iter()
            .map(|&c| c as f64 / (total * width))
            .collect();
        (grid, values)
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        let centers = self.centers();
        let total = self.total() as f64;
        let mean = centers
            .iter()
            .zip(&self.counts)
            .map(|(c, &n)| c * n as f64)
            .sum::<f64>()
            / total;
        let var = centers
            .iter()
            .zip(&self.counts)
            .map(|(c, &n)| (c - mean).powi(2) * n as f64)
            .sum::<f64>()
            / total;
        (mean, var)
    }
}

/// A homodyne data set over a grid of quadrature angles.
#[derive(Debug, Clone)]
pub struct Tomogram {
    pub angles: Vec<f64>,
    pub shots_per_angle: usize,
    pub spec: MeasurementSpec,
    pub histograms: Vec<Histogram>,
}

#[derive(Serialize, Deserialize)]
struct TomogramDoc {
    angles: Vec<f64>,
    chi: f64,
    omega: f64,
    shots: usize,
    histograms: Vec<Histogram>,
}

impl Tomogram {
    pub fn to_json(&self) -> String {
        let doc = TomogramDoc {
            angles: self.angles.clone(),
            chi: self.spec.chi,
            omega: self.spec.omega_kick,
            shots: self.shots_per_angle,
            histograms: self.histograms.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("tomogram serialization")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: TomogramDoc =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("tomogram JSON: {e}")))?;
        let spec = MeasurementSpec::coherent_drive(doc.chi)?.with_kick(doc.omega);
        for h in &doc.histograms {
            if h.total() as usize != doc.shots {
                return Err(Error::Config(format!(
                    "histogram holds {} counts, expected {}",
                    h.total(),
                    doc.shots
                )));
            }
        }
        Ok(Self {
            angles: doc.angles,
            shots_per_angle: doc.shots,
            spec,
            histograms: doc.histograms,
        })
    }
}

/// Acquires binned outcome records of `state` at each angle: the state is
/// rotated, sampled `shots` times and binned. Per-angle RNG streams derive
/// from `master_seed`, so results are independent of scheduling.
pub fn acquire(
    state: &FockState,
    spec: &MeasurementSpec,
    angles: &[f64],
    shots: usize,
    master_seed: u64,
) -> Result<Tomogram> {
    acquire_parallel(state, spec, angles, shots, master_seed, 1)
}

/// Multi-threaded acquisition; identical output for any thread count.
pub fn acquire_parallel(
    state: &FockState,
    spec: &MeasurementSpec,
    angles: &[f64],
    shots: usize,
    master_seed: u64,
    threads: usize,
) -> Result<Tomogram> {
    if angles.is_empty() {
        return Err(Error::InsufficientAngles { needed: 1, got: 0 });
    }
    let threads = threads.max(1);
    let mut histograms: Vec<Option<Histogram>> = vec![None; angles.len()];

    let acquire_one = |angle_idx: usize| -> Result<Histogram> {
        let theta = angles[angle_idx];
        let rotated = state.rotate(theta);
        let sampler = OutcomeSampler::build(&rotated, spec)?;
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(angle_idx as u64);
        let samples: Vec<f64> = (0..shots).map(|_| sampler.draw(&mut rng)).collect();
        let (mean, var) = measurement::outcome_moments(&rotated, spec);
        let sigma = var.sqrt();
        Ok(Histogram::bin(
            &samples,
            mean - 5.0 * sigma,
            mean + 5.0 * sigma,
            HISTOGRAM_BINS,
        ))
    };

    if threads == 1 {
        for (i, slot) in histograms.iter_mut().enumerate() {
            *slot = Some(acquire_one(i)?);
        }
    } else {
        let results: Vec<(usize, Result<Histogram>)> = std::thread::scope(|scope| {
            let chunks: Vec<Vec<usize>> = (0..threads)
                .map(|t| (0..angles.len()).filter(|i| i % threads == t).collect())
                .collect();
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|idxs| {
                    let acquire_one = &acquire_one;
                    scope.spawn(move || {
                        idxs.into_iter()
                            .map(|i| (i, acquire_one(i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        for (i, res) in results {
            histograms[i] = Some(res?);
        }
    }

    Ok(Tomogram {
        angles: angles.to_vec(),
        shots_per_angle: shots,
        spec: *spec,
        histograms: histograms.into_iter().map(|h| h.unwrap()).collect(),
    })
}

/// The calibrated convolution kernel: outcome blur measured with the
/// mechanical position frozen.
#[derive(Debug, Clone, Serialize)]
pub struct Kernel {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub chi: f64,
}

impl Kernel {
    pub fn new(grid: Grid, values: Vec<f64>, chi: f64) -> Result<Self> {
        let integral = grid.trapezoid(&values);
        if (integral - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidState(format!(
                "kernel integrates to {integral}"
            )));
        }
        Ok(Self { grid, values, chi })
    }

    /// Exact Gaussian kernel for a known spec.
    pub fn exact(spec: &MeasurementSpec, half_width_sigmas: f64, n: usize) -> Result<Self> {
        let var = spec.record_variance();
        let sigma = var.sqrt();
        let grid = Grid::symmetric(half_width_sigmas * sigma, n)?;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
        let values: Vec<f64> =
            grid.iter().map(|p| norm * (-p * p / (2.0 * var)).exp()).collect();
        let integral = grid.trapezoid(&values);
        let values = values.into_iter().map(|v| v / integral).collect();
        Self::new(grid, values, spec.chi)
    }

    pub fn variance(&self) -> f64 {
        let weighted: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(p, &v)| p * p * v)
            .collect();
        self.grid.trapezoid(&weighted)
    }
}

/// Samples the outcome record with the cavity length fixed (no mechanical
/// contribution) and histograms it into a kernel estimate. The histogram
/// is symmetrized, since the kernel of a Gaussian drive is even.
pub fn calibrate_kernel(spec: &MeasurementSpec, shots: usize, rng_seed: u64) -> Result<Kernel> {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let sigma = spec.record_variance().sqrt();
    let samples: Vec<f64> = (0..shots)
        .map(|_| sigma * numeric::sample_standard_normal(&mut rng))
        .collect();
    let hist = Histogram::bin(&samples, -5.0 * sigma, 5.0 * sigma, HISTOGRAM_BINS);
    let (grid, mut values) = hist.density();
    let n = values.len();
    for i in 0..n / 2 {
        let avg = 0.5 * (values[i] + values[n - 1 - i]);
        values[i] = avg;
        values[n - 1 - i] = avg;
    }
    let integral = grid.trapezoid(&values);
    let values: Vec<f64> = values.into_iter().map(|v| v / integral).collect();
    Kernel::new(grid, values, spec.chi)
}

/// Calibrates `chi` by sweeping the frozen cavity displacement over known
/// values and fitting the slope of the mean outcome.
pub fn calibrate_chi(
    spec: &MeasurementSpec,
    displacements: &[f64],
    shots_per_point: usize,
    rng_seed: u64,
) -> Result<f64> {
    if displacements.len() < 2 {
        return Err(Error::Config("need at least two displacement points".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let sigma = spec.record_variance().sqrt();
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut sum_xx = 0.0;
    let mut sum_xy = 0.0;
    let n = displacements.len() as f64;
    for &x in displacements {
        let mean_outcome: f64 = (0..shots_per_point)
            .map(|_| spec.chi * x + sigma * numeric::sample_standard_normal(&mut rng))
            .sum::<f64>()
            / shots_per_point as f64;
        sum_x += x;
        sum_y += mean_outcome;
        sum_xx += x * x;
        sum_xy += x * mean_outcome;
    }
    let denom = n * sum_xx - sum_x * sum_x;
    if denom.abs() < 1e-300 {
        return Err(Error::Config("displacement points are degenerate".into()));
    }
    Ok((n * sum_xy - sum_x * sum_y) / denom)
}

/// Exact outcome density rescaled to the position axis, as a marginal:
/// `q(x) = chi * Pr(chi x)` for the state rotated by `theta`.
pub fn scaled_outcome_density(
    state: &FockState,
    spec: &MeasurementSpec,
    theta: f64,
    x_grid: &Grid,
) -> Result<Marginal> {
    if spec.chi <= 0.0 {
        return Err(Error::NoPositionInformation);
    }
    let rotated = state.rotate(theta);
    let p_grid = Grid::new(spec.chi * x_grid.min(), spec.chi * x_grid.max(), x_grid.len())?;
    let pdf = measurement::outcome_pdf(&rotated, spec, &p_grid)?;
    let values: Vec<f64> = pdf.into_iter().map(|v| v * spec.chi).collect();
    Marginal::new(theta, *x_grid, values)
}

/// Recovers the mechanical marginal from an outcome density rescaled to
/// the position axis, by Wiener-regularized spectral division with the
/// calibrated kernel.
///
/// `regularization` is relative to the kernel's peak spectral power;
/// [`DEFAULT_DECONV_REG`] is a good starting point for exact densities.
pub fn deconvolve(observed: &Marginal, kernel: &Kernel, regularization: f64) -> Result<Marginal> {
    if kernel.chi <= 0.0 {
        return Err(Error::NoPositionInformation);
    }
    if regularization < 0.0 {
        return Err(Error::InvalidParameter {
            name: "regularization",
            requirement: ">= 0",
            value: regularization,
        });
    }
    let grid = observed.grid;
    let n = grid.len();
    let dx = grid.step();
    let n_pad = (2 * n).next_power_of_two();

    // Kernel resampled to the signal grid spacing on the position axis:
    // k_x(u) = chi * k(chi u), wrapped so its center sits at index 0.
    let mut kernel_padded = vec![Complex64::new(0.0, 0.0); n_pad];
    let half = n_pad / 2;
    for i in 0..n_pad {
        let offset = (i as isize - half as isize) as f64 * dx;
        let v = kernel.chi * kernel.grid.interp(&kernel.values, kernel.chi * offset);
        kernel_padded[(i + half) % n_pad] = Complex64::new(v * dx, 0.0);
    }

    let mut signal = vec![Complex64::new(0.0, 0.0); n_pad];
    for (i, &v) in observed.values.iter().enumerate() {
        signal[i] = Complex64::new(v, 0.0);
    }

    numeric::fft(&mut signal);
    numeric::fft(&mut kernel_padded);
    let peak = kernel_padded.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let floor = regularization * peak;
    for (s, k) in signal.iter_mut().zip(&kernel_padded) {
        *s = *s * k.conj() / (k.norm_sqr() + floor);
    }
    numeric::ifft(&mut signal);

    let mut values: Vec<f64> = signal[..n].iter().map(|z| z.re.max(0.0)).collect();
    let integral = grid.trapezoid(&values);
    if !(integral.is_finite() && integral > 0.0) {
        return Err(Error::Numerical("deconvolution annihilated the signal".into()));
    }
    for v in &mut values {
        *v /= integral;
    }
    Marginal::new(observed.theta, grid, values)
}

/// Filtered backprojection: inverse Radon transform of the marginals to a
/// Wigner function, plus projection onto a physical density matrix.
///
/// Needs at least 12 angles over half a period. The Ram-Lak filter is
/// apodized with a Gaussian of width `DEFAULT_APODIZATION` grid steps.
pub fn reconstruct(
    marginals: &[Marginal],
    x_grid: &Grid,
    p_grid: &Grid,
    n_max: usize,
) -> Result<(WignerGrid, FockState)> {
    let wigner = reconstruct_wigner(marginals, x_grid, p_grid)?;
    let state = project_to_state(&wigner, n_max)?;
    Ok((wigner, state))
}

/// The inverse-Radon half of [`reconstruct`].
pub fn reconstruct_wigner(
    marginals: &[Marginal],
    x_grid: &Grid,
    p_grid: &Grid,
) -> Result<WignerGrid> {
    if marginals.len() < 12 {
        return Err(Error::InsufficientAngles {
            needed: 12,
            got: marginals.len(),
        });
    }
    let n_angles = marginals.len() as f64;
    let mut values = ndarray::Array2::zeros((x_grid.len(), p_grid.len()));
    for marginal in marginals {
        let filtered = ram_lak_filter(marginal);
        let (sin_t, cos_t) = marginal.theta.sin_cos();
        // Beyond its grid the filtered projection follows the asymptote
        // -(1 + 3 m2/s^2)/(pi s^2) set by the |k| kink (m2 the marginal's
        // second moment); clipping to zero instead leaves a positive
        // pedestal across the backprojection.
        let m2 = marginal.variance() + marginal.mean().powi(2);
        let margin = 0.05 * (marginal.grid.max() - marginal.grid.min());
        let lo = marginal.grid.min() + margin;
        let hi = marginal.grid.max() - margin;
        let q_at = |s: f64| -> f64 {
            if s >= lo && s <= hi {
                cubic_interp(&marginal.grid, &filtered, s)
            } else {
                -(1.0 + 3.0 * m2 / (s * s)) / (std::f64::consts::PI * s * s)
            }
        };
        for (ix, x) in x_grid.iter().enumerate() {
            for (ip, p) in p_grid.iter().enumerate() {
                let s = x * cos_t - p * sin_t;
                values[(ix, ip)] += q_at(s);
            }
        }
    }
    values.mapv_inplace(|v| v / (2.0 * n_angles));

    // Normalize the finite-grid integral before constructing, which also
    // absorbs ringing lost outside the grid.
    let mut w = values;
    let integral = {
        let col_sums: Vec<f64> = w
            .outer_iter()
            .map(|row| p_grid.trapezoid(row.as_slice().unwrap()))
            .collect();
        x_grid.trapezoid(&col_sums)
    };
    if !(integral.is_finite() && integral > 0.0) {
        return Err(Error::Numerical("backprojection integral is degenerate".into()));
    }
    w.mapv_inplace(|v| v / integral);
    WignerGrid::new(*x_grid, *p_grid, w)
}

/// Band-limited |k| filter with Gaussian apodization.
///
/// The convolution kernel is the analytic band-limited Ram-Lak response
/// sampled at the grid points (zero at even lags, `-2/(pi n^2 dx^2)` at odd
/// lags, `pi/(2 dx^2)` at zero lag), whose discrete spectrum has the exact
/// zero-DC behavior; a naive `|k|` weighting of FFT bins leaves a constant
/// cupping offset in the backprojection.
fn ram_lak_filter(marginal: &Marginal) -> Vec<f64> {
    let n = marginal.grid.len();
    let dx = marginal.grid.step();
    let n_pad = (2 * n).next_power_of_two();

    let mut kernel = vec![Complex64::new(0.0, 0.0); n_pad];
    kernel[0] = Complex64::new(std::f64::consts::PI / (2.0 * dx * dx), 0.0);
    let mut lag = 1usize;
    while lag <= n_pad / 2 {
        let h = -2.0 / (std::f64::consts::PI * (lag * lag) as f64 * dx * dx);
        kernel[lag] = Complex64::new(h, 0.0);
        kernel[n_pad - lag] = Complex64::new(h, 0.0);
        lag += 2;
    }

    let mut data = vec![Complex64::new(0.0, 0.0); n_pad];
    for (i, &v) in marginal.values.iter().enumerate() {
        data[i] = Complex64::new(v, 0.0);
    }
    numeric::fft(&mut data);
    numeric::fft(&mut kernel);
    let apod_width = DEFAULT_APODIZATION * dx;
    for ((z, h), k) in data
        .iter_mut()
        .zip(&kernel)
        .zip(numeric::fft_angular_freqs(n_pad, dx))
    {
        *z *= h * dx * (-0.5 * (k * apod_width).powi(2)).exp();
    }
    numeric::ifft(&mut data);
    data[..n].iter().map(|z| z.re).collect()
}

/// Projects a Wigner grid onto a positive, unit-trace density matrix on
/// `n_max + 1` levels (eigenvalue clipping).
pub fn project_to_state(wigner: &WignerGrid, n_max: usize) -> Result<FockState> {
    let dim = n_max + 1;
    let p_grid = &wigner.p_grid;

    // Working x grid fine enough to resolve products of the top basis
    // functions (frequency 2 sqrt(2 dim + 1)) and wide enough to hold their
    // classical support; W is interpolated onto it, vanishing beyond its
    // own grid.
    let p_basis = (2.0 * dim as f64 + 1.0).sqrt();
    let dx_work = (std::f64::consts::PI / (2.6 * p_basis)).min(wigner.x_grid.step());
    let lo = wigner.x_grid.min().min(-(p_basis + 4.0));
    let hi = wigner.x_grid.max().max(p_basis + 4.0);
    let nx = ((hi - lo) / dx_work).ceil() as usize + 1;
    let x_grid = Grid::new(lo, hi, nx)?;

    // Position representation:
    // rho(x1, x2) = int W((x1+x2)/2, p) e^{i p (x1-x2)} dp.
    let mut rho_x = ndarray::Array2::zeros((nx, nx));
    let dp = p_grid.step();
    let pts: Vec<f64> = p_grid.points();
    for i in 0..nx {
        for j in 0..nx {
            let center = 0.5 * (x_grid.point(i) + x_grid.point(j));
            let v = x_grid.point(i) - x_grid.point(j);
            let mut acc = Complex64::new(0.0, 0.0);
            for (ip, &p) in pts.iter().enumerate() {
                let w_here = interp_x(wigner, center, ip);
                let weight = if ip == 0 || ip == pts.len() - 1 { 0.5 } else { 1.0 };
                acc += Complex64::from_polar(weight * dp * w_here, p * v);
            }
            rho_x[(i, j)] = acc;
        }
    }

    // Galerkin projection onto the number basis with trapezoid weights.
    let basis = hilbert::position_basis(&x_grid, dim);
    let dx = x_grid.step();
    let mut weighted = ndarray::Array2::zeros((nx, dim));
    for i in 0..nx {
        let w = if i == 0 || i == nx - 1 { 0.5 * dx } else { dx };
        for m in 0..dim {
            weighted[(i, m)] = basis[(i, m)] * w;
        }
    }
    let re = rho_x.mapv(|z: Complex64| z.re);
    let im = rho_x.mapv(|z: Complex64| z.im);
    let rho_re = weighted.t().dot(&re).dot(&weighted);
    let rho_im = weighted.t().dot(&im).dot(&weighted);
    let mut rho = ndarray::Array2::zeros((dim, dim));
    for m in 0..dim {
        for k in 0..dim {
            rho[(m, k)] = Complex64::new(rho_re[(m, k)], rho_im[(m, k)]);
        }
    }
    let rho = crate::linalg::hermitize(&rho);

    // Physical projection: clip negative eigenvalues, renormalize.
    let (vals, vecs) = crate::linalg::eigh(&rho)?;
    let clipped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::Numerical(
            "reconstructed state has no positive weight".into(),
        ));
    }
    let mut phys = ndarray::Array2::zeros((dim, dim));
    for (idx, &l) in clipped.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        for a in 0..dim {
            for b in 0..dim {
                phys[(a, b)] += vecs[(a, idx)] * vecs[(b, idx)].conj() * (l / total);
            }
        }
    }
    // Estimates carry a backprojection noise floor in every level; the
    // strict adequacy bound applies to exactly constructed states only.
    FockState::from_matrix_with_tail_bound(phys, RECONSTRUCTION_TAIL_BOUND)
}

/// Adequacy bound applied to reconstructed estimates. Finite-shot runs
/// leave statistical noise of order shots^{-1/2} in every level, so this
/// sits well above the bound for exactly constructed states.
pub const RECONSTRUCTION_TAIL_BOUND: f64 = 1e-2;

/// Catmull-Rom interpolation on a uniform grid; linear at the edges.
fn cubic_interp(grid: &Grid, values: &[f64], x: f64) -> f64 {
    if x < grid.min() || x > grid.max() {
        return 0.0;
    }
    let s = (x - grid.min()) / grid.step();
    let i = (s.floor() as usize).min(grid.len() - 2);
    let t = s - i as f64;
    if i == 0 || i + 2 >= grid.len() {
        return values[i] * (1.0 - t) + values[i + 1] * t;
    }
    let (p0, p1, p2, p3) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
    0.5 * ((2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

fn interp_x(wigner: &WignerGrid, x: f64, ip: usize) -> f64 {
    let grid = &wigner.x_grid;
    if x < grid.min() || x > grid.max() {
        return 0.0;
    }
    let s = (x - grid.min()) / grid.step();
    let i = (s.floor() as usize).min(grid.len() - 2);
    let t = s - i as f64;
    if i == 0 || i + 2 >= grid.len() {
        return wigner.values[(i, ip)] * (1.0 - t) + wigner.values[(i + 1, ip)] * t;
    }
    let p0 = wigner.values[(i - 1, ip)];
    let p1 = wigner.values[(i, ip)];
    let p2 = wigner.values[(i + 1, ip)];
    let p3 = wigner.values[(i + 2, ip)];
    0.5 * ((2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Ratio of the central interference-fringe amplitude to the envelope.
///
/// Local extrema locate the oscillation and its period; the amplitude is
/// read off as the spectral weight at the fringe frequency relative to the
/// total weight.
pub fn fringe_visibility(marginal: &Marginal) -> Result<f64> {
    let values = &marginal.values;
    let n = values.len();
    let dx = marginal.grid.step();
    let peak = values.iter().cloned().fold(0.0, f64::max);

    // Envelope estimate by heavy Gaussian smoothing; fringes survive in
    // the detrended ratio even when the envelope slope hides them in the
    // raw density (a blurred cat has inflections, not side maxima).
    let sigma = marginal.variance().sqrt();
    let smooth_width = (0.5 * sigma).max(2.0 * dx);
    let half_kernel = (4.0 * smooth_width / dx).ceil() as isize;
    let envelope: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in -half_kernel..=half_kernel {
                let j = i as isize + k;
                if j < 0 || j >= n as isize {
                    continue;
                }
                let w = (-0.5 * (k as f64 * dx / smooth_width).powi(2)).exp();
                acc += w * values[j as usize];
                norm += w;
            }
            acc / norm
        })
        .collect();

    // Alternating extrema of the detrended ratio locate the oscillation.
    let mut extrema: Vec<(f64, f64)> = Vec::new();
    for i in 1..n - 1 {
        if envelope[i] < 0.02 * peak {
            continue;
        }
        let r_prev = values[i - 1] / envelope[i - 1].max(1e-300);
        let r = values[i] / envelope[i].max(1e-300);
        let r_next = values[i + 1] / envelope[i + 1].max(1e-300);
        let is_max = r > r_prev && r > r_next;
        let is_min = r < r_prev && r < r_next;
        if is_max || is_min {
            extrema.push((marginal.grid.point(i), r));
        }
    }
    let significant: Vec<&(f64, f64)> = extrema
        .windows(2)
        .filter(|w| (w[0].1 - w[1].1).abs() > 0.05)
        .flat_map(|w| [&w[0], &w[1]])
        .collect();
    if significant.len() < 3 {
        return Err(Error::NoOscillation);
    }
    // Adjacent (alternating) extrema sit half a fringe period apart; the
    // median spacing is robust against residual noise extrema.
    let mut spacings = Vec::new();
    for w in extrema.windows(2) {
        let spacing = w[1].0 - w[0].0;
        if (w[0].1 - w[1].1).abs() > 0.05 && spacing > 2.0 * dx {
            spacings.push(spacing);
        }
    }
    if spacings.is_empty() {
        return Err(Error::NoOscillation);
    }
    spacings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_half_period = spacings[spacings.len() / 2];
    let omega0 = std::f64::consts::PI / median_half_period;

    // Refine the fringe frequency on the envelope-subtracted residual,
    // whose spectrum peaks at the fringe frequency without competition
    // from the envelope's own low-frequency weight.
    let residual: Vec<f64> = values.iter().zip(&envelope).map(|(v, e)| v - e).collect();
    let amplitude = |omega: f64| -> f64 {
        let re: Vec<f64> = marginal
            .grid
            .iter()
            .zip(&residual)
            .map(|(x, &v)| v * (omega * x).cos())
            .collect();
        let im: Vec<f64> = marginal
            .grid
            .iter()
            .zip(&residual)
            .map(|(x, &v)| v * (omega * x).sin())
            .collect();
        let re = marginal.grid.trapezoid(&re);
        let im = marginal.grid.trapezoid(&im);
        (re * re + im * im).sqrt()
    };
    let mut best = (omega0, amplitude(omega0));
    for i in -80..=80 {
        let omega = omega0 * (1.0 + 0.005 * i as f64);
        let a = amplitude(omega);
        if a > best.1 {
            best = (omega, a);
        }
    }
    let omega = best.0;

    // Central fringe contrast from three samples of the density: for a
    // Gaussian-enveloped fringe p = A e^{-x^2/(2 s^2)} (1 + V cos(omega x))
    // the envelope solves out of p(0), p(pi/omega), p(2 pi/omega):
    // u^4 = p2/p0, V = (1 - g)/(1 + g) with g = u p1 / sqrt(p0 p2).
    let center_x = extrema
        .iter()
        .filter(|(_, r)| *r > 1.0)
        .min_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap())
        .ok_or(Error::NoOscillation)?
        .0;
    let period = 2.0 * std::f64::consts::PI / omega;
    let sample = |x: f64| cubic_interp(&marginal.grid, values, x).max(0.0);
    let p0 = sample(center_x);
    let p1 = (sample(center_x - 0.5 * period) * sample(center_x + 0.5 * period)).sqrt();
    let p2 = (sample(center_x - period) * sample(center_x + period)).sqrt();
    if p0 <= 0.0 || p2 <= 0.0 {
        return Err(Error::NoOscillation);
    }
    let u = (p2 / p0).powf(0.25);
    let g = u * p1 / (p0 * p2).sqrt();
    let v = (1.0 - g) / (1.0 + g);
    Ok(v.clamp(0.0, 1.0))
}
