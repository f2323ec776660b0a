//! `pomsim tomography`: simulated homodyne acquisition (or the exact-density
//! pipeline), kernel calibration, deconvolution, reconstruction and a
//! fidelity report.

use std::path::Path;

use pomsim::gaussian;
use pomsim::grid::Grid;
use pomsim::hilbert::{self, FockState, Marginal};
use pomsim::tomography;
use serde::Serialize;

use crate::config::{StateTable, TomographyConfig};
use crate::output::{write_atomic, write_json, CsvWriter};
use crate::CliError;

#[derive(Serialize)]
struct FidelityReport {
    fidelity_to_true_state: f64,
    wigner_min: f64,
    reconstructed_n_eff: f64,
    calibrated_chi: f64,
    kernel_variance: f64,
    angles: usize,
    shots_per_angle: usize,
    exact_density_mode: bool,
}

fn build_state(table: &StateTable) -> Result<FockState, CliError> {
    let state = match table {
        StateTable::Thermal { nbar, n_max } => {
            let n = n_max.unwrap_or_else(|| hilbert::default_n_max(*nbar, 0.0));
            FockState::thermal(*nbar, n)?
        }
        StateTable::Coherent { re, im, n_max } => {
            let alpha = num_complex::Complex64::new(*re, *im);
            let n = n_max.unwrap_or_else(|| hilbert::default_n_max(0.0, alpha.norm()));
            FockState::coherent(alpha, n)?
        }
        StateTable::Cat { delta, axis, n_max } => {
            let n = n_max.unwrap_or_else(|| hilbert::default_n_max(0.0, *delta));
            FockState::cat(*delta, *axis, n)?
        }
    };
    Ok(state)
}

pub fn run(cfg: &TomographyConfig, out_dir: &Path, seed: u64, threads: usize) -> Result<(), CliError> {
    cfg.measurement.validate()?;
    let spec = cfg.measurement;
    if cfg.scan.angles == 0 {
        return Err(CliError::Config("scan.angles must be positive".into()));
    }
    let state = build_state(&cfg.state)?;
    let angles: Vec<f64> = (0..cfg.scan.angles)
        .map(|i| std::f64::consts::PI * i as f64 / cfg.scan.angles as f64)
        .collect();

    // Marginal grid wide enough for the largest rotated variance.
    let moments = state.moments();
    let sigma_max = moments.var_x.max(moments.var_p).sqrt();
    let record_sigma = (spec.record_variance() + spec.chi * spec.chi * sigma_max * sigma_max)
        .sqrt()
        / spec.chi.max(1e-12);
    let marginal_half = cfg
        .grids
        .marginal_half_width
        .unwrap_or_else(|| (6.5 * record_sigma).max(6.5 * sigma_max));
    let marginal_grid = Grid::symmetric(marginal_half, cfg.grids.marginal_points)?;
    let phase_grid = Grid::symmetric(cfg.grids.phase_half_width, cfg.grids.phase_points)?;

    // Kernel: calibrated from samples in sampling mode, exact otherwise.
    let exact_mode = cfg.scan.shots == 0;
    let kernel = if exact_mode {
        tomography::Kernel::exact(&spec, 8.0, 401)?
    } else {
        tomography::calibrate_kernel(&spec, cfg.scan.kernel_shots, seed ^ 0x6b65726e)?
    };
    let calibrated_chi = if exact_mode {
        spec.chi
    } else {
        tomography::calibrate_chi(
            &spec,
            &[-4.0, -2.0, 0.0, 2.0, 4.0],
            cfg.scan.kernel_shots / 5,
            seed ^ 0x63686921,
        )?
    };

    let mut kernel_csv = CsvWriter::new();
    kernel_csv
        .comment("columns", "offset,density")
        .comment("calibrated_chi", kernel.chi)
        .comment("variance", kernel.variance())
        .header(&["offset", "density"]);
    for (x, v) in kernel.grid.iter().zip(&kernel.values) {
        kernel_csv.row(&[x, *v]);
    }
    kernel_csv.write(&out_dir.join("kernel.csv"))?;

    // Acquire (sampled mode only) and derive per-angle observed densities.
    let observed: Vec<Marginal> = if exact_mode {
        angles
            .iter()
            .map(|&theta| tomography::scaled_outcome_density(&state, &spec, theta, &marginal_grid))
            .collect::<Result<_, _>>()?
    } else {
        let tomogram = tomography::acquire_parallel(
            &state,
            &spec,
            &angles,
            cfg.scan.shots,
            seed,
            threads,
        )?;
        write_atomic(&out_dir.join("tomogram.json"), &tomogram.to_json())?;
        if spec.chi <= 0.0 {
            return Err(CliError::Numeric(
                pomsim::Error::NoPositionInformation.to_string(),
            ));
        }
        tomogram
            .histograms
            .iter()
            .zip(&angles)
            .map(|(h, &theta)| {
                let (grid, density) = h.density();
                // Rescale the outcome axis to position via P_L / chi.
                let x_grid = Grid::new(grid.min() / spec.chi, grid.max() / spec.chi, grid.len())?;
                let values: Vec<f64> = density.into_iter().map(|v| v * spec.chi).collect();
                Marginal::from_density_estimate(theta, x_grid, values)
            })
            .collect::<Result<_, _>>()?
    };

    let deconvolved: Vec<Marginal> = observed
        .iter()
        .map(|m| tomography::deconvolve(m, &kernel, cfg.deconvolution.regularization))
        .collect::<Result<_, _>>()?;

    let mut marg_csv = CsvWriter::new();
    let mgrid = deconvolved[0].grid;
    marg_csv
        .comment("columns", "theta,x,density")
        .comment("angles", angles.len())
        .comment(
            "x_grid",
            format!("[{}, {}] n={}", mgrid.min(), mgrid.max(), mgrid.len()),
        )
        .header(&["theta", "x", "density"]);
    for m in &deconvolved {
        for (x, v) in m.grid.iter().zip(&m.values) {
            marg_csv.row(&[m.theta, x, *v]);
        }
    }
    marg_csv.write(&out_dir.join("marginals.csv"))?;

    let (wigner, estimate) =
        tomography::reconstruct(&deconvolved, &phase_grid, &phase_grid, cfg.reconstruction.n_max)?;

    let mut wigner_csv = CsvWriter::new();
    wigner_csv
        .comment("columns", "x,p,w")
        .comment("x_grid", format!("[{}, {}] n={}", phase_grid.min(), phase_grid.max(), phase_grid.len()))
        .comment("p_grid", format!("[{}, {}] n={}", phase_grid.min(), phase_grid.max(), phase_grid.len()))
        .header(&["x", "p", "w"]);
    for (ix, x) in phase_grid.iter().enumerate() {
        for (ip, p) in phase_grid.iter().enumerate() {
            wigner_csv.row(&[x, p, wigner.values[(ix, ip)]]);
        }
    }
    wigner_csv.write(&out_dir.join("wigner.csv"))?;

    // Fidelity against the (known) simulated input state. The estimate may
    // live on a different truncation; compare on the larger one.
    let dim = estimate.dim().max(state.dim());
    let fidelity = embed(&state, dim)?.fidelity(&embed(&estimate, dim)?)?;
    let m = estimate.moments();
    let n_eff = gaussian::effective_occupation(&gaussian::GaussianState::from_moments(&m)?);
    let report = FidelityReport {
        fidelity_to_true_state: fidelity,
        wigner_min: wigner.min_value(),
        reconstructed_n_eff: n_eff,
        calibrated_chi,
        kernel_variance: kernel.variance(),
        angles: angles.len(),
        shots_per_angle: cfg.scan.shots,
        exact_density_mode: exact_mode,
    };
    write_json(&out_dir.join("fidelity.json"), &report)?;
    println!(
        "tomography: fidelity = {fidelity:.4}, wigner min = {:.4}, n_eff = {n_eff:.4}",
        wigner.min_value()
    );
    Ok(())
}

fn embed(state: &FockState, dim: usize) -> Result<FockState, CliError> {
    if state.dim() == dim {
        return Ok(state.clone());
    }
    let mut m = ndarray::Array2::zeros((dim, dim));
    for i in 0..state.dim() {
        for j in 0..state.dim() {
            m[(i, j)] = state.matrix()[(i, j)];
        }
    }
    FockState::from_matrix_with_tail_bound(m, 1.0).map_err(CliError::from)
}
