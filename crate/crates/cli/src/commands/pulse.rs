//! `pomsim pulse`: drive/response/local-oscillator curves and the derived
//! measurement parameters.

use std::path::Path;

use pomsim::grid::Grid;
use pomsim::pulse::{self, PulseSpec};
use serde::Serialize;

use crate::config::{EnvelopeChoice, PulseConfig};
use crate::output::{write_json, CsvWriter};
use crate::CliError;

#[derive(Serialize)]
struct PulseSummary {
    kappa: f64,
    g0: f64,
    n_photons: f64,
    eta: f64,
    chi: f64,
    omega_kick: f64,
    n_phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finite_evolution: Option<FiniteEvolutionSummary>,
}

#[derive(Serialize)]
struct FiniteEvolutionSummary {
    omega_m_over_kappa: f64,
    xi: [f64; 3],
    norms: [f64; 3],
    zeta: f64,
    corrected_variance_at_chi: f64,
}

pub fn run(cfg: &PulseConfig, out_dir: &Path) -> Result<(), CliError> {
    let (kappa, g0, omega_m, derived) = match (&cfg.physical, &cfg.cavity) {
        (Some(p), None) => {
            let d = pulse::derive_physical(p)?;
            (d.kappa, d.g0, Some(p.omega_m), Some(d))
        }
        (None, Some(c)) => (c.kappa, c.g0, c.omega_m, None),
        _ => {
            return Err(CliError::Config(
                "provide exactly one of [physical] or [cavity]".into(),
            ))
        }
    };

    let span = cfg.pulse.span_over_kappa.unwrap_or(pulse::DEFAULT_SPAN_OVER_KAPPA) / kappa;
    let points = cfg.pulse.points.unwrap_or(pulse::DEFAULT_GRID_POINTS);
    let grid = Grid::symmetric(span, points)?;
    let spec = match &cfg.pulse.envelope {
        EnvelopeChoice::File { path } => {
            PulseSpec::read_envelope(Path::new(path), kappa, g0, cfg.pulse.n_photons, cfg.pulse.eta)?
        }
        choice => {
            let shape = choice.as_shape().expect("non-file choice");
            PulseSpec::shaped(kappa, g0, cfg.pulse.n_photons, cfg.pulse.eta, shape, &grid)?
        }
    };

    let response = pulse::compute_response(&spec)?;

    let mut csv = CsvWriter::new();
    csv.comment("columns", "time_s,alpha_in,alpha,alpha_lo")
        .comment("kappa_rad_per_s", kappa)
        .comment("points", spec.t_grid.len())
        .header(&["time_s", "alpha_in", "alpha", "alpha_lo"]);
    for (i, t) in spec.t_grid.iter().enumerate() {
        csv.row(&[t, spec.envelope[i], response.alpha[i], response.lo_envelope[i]]);
    }
    csv.write(&out_dir.join("envelope.csv"))?;

    let finite_evolution = match omega_m {
        Some(omega_m) if omega_m / kappa <= 0.1 => {
            let coeffs = pulse::finite_evolution_coeffs(&spec, omega_m)?;
            Some(FiniteEvolutionSummary {
                omega_m_over_kappa: omega_m / kappa,
                xi: coeffs.xi,
                norms: coeffs.norms,
                zeta: coeffs.zeta,
                corrected_variance_at_chi: pulse::corrected_conditional_variance(
                    response.chi,
                    omega_m / kappa,
                    coeffs.zeta,
                ),
            })
        }
        _ => None,
    };

    let summary = PulseSummary {
        kappa,
        g0,
        n_photons: cfg.pulse.n_photons,
        eta: cfg.pulse.eta,
        chi: response.chi,
        omega_kick: response.omega_kick,
        n_phi: response.n_phi,
        x0: derived.map(|d| d.x0),
        omega_c: derived.map(|d| d.omega_c),
        finite_evolution,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    println!(
        "pulse: chi = {:.4}, omega_kick = {:.4e}",
        response.chi, response.omega_kick
    );
    Ok(())
}
