//! Closed-form Gaussian-state path: outcome statistics of a pulsed position
//! measurement, conditional state updates, purification predictions and
//! thermal-bath relaxation. Everything here is moments-only and exact, and
//! is cross-checked against the number-basis representation in `hilbert`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::constants::{HBAR, K_B};
use crate::hilbert::Moments;
use crate::numeric;
use crate::{Error, Result};

/// Default input phase-noise variance for a coherent drive.
pub const COHERENT_DRIVE_VAR: f64 = 0.5;

/// Gaussian mechanical state: mean quadrature vector and 2x2 covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    mean: [f64; 2],
    /// [var_x, cov_xp, var_p]; symmetric by construction.
    cov: [f64; 3],
}

impl GaussianState {
    pub fn new(mean: [f64; 2], var_x: f64, cov_xp: f64, var_p: f64) -> Result<Self> {
        let s = Self {
            mean,
            cov: [var_x, cov_xp, var_p],
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let [vx, cxp, vp] = self.cov;
        let det = vx * vp - cxp * cxp;
        if !(vx > 0.0 && vp > 0.0 && det > 0.0) {
            return Err(Error::InvalidState(format!(
                "covariance not positive definite: var_x {vx}, var_p {vp}, det {det}"
            )));
        }
        if det < 0.25 - 1e-9 {
            return Err(Error::InvalidState(format!(
                "covariance determinant {det} violates the Heisenberg bound 1/4"
            )));
        }
        Ok(())
    }

    pub fn from_moments(m: &Moments) -> Result<Self> {
        Self::new([m.mean_x, m.mean_p], m.var_x, m.cov_xp, m.var_p)
    }

    pub fn mean_x(&self) -> f64 {
        self.mean[0]
    }

    pub fn mean_p(&self) -> f64 {
        self.mean[1]
    }

    pub fn var_x(&self) -> f64 {
        self.cov[0]
    }

    pub fn cov_xp(&self) -> f64 {
        self.cov[1]
    }

    pub fn var_p(&self) -> f64 {
        self.cov[2]
    }

    pub fn det_cov(&self) -> f64 {
        self.cov[0] * self.cov[2] - self.cov[1] * self.cov[1]
    }
}

/// Thermal state with mean occupation `nbar`.
pub fn thermal_gaussian(nbar: f64) -> Result<GaussianState> {
    if nbar < 0.0 {
        return Err(Error::InvalidParameter {
            name: "nbar",
            requirement: ">= 0",
            value: nbar,
        });
    }
    let v = nbar + 0.5;
    GaussianState::new([0.0, 0.0], v, 0.0, v)
}

/// Harmonic evolution by angle `theta`: means map as
/// `X -> X cos θ − P sin θ`, `P -> X sin θ + P cos θ`.
pub fn rotate_gaussian(g: &GaussianState, theta: f64) -> GaussianState {
    let (s, c) = theta.sin_cos();
    let [mx, mp] = g.mean;
    let [vx, cxp, vp] = g.cov;
    let mean = [c * mx - s * mp, s * mx + c * mp];
    let vx2 = c * c * vx - 2.0 * s * c * cxp + s * s * vp;
    let vp2 = s * s * vx + 2.0 * s * c * cxp + c * c * vp;
    let cxp2 = s * c * (vx - vp) + (c * c - s * s) * cxp;
    GaussianState {
        mean,
        cov: [vx2, cxp2, vp2],
    }
}

/// Mean and variance of the homodyne outcome of a pulse with measurement
/// strength `chi` on state `g`, for a coherent drive.
pub fn pulse_outcome_stats(g: &GaussianState, chi: f64) -> (f64, f64) {
    pulse_outcome_stats_with_noise(g, chi, COHERENT_DRIVE_VAR)
}

/// Same with a configurable input phase-noise variance.
pub fn pulse_outcome_stats_with_noise(g: &GaussianState, chi: f64, var_pl_in: f64) -> (f64, f64) {
    (chi * g.mean_x(), var_pl_in + chi * chi * g.var_x())
}

/// Conditional state after a pulsed measurement with outcome `p_l`,
/// measurement strength `chi` and momentum kick `omega` (coherent drive).
pub fn conditional_update(g: &GaussianState, chi: f64, omega: f64, p_l: f64) -> GaussianState {
    conditional_update_with_noise(g, chi, omega, p_l, COHERENT_DRIVE_VAR)
}

/// Conditional update with configurable input phase-noise variance.
///
/// The position block is the standard conditional-Gaussian (Schur
/// complement) update for the linear record `P_L = chi X + noise`; the
/// momentum picks up the kick `omega` plus the measurement back-action
/// `chi²/(4 var_pl_in)`, which for a coherent drive is `chi²/2`.
pub fn conditional_update_with_noise(
    g: &GaussianState,
    chi: f64,
    omega: f64,
    p_l: f64,
    var_pl_in: f64,
) -> GaussianState {
    let [mx, mp] = [g.mean_x(), g.mean_p()];
    let [vx, cxp, vp] = [g.var_x(), g.cov_xp(), g.var_p()];
    let r = var_pl_in;

    let vx_new = 1.0 / (1.0 / vx + chi * chi / r);
    let mx_new = vx_new * (mx / vx + chi * p_l / r);
    let cxp_new = cxp * vx_new / vx;
    let vp_new = vp - cxp * cxp / vx + chi * chi / (4.0 * r) + cxp_new * cxp_new / vx_new;
    let mp_new = mp + omega + (cxp / vx) * (mx_new - mx);

    GaussianState {
        mean: [mx_new, mp_new],
        cov: [vx_new, cxp_new, vp_new],
    }
}

/// Draw one outcome from the pulse statistics, reproducibly from `seed`.
pub fn sample_outcome(g: &GaussianState, chi: f64, rng_seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    sample_outcome_with_rng(g, chi, COHERENT_DRIVE_VAR, &mut rng)
}

pub fn sample_outcome_with_rng(
    g: &GaussianState,
    chi: f64,
    var_pl_in: f64,
    rng: &mut ChaCha12Rng,
) -> f64 {
    let (mean, var) = pulse_outcome_stats_with_noise(g, chi, var_pl_in);
    mean + var.sqrt() * numeric::sample_standard_normal(rng)
}

/// Effective thermal occupation, defined through the axis-fixed variances
/// at θ = 0 and θ = π/2: `1 + 2 n_eff = sqrt(4 Var_X Var_P)`.
pub fn effective_occupation(g: &GaussianState) -> f64 {
    0.5 * ((4.0 * g.var_x() * g.var_p()).sqrt() - 1.0)
}

/// Markovian thermal bath acting on the mechanical mode.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BathSpec {
    /// Mechanical damping rate (rad/s).
    pub gamma_m: f64,
    /// Mean bath occupation.
    pub nbar_bath: f64,
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
}

impl BathSpec {
    pub fn new(gamma_m: f64, nbar_bath: f64, omega_m: f64) -> Result<Self> {
        let spec = Self {
            gamma_m,
            nbar_bath,
            omega_m,
        };
        if !(gamma_m > 0.0 && omega_m > 0.0) || nbar_bath < 0.0 {
            return Err(Error::Config(format!("bath rates must be positive: {spec:?}")));
        }
        if spec.quality() < 1.0 {
            return Err(Error::Config(format!(
                "mechanical quality {} below 1",
                spec.quality()
            )));
        }
        Ok(spec)
    }

    pub fn from_quality(quality: f64, nbar_bath: f64, omega_m: f64) -> Result<Self> {
        Self::new(omega_m / quality, nbar_bath, omega_m)
    }

    pub fn quality(&self) -> f64 {
        self.omega_m / self.gamma_m
    }
}

/// Exact Bose-Einstein occupation at temperature `t` (K).
pub fn bose_einstein_occupation(t: f64, omega_m: f64) -> f64 {
    let x = HBAR * omega_m / (K_B * t);
    1.0 / (x.exp() - 1.0)
}

/// High-temperature form `k_B T / (ħ ω_M)`.
pub fn high_temperature_occupation(t: f64, omega_m: f64) -> f64 {
    K_B * t / (HBAR * omega_m)
}

/// Damped evolution for duration `t`: rotating-frame exponential relaxation
/// of the covariance toward the bath's thermal point, composed with the
/// harmonic rotation by `ω_M t`.
///
/// The relaxation map reproduces the bath-heating rate `n̄ γ_M` of a weakly
/// coupled Markovian bath for `γ_M t ≪ 1` and remains a valid Gaussian
/// channel for all `t`.
pub fn thermalize(g: &GaussianState, bath: &BathSpec, t: f64) -> Result<GaussianState> {
    if t < 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            requirement: ">= 0",
            value: t,
        });
    }
    let lambda = (-bath.gamma_m * t).exp();
    let v_th = bath.nbar_bath + 0.5;
    let relaxed = GaussianState {
        mean: [
            g.mean[0] * lambda.sqrt(),
            g.mean[1] * lambda.sqrt(),
        ],
        cov: [
            v_th + lambda * (g.cov[0] - v_th),
            lambda * g.cov[1],
            v_th + lambda * (g.cov[2] - v_th),
        ],
    };
    Ok(rotate_gaussian(&relaxed, bath.omega_m * t))
}

/// Time for an initially squeezed variance (`chi > 1`) to rethermalize to
/// the ground-state value 1/2: `τ = (Q / n̄ ω_M) · (1 − 1/χ²)/2`.
pub fn squeezing_lifetime(chi: f64, quality: f64, nbar: f64, omega_m: f64) -> Result<f64> {
    if chi <= 1.0 {
        return Err(Error::InvalidParameter {
            name: "chi",
            requirement: "> 1 (no squeezing to lose otherwise)",
            value: chi,
        });
    }
    Ok(quality / (nbar * omega_m) * 0.5 * (1.0 - 1.0 / (chi * chi)))
}

/// Ideal two-pulse effective occupation in the large-`n̄` limit:
/// `(sqrt(1 + 1/χ⁴) − 1)/2`.
pub fn predicted_neff2(chi: f64) -> f64 {
    0.5 * ((1.0 + chi.powi(-4)).sqrt() - 1.0)
}

/// Two-pulse effective occupation including rethermalization during the
/// quarter-period gap: `(sqrt(1 + 1/χ⁴ + π n̄/(Q χ²)) − 1)/2`.
pub fn predicted_neff2_thermal(chi: f64, quality: f64, nbar: f64) -> f64 {
    let inside = 1.0 + chi.powi(-4) + std::f64::consts::PI * nbar / (quality * chi * chi);
    0.5 * (inside.sqrt() - 1.0)
}
