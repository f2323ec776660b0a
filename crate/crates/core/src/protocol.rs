//! Experiment orchestration: pulse sequences with free evolution and bath
//! coupling. Covers single-pulse squeezing, two-pulse purification,
//! read-out sessions with conditional-mean compensation and the momentum
//! calibration procedure.
//!
//! A sequence runs either on the closed-form Gaussian path or on the
//! number-basis path; pulses draw a uniform variate and push it through
//! the representation's outcome CDF, so the two paths see (numerically)
//! the same outcomes under the same seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::gaussian::{self, BathSpec, GaussianState};
use crate::hilbert::{self, CatAxis, FockState};
use crate::measurement::{self, MeasurementRecord, MeasurementSpec, OutcomeSampler};
use crate::numeric;
use crate::{Error, Result};

/// Initial mechanical state of a sequence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateDescriptor {
    Thermal { nbar: f64 },
    Coherent { re: f64, im: f64 },
    Cat { delta: f64, axis: CatAxis },
}

/// Which state representation carries the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Gaussian,
    Fock,
}

/// One step of a pulse sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Pulsed measurement; the outcome is sampled unless forced.
    Pulse {
        spec: MeasurementSpec,
        #[serde(default)]
        forced_outcome: Option<f64>,
    },
    /// Free harmonic evolution by a phase-space angle.
    Evolve { theta: f64 },
    /// Free harmonic evolution for a duration (needs `omega_m`).
    EvolveDuration { seconds: f64 },
    /// Damped evolution in contact with a thermal bath.
    Thermalize { seconds: f64, bath: BathSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub initial: StateDescriptor,
    pub steps: Vec<Step>,
    pub representation: Representation,
    pub master_seed: u64,
    /// Mechanical angular frequency; required when steps carry durations.
    #[serde(default)]
    pub omega_m: Option<f64>,
    /// Number-basis truncation override for the Fock representation.
    #[serde(default)]
    pub n_max: Option<usize>,
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.representation == Representation::Gaussian {
            if let StateDescriptor::Cat { .. } = self.initial {
                return Err(Error::Config(
                    "cat initial states need the fock representation".into(),
                ));
            }
        }
        for step in &self.steps {
            match step {
                Step::Pulse { spec, .. } => spec.validate()?,
                Step::EvolveDuration { .. } if self.omega_m.is_none() => {
                    return Err(Error::Config(
                        "evolve_duration steps need omega_m in the config".into(),
                    ));
                }
                Step::Thermalize { bath, .. } => {
                    if let Some(omega_m) = self.omega_m {
                        if (bath.omega_m - omega_m).abs() > 1e-9 * omega_m {
                            return Err(Error::Config(format!(
                                "bath omega_m {} disagrees with config omega_m {omega_m}",
                                bath.omega_m
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Moments of the state after a step (full state kept on the Fock path).
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
    pub n_eff: f64,
    #[serde(skip)]
    pub fock: Option<FockState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<MeasurementRecord>,
}

impl Trajectory {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serialization")
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("snapshots are never empty")
    }
}

enum EngineState {
    Gaussian(GaussianState),
    Fock(FockState),
}

impl EngineState {
    fn moments(&self) -> (f64, f64, f64, f64, f64) {
        match self {
            EngineState::Gaussian(g) => {
                (g.mean_x(), g.mean_p(), g.var_x(), g.var_p(), g.cov_xp())
            }
            EngineState::Fock(f) => {
                let m = f.moments();
                (m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp)
            }
        }
    }

    fn snapshot(&self) -> Snapshot {
        let (mean_x, mean_p, var_x, var_p, cov_xp) = self.moments();
        Snapshot {
            mean_x,
            mean_p,
            var_x,
            var_p,
            cov_xp,
            n_eff: 0.5 * ((4.0 * var_x * var_p).sqrt() - 1.0),
            fock: match self {
                EngineState::Fock(f) => Some(f.clone()),
                EngineState::Gaussian(_) => None,
            },
        }
    }

    fn rotate(&self, theta: f64) -> Self {
        match self {
            EngineState::Gaussian(g) => EngineState::Gaussian(gaussian::rotate_gaussian(g, theta)),
            EngineState::Fock(f) => EngineState::Fock(f.rotate(theta)),
        }
    }

    /// Outcome from a uniform variate through this representation's CDF.
    fn outcome_from_uniform(&self, spec: &MeasurementSpec, u: f64) -> Result<f64> {
        match self {
            EngineState::Gaussian(g) => {
                let (mean, var) =
                    gaussian::pulse_outcome_stats_with_noise(g, spec.chi, spec.record_variance());
                Ok(mean + var.sqrt() * numeric::normal_inv_cdf(u))
            }
            EngineState::Fock(f) => Ok(OutcomeSampler::build(f, spec)?.quantile(u)),
        }
    }

    fn condition(&self, spec: &MeasurementSpec, p_l: f64) -> Result<Self> {
        match self {
            EngineState::Gaussian(g) => Ok(EngineState::Gaussian(
                gaussian::conditional_update_with_noise(
                    g,
                    spec.chi,
                    spec.omega_kick,
                    p_l,
                    spec.conditioning_variance(),
                ),
            )),
            EngineState::Fock(f) => Ok(EngineState::Fock(measurement::apply_upsilon(f, spec, p_l)?)),
        }
    }
}

fn build_initial(cfg: &SequenceConfig) -> Result<EngineState> {
    match cfg.representation {
        Representation::Gaussian => {
            let g = match cfg.initial {
                StateDescriptor::Thermal { nbar } => gaussian::thermal_gaussian(nbar)?,
                StateDescriptor::Coherent { re, im } => GaussianState::new(
                    [std::f64::consts::SQRT_2 * re, std::f64::consts::SQRT_2 * im],
                    0.5,
                    0.0,
                    0.5,
                )?,
                StateDescriptor::Cat { .. } => unreachable!("rejected by validate"),
            };
            Ok(EngineState::Gaussian(g))
        }
        Representation::Fock => {
            let state = match cfg.initial {
                StateDescriptor::Thermal { nbar } => {
                    let n_max = cfg.n_max.unwrap_or_else(|| hilbert::default_n_max(nbar, 0.0));
                    FockState::thermal(nbar, n_max)?
                }
                StateDescriptor::Coherent { re, im } => {
                    let alpha = num_complex::Complex64::new(re, im);
                    let n_max = cfg
                        .n_max
                        .unwrap_or_else(|| hilbert::default_n_max(0.0, alpha.norm()));
                    FockState::coherent(alpha, n_max)?
                }
                StateDescriptor::Cat { delta, axis } => {
                    let n_max = cfg.n_max.unwrap_or_else(|| hilbert::default_n_max(0.0, delta));
                    FockState::cat(delta, axis, n_max)?
                }
            };
            Ok(EngineState::Fock(state))
        }
    }
}

/// Executes the sequence: pulses sample (or take forced) outcomes and
/// condition the state; evolution and bath steps transform it. The result
/// is deterministic under `master_seed`.
pub fn run_sequence(cfg: &SequenceConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = build_initial(cfg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.master_seed);
    let mut snapshots = vec![state.snapshot()];
    let mut records = Vec::new();
    let mut angle_so_far = 0.0f64;

    for step in &cfg.steps {
        match step {
            Step::Pulse {
                spec,
                forced_outcome,
            } => {
                // The uniform draw happens even for forced outcomes so a
                // forced run consumes the same stream as a sampled one.
                let u = numeric::uniform_open01(&mut rng);
                let p_l = match forced_outcome {
                    Some(v) => *v,
                    None => state.outcome_from_uniform(spec, u)?,
                };
                let known_mean = spec.chi * state.moments().0;
                state = state.condition(spec, p_l)?;
                records.push(MeasurementRecord {
                    p_l,
                    theta: angle_so_far,
                    spec: *spec,
                    known_mean: Some(known_mean),
                });
            }
            Step::Evolve { theta } => {
                state = state.rotate(*theta);
                angle_so_far += theta;
            }
            Step::EvolveDuration { seconds } => {
                let omega_m = cfg.omega_m.expect("validated");
                let theta = omega_m * seconds;
                state = state.rotate(theta);
                angle_so_far += theta;
            }
            Step::Thermalize { seconds, bath } => match &state {
                EngineState::Gaussian(g) => {
                    state = EngineState::Gaussian(gaussian::thermalize(g, bath, *seconds)?);
                    angle_so_far += bath.omega_m * seconds;
                }
                EngineState::Fock(_) => {
                    return Err(Error::Config(
                        "thermalize steps run on the gaussian representation only".into(),
                    ));
                }
            },
        }
        snapshots.push(state.snapshot());
    }

    Ok(Trajectory { snapshots, records })
}

/// Two pulses separated by a quarter period (with optional rethermalization
/// during the gap); returns the final state and its effective occupation,
/// which is independent of the sampled outcomes for Gaussian states.
pub fn purify_two_pulse(
    nbar: f64,
    chi: f64,
    bath: Option<&BathSpec>,
) -> Result<(GaussianState, f64)> {
    if chi <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "chi",
            requirement: "> 0",
            value: chi,
        });
    }
    let run = |p1: f64, p2: f64| -> Result<GaussianState> {
        let g = gaussian::thermal_gaussian(nbar)?;
        let g = gaussian::conditional_update(&g, chi, 0.0, p1);
        let g = match bath {
            Some(b) => {
                let quarter = 0.5 * std::f64::consts::PI / b.omega_m;
                gaussian::thermalize(&g, b, quarter)?
            }
            None => gaussian::rotate_gaussian(&g, std::f64::consts::FRAC_PI_2),
        };
        Ok(gaussian::conditional_update(&g, chi, 0.0, p2))
    };
    // The covariance update is outcome-independent; asserted over a spread
    // of outcomes before reporting.
    let reference = run(0.0, 0.0)?;
    let n_eff = gaussian::effective_occupation(&reference);
    for (p1, p2) in [(3.0 * chi, -2.0 * chi), (-chi, chi), (0.5, -4.0)] {
        let other = run(p1, p2)?;
        let other_neff = gaussian::effective_occupation(&other);
        if (other_neff - n_eff).abs() > 1e-12 {
            return Err(Error::Numerical(format!(
                "purified occupation depends on outcomes: {n_eff} vs {other_neff}"
            )));
        }
    }
    Ok((reference, n_eff))
}

/// Prepares a Gaussian state per `prep`, then measures the compensated
/// read-out variance `Var(P_L - chi <X>)` at each angle of `theta_grid`.
pub fn readout_session(
    prep: &SequenceConfig,
    read_spec: &MeasurementSpec,
    theta_grid: &[f64],
    shots: usize,
) -> Result<Vec<(f64, f64)>> {
    prep.validate()?;
    if prep.representation != Representation::Gaussian {
        return Err(Error::Config(
            "read-out sessions track known means on the gaussian representation".into(),
        ));
    }
    let mut curve = Vec::with_capacity(theta_grid.len());
    let mut rng = ChaCha12Rng::seed_from_u64(prep.master_seed);
    for (idx, &theta) in theta_grid.iter().enumerate() {
        rng.set_stream(idx as u64 + 1);
        let mut compensated = Vec::with_capacity(shots);
        for _ in 0..shots {
            let state = run_prep_gaussian(prep, &mut rng)?;
            let rotated = gaussian::rotate_gaussian(&state, theta);
            let outcome = gaussian::sample_outcome_with_rng(
                &rotated,
                read_spec.chi,
                read_spec.record_variance(),
                &mut rng,
            );
            let record = MeasurementRecord {
                p_l: outcome,
                theta,
                spec: *read_spec,
                known_mean: Some(read_spec.chi * rotated.mean_x()),
            };
            compensated.push(measurement::compensate(&record)?);
        }
        let (_, var) = numeric::mean_variance(&compensated);
        curve.push((theta, var));
    }
    Ok(curve)
}

fn run_prep_gaussian(prep: &SequenceConfig, rng: &mut ChaCha12Rng) -> Result<GaussianState> {
    let mut state = match build_initial(prep)? {
        EngineState::Gaussian(g) => g,
        EngineState::Fock(_) => unreachable!("representation checked by caller"),
    };
    for step in &prep.steps {
        match step {
            Step::Pulse { spec, forced_outcome } => {
                let p_l = match forced_outcome {
                    Some(v) => *v,
                    None => gaussian::sample_outcome_with_rng(
                        &state,
                        spec.chi,
                        spec.record_variance(),
                        rng,
                    ),
                };
                state = gaussian::conditional_update_with_noise(
                    &state,
                    spec.chi,
                    spec.omega_kick,
                    p_l,
                    spec.conditioning_variance(),
                );
            }
            Step::Evolve { theta } => state = gaussian::rotate_gaussian(&state, *theta),
            Step::EvolveDuration { seconds } => {
                let omega_m = prep.omega_m.expect("validated");
                state = gaussian::rotate_gaussian(&state, omega_m * seconds);
            }
            Step::Thermalize { seconds, bath } => {
                state = gaussian::thermalize(&state, bath, *seconds)?;
            }
        }
    }
    Ok(state)
}

/// Recovers the momentum kick from the displacement observed one quarter
/// period after a pulse: the mean compensated read-out, divided by `-chi`.
///
/// `rotation_angle` is `pi/2` for the standard procedure; reversing it
/// flips the sign of the estimate.
pub fn calibrate_omega(
    spec: &MeasurementSpec,
    nbar: f64,
    rotation_angle: f64,
    pairs: usize,
    rng_seed: u64,
) -> Result<f64> {
    if spec.chi <= 0.0 {
        return Err(Error::NoPositionInformation);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let read_spec = MeasurementSpec::coherent_drive(spec.chi)?;
    let mut sum = 0.0;
    for _ in 0..pairs {
        let g = gaussian::thermal_gaussian(nbar)?;
        let p1 = gaussian::sample_outcome_with_rng(&g, spec.chi, spec.record_variance(), &mut rng);
        let conditioned = gaussian::conditional_update_with_noise(
            &g,
            spec.chi,
            spec.omega_kick,
            p1,
            spec.conditioning_variance(),
        );
        // Shadow state with the kick excluded carries the known mean.
        let shadow = gaussian::conditional_update_with_noise(
            &g,
            spec.chi,
            0.0,
            p1,
            spec.conditioning_variance(),
        );
        let rotated = gaussian::rotate_gaussian(&conditioned, rotation_angle);
        let shadow_rotated = gaussian::rotate_gaussian(&shadow, rotation_angle);
        let outcome = gaussian::sample_outcome_with_rng(
            &rotated,
            read_spec.chi,
            read_spec.record_variance(),
            &mut rng,
        );
        sum += outcome - read_spec.chi * shadow_rotated.mean_x();
    }
    Ok(-(sum / pairs as f64) / read_spec.chi)
}
