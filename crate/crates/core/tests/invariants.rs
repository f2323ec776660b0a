//! Property tests for the algebraic invariants of the state
//! representations and the measurement update.

use num_complex::Complex64;
use pomsim::gaussian::{self, BathSpec, GaussianState};
use pomsim::grid::Grid;
use pomsim::hilbert::{self, FockState};
use pomsim::measurement::MeasurementSpec;
use pomsim::tomography::{self, Kernel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fock_rotation_is_additive(
        re in -1.2f64..1.2,
        im in -1.2f64..1.2,
        theta1 in 0.0f64..std::f64::consts::TAU,
        theta2 in 0.0f64..std::f64::consts::TAU,
    ) {
        let state = FockState::coherent(Complex64::new(re, im), 32).unwrap();
        let stepwise = state.rotate(theta1).rotate(theta2);
        let direct = state.rotate(theta1 + theta2);
        for i in 0..state.dim() {
            for j in 0..state.dim() {
                prop_assert!(
                    (stepwise.matrix()[(i, j)] - direct.matrix()[(i, j)]).norm() < 1e-10
                );
            }
        }
    }

    #[test]
    fn conditional_update_preserves_heisenberg(
        nbar in 0.0f64..50.0,
        chi in 0.05f64..3.0,
        omega in -5.0f64..5.0,
        p_l in -10.0f64..10.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        // Rotate first so the update sees correlated covariances too.
        let g = gaussian::rotate_gaussian(
            &gaussian::conditional_update(&gaussian::thermal_gaussian(nbar).unwrap(), 1.3, 0.0, 1.0),
            theta,
        );
        let post = gaussian::conditional_update(&g, chi, omega, p_l);
        prop_assert!(post.det_cov() >= 0.25 - 1e-9, "det {}", post.det_cov());
        prop_assert!(post.var_x() <= g.var_x() + 1e-12);
    }

    #[test]
    fn thermalize_is_contractive_toward_bath(
        var_x in 0.05f64..4.0,
        nbar_bath in 0.0f64..100.0,
        t_frac in 0.0f64..5.0,
    ) {
        let omega_m = 1e6;
        let bath = BathSpec::from_quality(1e4, nbar_bath, omega_m).unwrap();
        let g = GaussianState::new([0.4, -0.2], var_x, 0.0, 0.3 / var_x + 1.0).unwrap();
        let t = t_frac / bath.gamma_m;
        let out = gaussian::thermalize(&g, &bath, t).unwrap();
        prop_assert!(out.det_cov() >= 0.25 - 1e-9);
        // Co-rotating covariance approaches the bath value monotonically.
        let co = gaussian::rotate_gaussian(&out, -omega_m * t);
        let target = nbar_bath + 0.5;
        prop_assert!(
            (co.var_x() - target).abs() <= (g.var_x() - target).abs() + 1e-9
        );
    }

    #[test]
    fn marginals_stay_normalized_under_rotation(
        re in -1.0f64..1.0,
        im in -1.0f64..1.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let state = FockState::coherent(Complex64::new(re, im), 32).unwrap();
        let grid = Grid::symmetric(9.0, 301).unwrap();
        let marg = hilbert::marginal(&state, theta, &grid).unwrap();
        let integral = grid.trapezoid(&marg.values);
        prop_assert!((integral - 1.0).abs() < 1e-6);
        prop_assert!(marg.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn deconvolve_round_trips_gaussian_densities(
        mean in -1.5f64..1.5,
        var in 0.3f64..3.0,
        chi in 1.0f64..2.5,
    ) {
        let spec = MeasurementSpec::coherent_drive(chi).unwrap();
        let grid = Grid::symmetric(12.0, 401).unwrap();
        // Analytic Gaussian marginal and its exact blur.
        let truth: Vec<f64> = grid
            .iter()
            .map(|x| (-(x - mean).powi(2) / (2.0 * var)).exp()
                / (2.0 * std::f64::consts::PI * var).sqrt())
            .collect();
        let blurred_var = var + spec.record_variance() / (chi * chi);
        let blurred: Vec<f64> = grid
            .iter()
            .map(|x| (-(x - mean).powi(2) / (2.0 * blurred_var)).exp()
                / (2.0 * std::f64::consts::PI * blurred_var).sqrt())
            .collect();
        let observed = hilbert::Marginal::from_density_estimate(0.0, grid, blurred).unwrap();
        let kernel = Kernel::exact(&spec, 8.0, 401).unwrap();
        let recovered = tomography::deconvolve(&observed, &kernel, 1e-6).unwrap();
        let diff_sq: Vec<f64> = recovered
            .values
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let l2 = grid.trapezoid(&diff_sq).sqrt();
        prop_assert!(l2 < 1e-3, "L2 {l2}");
    }

    #[test]
    fn gaussian_and_fock_agree_on_rotated_thermal_updates(
        nbar in 0.5f64..8.0,
        chi in 0.5f64..2.0,
        p_frac in -2.0f64..2.0,
    ) {
        let p_l = p_frac * chi;
        let spec = MeasurementSpec::coherent_drive(chi).unwrap();
        // Headroom for the conditional displacement (mean up to ~p_l/chi).
        let fock = FockState::thermal(nbar, hilbert::default_n_max(nbar, 3.0)).unwrap();
        let fock_post = pomsim::measurement::apply_upsilon(&fock, &spec, p_l).unwrap().moments();
        let gauss_post = gaussian::conditional_update(
            &gaussian::thermal_gaussian(nbar).unwrap(),
            chi,
            0.0,
            p_l,
        );
        prop_assert!((fock_post.mean_x - gauss_post.mean_x()).abs() < 1e-3);
        prop_assert!((fock_post.var_x - gauss_post.var_x()).abs() < 1e-3);
        prop_assert!((fock_post.var_p - gauss_post.var_p()).abs() < 1e-3);
    }
}
