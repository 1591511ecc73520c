//! Closed-form reference values for the vehicle-speed aggregation scenario
//! (200 participants, unit noise intensities, rho = 100 m, epsilon = ln 3,
//! delta = 0.05), cross-checked against Monte Carlo simulation.

use dpfilter_core::kalman::{
    build_traffic_scenario, design_input_noise_dp, design_output_noise_dp, monte_carlo_rmse,
    mps_to_kmh, FilterForm,
};
use dpfilter_core::privacy::{kappa, PrivacyBudget};

fn scenario(n: usize) -> Vec<dpfilter_core::ParticipantModel64> {
    build_traffic_scenario(n, 1.0, 1.0, 1.0, 100.0, 45.0).unwrap()
}

fn budget() -> dpfilter_core::PrivacyBudget64 {
    PrivacyBudget::new(3.0f64.ln(), 0.05).unwrap()
}

#[test]
fn uncompensated_input_noise_predicted_rmse() {
    let d = design_input_noise_dp(scenario(200), &budget(), false, FilterForm::Filtering)
        .unwrap();
    let rmse_kmh = mps_to_kmh(d.predicted_mse.sqrt());
    // running the nominal filter against measurements carrying the privacy
    // noise of sigma = kappa * 100 m inflates the velocity error to tens of
    // km/h; the scenario's closed-form value is just below 26
    assert!(
        (rmse_kmh - 25.9).abs() < 0.5,
        "uncompensated rmse {rmse_kmh} km/h"
    );
}

#[test]
fn compensated_input_noise_predicted_and_empirical_rmse() {
    let d =
        design_input_noise_dp(scenario(200), &budget(), true, FilterForm::Filtering).unwrap();
    let sigma = kappa(&budget()).unwrap() * 100.0;
    assert!((d.input_sigmas[0] - sigma).abs() < 1e-9);
    let rmse_kmh = mps_to_kmh(d.predicted_mse.sqrt());
    assert!(
        (rmse_kmh - 1.087).abs() < 0.01,
        "compensated rmse {rmse_kmh} km/h"
    );
    let mc = monte_carlo_rmse(&d, 700, 200, 7, None, 200).unwrap();
    let mc_kmh = mps_to_kmh(mc.rmse);
    assert!(
        (mc_kmh - rmse_kmh).abs() / rmse_kmh < 0.05,
        "monte carlo {mc_kmh} vs predicted {rmse_kmh}"
    );
}

#[test]
fn output_noise_predicted_and_empirical_rmse() {
    let d = design_output_noise_dp(scenario(200), &budget(), FilterForm::Filtering).unwrap();
    // gamma_i = (1/n) * 2/sqrt(7) for the filtering form
    let gamma_expect = 2.0 / 7.0f64.sqrt() / 200.0;
    assert!(
        (d.gammas[0] - gamma_expect).abs() < 1e-7,
        "gamma {} vs {gamma_expect}",
        d.gammas[0]
    );
    let sigma_expect = kappa(&budget()).unwrap() * gamma_expect * 100.0;
    assert!((d.output_sigma - sigma_expect).abs() < 1e-6);
    let rmse_kmh = mps_to_kmh(d.predicted_mse.sqrt());
    assert!(
        (rmse_kmh - 2.40).abs() < 0.03,
        "output-perturbation rmse {rmse_kmh} km/h"
    );
    let mc = monte_carlo_rmse(&d, 700, 200, 11, None, 200).unwrap();
    let mc_kmh = mps_to_kmh(mc.rmse);
    assert!(
        (mc_kmh - rmse_kmh).abs() / rmse_kmh < 0.08,
        "monte carlo {mc_kmh} vs predicted {rmse_kmh}"
    );
}

#[test]
fn wrong_filter_init_converges_slower_for_compensated_design() {
    let n = 50;
    let d = design_input_noise_dp(scenario(n), &budget(), true, FilterForm::Filtering).unwrap();
    let good = monte_carlo_rmse(&d, 400, 50, 5, None, 200).unwrap();
    let wrong_init = nalgebra::DVector::from_vec(vec![0.0, 75.0 / 3.6]);
    let bad = monte_carlo_rmse(&d, 400, 50, 5, Some(&wrong_init), 200).unwrap();
    // early error is much larger from the wrong initial velocity
    assert!(bad.error_trace[0] > 5.0 * good.error_trace[0].max(1e-9));
    let (cg, cb) = (good.convergence_step, bad.convergence_step);
    match (cg, cb) {
        (Some(g), Some(b)) => assert!(b >= g),
        _ => {}
    }
}
