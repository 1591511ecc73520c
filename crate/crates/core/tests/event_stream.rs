//! End-to-end checks of the event-stream release mechanisms against
//! closed-form values, frequency-domain oracles, and Monte Carlo simulation.

use dpfilter_core::events::{
    burst_statistics, design_input_noise, design_mmse, design_zfe, detect,
    generate_burst_input, monte_carlo_event_mse, run_event_pipeline, EventSignal,
    InputStatistics, PostFilter,
};
use dpfilter_core::lti::{bilinear_map, RationalTf};
use dpfilter_core::mechanisms::NoiseKind;
use dpfilter_core::privacy::{kappa, BudgetLedger, PrivacyBudget};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn budget() -> PrivacyBudget<f64> {
    PrivacyBudget::new(3.0f64.ln(), 0.05).unwrap()
}

/// The low-pass reference filter `1/(s + 0.05)` discretized with
/// `s(z) = 2 (1 - z^-1)/(1 + z^-1)`.
fn reference_filter() -> RationalTf<f64> {
    bilinear_map(&[1.0], &[0.05, 1.0]).unwrap()
}

/// Reference burst-input parameters used throughout: on/off Markov switching
/// with mean activity 0.4 and mean burst length about 8 steps.
const P_ON: f64 = 0.08;
const P_OFF: f64 = 0.12;

/// FIR order of the reference estimator post-filter.
const MMSE_ORDER: usize = 60;

fn random_stable_filter(rng: &mut ChaCha8Rng) -> RationalTf<f64> {
    // a real pole pair and a real zero, radii bounded away from the circle
    let p1: f64 = rng.random_range(-0.8..0.8);
    let p2: f64 = rng.random_range(-0.8..0.8);
    let z1: f64 = rng.random_range(-0.7..0.7);
    let gain: f64 = rng.random_range(0.5..2.0);
    RationalTf::new(
        vec![gain, -gain * z1],
        vec![1.0, -(p1 + p2), p1 * p2],
    )
    .unwrap()
}

#[test]
fn identity_filter_input_noise_mse_is_kappa_squared() {
    let g = RationalTf::<f64>::identity();
    let d = design_input_noise(&g, &budget(), NoiseKind::Gaussian, false).unwrap();
    let k = kappa(&budget()).unwrap();
    assert!((d.predicted_mse() - k * k).abs() < 1e-12);
}

#[test]
fn reference_filter_input_noise_mse_is_about_thirty() {
    let d =
        design_input_noise(&reference_filter(), &budget(), NoiseKind::Gaussian, false).unwrap();
    // kappa^2 ||G||_2^2 with ||G||_2^2 = 9.756...
    assert!(
        (d.predicted_mse() - 30.1).abs() < 0.02 * 30.1,
        "input-noise mse {}",
        d.predicted_mse()
    );
}

#[test]
fn input_noise_rejects_unstable_filters() {
    let g = RationalTf::new(vec![1.0], vec![1.0, -1.5]).unwrap();
    assert!(design_input_noise(&g, &budget(), NoiseKind::Gaussian, false).is_err());
    assert!(design_zfe(&g, &budget(), 8).is_err());
}

#[test]
fn laplace_noise_is_better_at_the_input_than_at_the_output() {
    // input placement gives MSE 2 ||g||_2^2 / eps^2; output placement would
    // need the larger scale ||g||_1 / eps, so 2 ||g||_2^2 <= 2 ||g||_1^2
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let g = random_stable_filter(&mut rng);
        let eps = budget().epsilon();
        let d = design_input_noise(&g, &budget(), NoiseKind::Laplace, false).unwrap();
        let h2 = g.h2_norm().unwrap();
        assert!((d.predicted_mse() - 2.0 * h2 * h2 / (eps * eps)).abs() < 1e-9);
        let l1: f64 = g
            .to_state_space()
            .unwrap()
            .impulse_response_auto(1e-12)
            .unwrap()
            .scalar_taps()
            .iter()
            .map(|t| t.abs())
            .sum();
        let output_mse = 2.0 * l1 * l1 / (eps * eps);
        assert!(d.predicted_mse() <= output_mse + 1e-12);
    }
}

#[test]
fn constant_gain_zfe_attains_the_lower_bound() {
    let c = 3.0f64;
    let g = RationalTf::fir(vec![c]).unwrap();
    let d = design_zfe(&g, &budget(), 4).unwrap();
    let k = kappa(&budget()).unwrap();
    assert!(
        (d.predicted_mse() - k * k * c * c).abs() < 1e-6,
        "flat-spectrum mse {}",
        d.predicted_mse()
    );
    assert!((d.predicted_mse() - d.lower_bound()).abs() < 1e-6);
}

#[test]
fn zfe_reaches_the_optimum_within_five_percent_on_random_filters() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let k2 = kappa(&budget()).unwrap().powi(2);
    for case in 0..20 {
        let g = random_stable_filter(&mut rng);
        let d = design_zfe(&g, &budget(), 12).unwrap();
        assert!(
            d.predicted_mse() >= d.lower_bound() * (1.0 - 1e-6),
            "case {case}: mse below the optimum"
        );
        assert!(
            d.predicted_mse() <= 1.05 * d.lower_bound(),
            "case {case}: mse {} vs bound {}",
            d.predicted_mse(),
            d.lower_bound()
        );
        // Jensen: the optimum never exceeds the input-noise MSE
        let h2 = g.h2_norm().unwrap();
        assert!(d.lower_bound() <= k2 * h2 * h2 * (1.0 + 1e-9), "case {case}");
    }
}

#[test]
fn perturbing_the_factor_magnitude_away_from_the_optimum_costs_error() {
    // grid evaluation of ||G1||_2^2 ||G G1^-1||_2^2 for |G1|^2 = |G| times a
    // positive perturbation: every non-constant perturbation increases the
    // product, the optimum is a strict minimum
    let g = reference_filter();
    let n = 4096;
    let mag: Vec<f64> = (0..n)
        .map(|k| {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            g.frequency_response(omega).norm().max(1e-6)
        })
        .collect();
    let product = |g1sq: &[f64]| -> f64 {
        let a: f64 = g1sq.iter().sum::<f64>() / n as f64;
        let b: f64 = mag
            .iter()
            .zip(g1sq)
            .map(|(&m, &p)| m * m / p)
            .sum::<f64>()
            / n as f64;
        a * b
    };
    let optimum = product(&mag);
    for (i, scale) in [0.3f64, 0.8, 2.0].iter().enumerate() {
        let perturbed: Vec<f64> = mag
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                m * (1.0 + scale * omega.cos()).max(0.05)
            })
            .collect();
        assert!(
            product(&perturbed) > optimum * (1.0 + 1e-6),
            "perturbation {i} did not increase the product"
        );
    }
    // a constant scaling leaves the product unchanged
    let scaled: Vec<f64> = mag.iter().map(|&m| 7.0 * m).collect();
    assert!((product(&scaled) - optimum).abs() < 1e-9 * optimum);
}

#[test]
fn noiseless_exact_inverse_chain_reproduces_the_reference() {
    let d = design_zfe(&reference_filter(), &budget(), 24)
        .unwrap()
        .noiseless();
    let input = generate_burst_input(400, P_ON, P_OFF, 3).unwrap();
    let mut ledger = BudgetLedger::new();
    let run = run_event_pipeline(&d, &input, 5, &mut ledger).unwrap();
    let scale = run
        .reference
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1.0);
    for (r, y) in run.released.iter().zip(&run.reference) {
        assert!(
            (r - y).abs() <= 1e-8 * scale,
            "released {r} vs reference {y}"
        );
    }
    assert!(run.empirical_mse <= 1e-16 * scale * scale);
}

#[test]
fn noiseless_binary_detection_recovers_the_input_exactly() {
    let input = generate_burst_input(200, P_ON, P_OFF, 17).unwrap();
    let scalars = input.to_scalars::<f64>();
    assert_eq!(detect(&scalars, 0.5), input);
}

#[test]
fn mmse_white_input_identity_filters_give_the_scalar_wiener_gain() {
    // white input through identity pre/target: the Yule-Walker solution is
    // the scalar Wiener gain at lag 0
    let g = RationalTf::<f64>::identity();
    let var_u = 2.5f64;
    let mut auto = vec![0.0; 12];
    auto[0] = var_u;
    let stats = InputStatistics::new(0.0, auto).unwrap();
    let d = design_mmse(&g, &g, &stats, &budget(), 8).unwrap();
    let k = kappa(&budget()).unwrap();
    let sigma2 = k * k;
    let wiener = var_u / (var_u + sigma2);
    match d.post() {
        PostFilter::Fir(h) => {
            assert!((h[0] - wiener).abs() < 1e-10, "h0 {} vs {wiener}", h[0]);
            assert!(h[1..].iter().all(|&t| t.abs() < 1e-10));
        }
        PostFilter::Chain(_) => panic!("mmse design must be FIR"),
    }
    let expected_mse = var_u * sigma2 / (var_u + sigma2);
    assert!((d.predicted_mse() - expected_mse).abs() < 1e-10);
}

#[test]
fn mmse_passthrough_emerges_as_the_noise_vanishes() {
    // with a huge epsilon the privacy noise is negligible and, on a white
    // input, the estimator reproduces the target's impulse response
    let g = reference_filter();
    let mut auto = vec![0.0f64; MMSE_ORDER + 2];
    auto[0] = 1.0;
    let stats = InputStatistics::new(0.0, auto).unwrap();
    let loose = PrivacyBudget::new(1e8, 0.05).unwrap();
    let g1 = RationalTf::<f64>::identity();
    let d = design_mmse(&g, &g1, &stats, &loose, MMSE_ORDER).unwrap();
    let gtaps = g.impulse_taps(10);
    match d.post() {
        PostFilter::Fir(h) => {
            for (k, &gt) in gtaps.iter().enumerate() {
                assert!((h[k] - gt).abs() < 1e-3, "tap {k}: {} vs {gt}", h[k]);
            }
        }
        PostFilter::Chain(_) => panic!("mmse design must be FIR"),
    }
    // only the impulse-response tail beyond the FIR horizon remains
    assert!(d.predicted_mse() < 0.01 * g.h2_norm().unwrap().powi(2));
}

#[test]
fn mmse_prediction_beats_zfe_on_the_burst_input() {
    let g = reference_filter();
    let zfe = design_zfe(&g, &budget(), 12).unwrap();
    let stats = burst_statistics::<f64>(P_ON, P_OFF, 400).unwrap();
    let mmse = design_mmse(&g, zfe.pre(), &stats, &budget(), MMSE_ORDER).unwrap();
    assert!(
        mmse.predicted_mse() < zfe.predicted_mse(),
        "mmse {} vs zfe {}",
        mmse.predicted_mse(),
        zfe.predicted_mse()
    );
    // the estimator exploits input knowledge, so it may beat the
    // input-agnostic ZFE optimum
    assert!(mmse.predicted_mse() > 0.0);
}

#[test]
fn empirical_event_mses_reproduce_the_reference_ordering() {
    let g = reference_filter();
    let b = budget();
    let input_noise = design_input_noise(&g, &b, NoiseKind::Gaussian, false).unwrap();
    let with_detector = design_input_noise(&g, &b, NoiseKind::Gaussian, true).unwrap();
    let zfe = design_zfe(&g, &b, 12).unwrap();
    let stats = burst_statistics::<f64>(P_ON, P_OFF, 400).unwrap();
    let mmse = design_mmse(&g, zfe.pre(), &stats, &b, MMSE_ORDER).unwrap();

    let horizon = 2000;
    let trials = 200;
    let input = generate_burst_input(horizon, P_ON, P_OFF, 71).unwrap();
    let mc = |d| monte_carlo_event_mse(d, &input, trials, 913).unwrap();
    let m_input = mc(&input_noise);
    let m_det = mc(&with_detector);
    let m_zfe = mc(&zfe);
    let m_mmse = mc(&mmse);

    // analytic 30.1 for the plain input-noise scheme, within sampling error
    assert!(
        (m_input.mean - input_noise.predicted_mse()).abs()
            <= 3.0 * m_input.standard_error + 0.05 * input_noise.predicted_mse(),
        "input-noise empirical {} vs predicted {}",
        m_input.mean,
        input_noise.predicted_mse()
    );
    // ZFE empirical matches its input-independent prediction
    assert!(
        (m_zfe.mean - zfe.predicted_mse()).abs()
            <= 3.0 * m_zfe.standard_error + 0.1 * zfe.predicted_mse(),
        "zfe empirical {} vs predicted {}",
        m_zfe.mean,
        zfe.predicted_mse()
    );
    // the reference ordering and magnitude windows
    assert!(
        m_mmse.mean < m_zfe.mean && m_zfe.mean < m_input.mean,
        "ordering violated: mmse {} zfe {} input {}",
        m_mmse.mean,
        m_zfe.mean,
        m_input.mean
    );
    assert!(
        (4.0..=9.0).contains(&m_zfe.mean),
        "zfe mean {} outside [4, 9]",
        m_zfe.mean
    );
    assert!(
        (3.0..=7.0).contains(&m_mmse.mean),
        "mmse mean {} outside [3, 7]",
        m_mmse.mean
    );
    // the detector exploits binariness: well below the linear scheme
    assert!(
        m_det.mean < 0.6 * m_input.mean,
        "detector mean {} vs input-noise {}",
        m_det.mean,
        m_input.mean
    );
}

#[test]
fn unit_event_sensitivity_equals_the_h2_norm() {
    // moving one unit event changes the output by exactly the l2 norm of the
    // impulse response, for any integer base signal
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for case in 0..50 {
        let g = random_stable_filter(&mut rng);
        let horizon = 600usize;
        let mut base: Vec<i64> = (0..horizon).map(|_| rng.random_range(0..3)).collect();
        let u = EventSignal::integers(base.clone());
        let at = rng.random_range(0..horizon / 2);
        base[at] += 1;
        let u2 = EventSignal::integers(base);
        let y1 = g.simulate(&u.to_scalars::<f64>());
        let y2 = g.simulate(&u2.to_scalars::<f64>());
        let dist: f64 = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let h2 = g.h2_norm().unwrap();
        assert!(
            (dist - h2).abs() <= 1e-6 * h2.max(1.0),
            "case {case}: sensitivity {dist} vs h2 {h2}"
        );
    }
}

#[test]
fn ledger_total_is_unchanged_by_postprocessing() {
    let g = reference_filter();
    let input = generate_burst_input(300, P_ON, P_OFF, 2).unwrap();
    let plain = design_input_noise(&g, &budget(), NoiseKind::Gaussian, false).unwrap();
    let detected = design_input_noise(&g, &budget(), NoiseKind::Gaussian, true).unwrap();
    let mut l1 = BudgetLedger::new();
    let mut l2 = BudgetLedger::new();
    run_event_pipeline(&plain, &input, 4, &mut l1).unwrap();
    run_event_pipeline(&detected, &input, 4, &mut l2).unwrap();
    assert_eq!(l1.total(), l2.total());
    // the detector shows up as an extra zero-cost entry
    assert_eq!(l2.entries().len(), l1.entries().len() + 1);
}
