//! Vehicle-speed aggregation scenario: the three Kalman-based release
//! schemes, their steady-state RMSE in km/h, and a convergence trace from a
//! deliberately wrong filter initialization.

use std::path::Path;

use anyhow::Result;
use dpfilter_core::kalman::{
    build_traffic_scenario, design_input_noise_dp, design_output_noise_dp,
    monte_carlo_rmse, mps_to_kmh, DpKalmanDesign, FilterForm, ParticipantModel,
};
use dpfilter_core::lmi::simulate_released_rmse;
use dpfilter_core::numerics::derive_seed;
use dpfilter_core::privacy::kappa;
use nalgebra::DVector;

use crate::bundle::{chunked_mean, write_trace, ResultBundle, SummaryRecord, TraceValue};
use crate::config::TrafficConfig;

/// Sampling period and process/measurement noise intensities of the
/// double-integrator vehicles (SI units).
const TS: f64 = 1.0;
const SIGMA_PROCESS: f64 = 1.0;
const SIGMA_MEASURE: f64 = 1.0;

pub fn models(cfg: &TrafficConfig) -> Result<Vec<ParticipantModel<f64>>> {
    build_traffic_scenario(
        cfg.participants,
        TS,
        SIGMA_PROCESS,
        SIGMA_MEASURE,
        cfg.rho,
        cfg.v0_kmh,
    )
    .map_err(|e| anyhow::anyhow!("traffic scenario: {e}"))
}

/// Chunked Monte Carlo RMSE in km/h with a standard error over chunks.
fn empirical_kmh(
    design: &DpKalmanDesign<f64>,
    cfg: &TrafficConfig,
    kf_init: Option<&DVector<f64>>,
) -> Result<(f64, f64, usize)> {
    let chunks = 10usize.min(cfg.common.trials);
    let per_chunk = (cfg.common.trials / chunks).max(1);
    let mut means = Vec::with_capacity(chunks);
    for c in 0..chunks {
        let mc = monte_carlo_rmse(
            design,
            cfg.common.horizon,
            per_chunk,
            derive_seed(cfg.common.seed, c as u64),
            kf_init,
            cfg.discard,
        )?;
        means.push(mps_to_kmh(mc.rmse));
    }
    Ok(chunked_mean(&means, per_chunk))
}

pub fn run(cfg: &TrafficConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let budget = cfg.common.budget.to_core()?;
    let designs = [
        (
            "input_uncompensated",
            design_input_noise_dp(models(cfg)?, &budget, false, FilterForm::Filtering)?,
        ),
        (
            "input_compensated",
            design_input_noise_dp(models(cfg)?, &budget, true, FilterForm::Filtering)?,
        ),
        (
            "output",
            design_output_noise_dp(models(cfg)?, &budget, FilterForm::Filtering)?,
        ),
    ];

    let mut bundle = ResultBundle::new("traffic", cfg.clone())?;
    for (name, design) in &designs {
        let (mean, se, trials) = empirical_kmh(design, cfg, None)?;
        bundle.records.push(SummaryRecord::estimated(
            &format!("{name}_rmse"),
            "km/h",
            Some(mps_to_kmh(design.predicted_mse.sqrt())),
            mean,
            se,
            trials,
        ));
    }

    // fourth scheme: the synthesized estimator with output noise calibrated
    // to its verified deviation gain
    let all_models = models(cfg)?;
    let kap = kappa(&budget).map_err(|e| anyhow::anyhow!("kappa: {e}"))?;
    let chosen =
        crate::scenarios::synth::best_design(&all_models[0], kap, cfg.participants, cfg.rho)?;
    let filters = vec![chosen.filter.clone(); cfg.participants];
    let synth_trials = cfg.common.trials.min(60);
    let chunks = 6usize.min(synth_trials);
    let per_chunk = (synth_trials / chunks).max(1);
    let mut means = Vec::with_capacity(chunks);
    for c in 0..chunks {
        let rmse = simulate_released_rmse(
            &all_models,
            &filters,
            chosen.tight_sigma,
            cfg.common.horizon,
            per_chunk,
            derive_seed(cfg.common.seed, 500 + c as u64),
            cfg.discard,
        )
        .map_err(|e| anyhow::anyhow!("synthesized simulation: {e}"))?;
        means.push(mps_to_kmh(rmse));
    }
    let (mean, se, trials) = chunked_mean(&means, per_chunk);
    bundle.records.push(SummaryRecord::estimated(
        "synthesized_rmse",
        "km/h",
        Some(mps_to_kmh(chosen.tight_total.sqrt())),
        mean,
        se,
        trials,
    ));

    // convergence comparison: every filter starts from the wrong velocity
    let wrong = DVector::from_vec(vec![0.0, cfg.wrong_init_kmh / 3.6]);
    let conv_trials = cfg.common.trials.min(50);
    let mut traces = Vec::new();
    let mut steps = serde_json::Map::new();
    for (name, design) in &designs[1..] {
        let mc = monte_carlo_rmse(
            design,
            cfg.common.horizon,
            conv_trials,
            derive_seed(cfg.common.seed, 1000),
            Some(&wrong),
            cfg.discard,
        )?;
        steps.insert(
            format!("{name}_convergence_step"),
            serde_json::json!(mc.convergence_step),
        );
        traces.push((name.to_string(), mc.error_trace));
    }
    bundle.extra = serde_json::Value::Object(steps);
    write_trace(
        out,
        "convergence",
        &[
            "step",
            "rmse_input_compensated_kmh",
            "rmse_output_kmh",
        ],
        (0..cfg.common.horizon).map(|t| {
            vec![
                TraceValue::Step(t),
                TraceValue::Value(mps_to_kmh(traces[0].1[t])),
                TraceValue::Value(mps_to_kmh(traces[1].1[t])),
            ]
        }),
    )?;
    let path = bundle.write_summary(out)?;
    println!("traffic: wrote {}", path.display());
    Ok(())
}
