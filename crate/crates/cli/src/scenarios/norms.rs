//! Closed-form calibration numbers: the Gaussian-mechanism multiplier,
//! moving-average norms, and the vehicle-scenario sensitivity gain.

use std::path::Path;

use anyhow::{anyhow, Result};
use dpfilter_core::kalman::{
    build_traffic_scenario, privacy_gain_system, steady_state_kf, FilterForm,
};
use dpfilter_core::privacy::{kappa, PrivacyBudget};
use dpfilter_core::StateSpace64;

use crate::bundle::{ResultBundle, SummaryRecord};
use crate::config::NormsConfig;

/// The per-participant sensitivity gain of the vehicle scenario: the H-inf
/// norm from one participant's protected states to the released average,
/// rescaled to a single participant.
pub fn traffic_participant_gain(participants: usize) -> Result<f64> {
    let models = build_traffic_scenario(participants, 1.0, 1.0, 1.0, 100.0, 45.0)
        .map_err(|e| anyhow!("traffic scenario: {e}"))?;
    let m = &models[0];
    let kf = steady_state_kf(m, 0.0).map_err(|e| anyhow!("kalman design: {e}"))?;
    let sys = privacy_gain_system(m, kf.realization(FilterForm::Filtering))
        .map_err(|e| anyhow!("gain system: {e}"))?;
    let gain = sys.hinf_norm().map_err(|e| anyhow!("hinf: {e}"))?;
    Ok(gain * participants as f64)
}

pub fn run(cfg: &NormsConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let mut bundle = ResultBundle::new("norms", cfg.clone())?;

    let budget = cfg.common.budget.to_core()?;
    bundle.records.push(SummaryRecord::analytic(
        "kappa",
        "1",
        kappa(&budget).map_err(|e| anyhow!("kappa: {e}"))?,
    ));
    let ln2 = PrivacyBudget::new(2.0f64.ln(), 0.05).map_err(|e| anyhow!("budget: {e}"))?;
    bundle.records.push(SummaryRecord::analytic(
        "kappa_eps_ln2_delta_0.05",
        "1",
        kappa(&ln2).map_err(|e| anyhow!("kappa: {e}"))?,
    ));

    for &l in &cfg.ma_lengths {
        let g = StateSpace64::moving_average(l).map_err(|e| anyhow!("ma({l}): {e}"))?;
        let h2 = g.h2_norm().map_err(|e| anyhow!("h2: {e}"))?;
        let hinf = g.hinf_norm().map_err(|e| anyhow!("hinf: {e}"))?;
        bundle.records.push(SummaryRecord::analytic(
            &format!("ma{l}_h2_norm_sq"),
            "1",
            h2 * h2,
        ));
        bundle
            .records
            .push(SummaryRecord::analytic(&format!("ma{l}_hinf_norm"), "1", hinf));
    }

    let gain = traffic_participant_gain(cfg.participants)?;
    bundle.records.push(SummaryRecord::analytic(
        "traffic_participant_gain",
        "1",
        gain,
    ));
    bundle.records.push(SummaryRecord::analytic(
        "traffic_participant_gain_sq",
        "1",
        gain * gain,
    ));

    let path = bundle.write_summary(out)?;
    println!("norms: wrote {}", path.display());
    Ok(())
}
