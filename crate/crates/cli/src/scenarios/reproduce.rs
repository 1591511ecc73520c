//! Reproduction harness: reruns the pinned scenarios and checks the headline
//! numbers against their reference targets, writing a pass/fail report.
//!
//! A failed check is recorded in the report and printed, but the command
//! still exits cleanly: the report is the product.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use dpfilter_core::events::{generate_burst_input, monte_carlo_event_mse};
use dpfilter_core::kalman::{
    design_input_noise_dp, design_output_noise_dp, monte_carlo_rmse, mps_to_kmh,
    FilterForm,
};
use dpfilter_core::lmi::{synthesize_at_lambda, verify_filter, LmiPath};
use dpfilter_core::mechanisms::{crossover_analysis, NoiseKind, Preference};
use dpfilter_core::numerics::derive_seed;
use dpfilter_core::privacy::{kappa, AdjacencySpec, NormOrder, PrivacyBudget};
use dpfilter_core::StateSpace64;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bundle::{write_report, CheckRow, ResultBundle};
use crate::config::{EventsConfig, SynthConfig, TrafficConfig};
use crate::scenarios::{events, norms, traffic};

/// Which reference checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Norms,
    Traffic,
    Synth,
    Events,
    All,
}

impl std::str::FromStr for Suite {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norms" => Ok(Suite::Norms),
            "traffic" => Ok(Suite::Traffic),
            "synth" => Ok(Suite::Synth),
            "events" => Ok(Suite::Events),
            "all" => Ok(Suite::All),
            other => bail!("unknown suite {other:?}; use norms|traffic|synth|events|all"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct ReproduceSettings {
    suite: String,
    seed: Option<u64>,
    trials: Option<usize>,
}

fn within(target: f64, observed: f64, rel: f64) -> bool {
    (observed - target).abs() <= rel * target
}

fn norms_suite() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let ln2 = PrivacyBudget::new(2.0f64.ln(), 0.05).map_err(|e| anyhow!("{e}"))?;
    let k = kappa(&ln2).map_err(|e| anyhow!("{e}"))?;
    rows.push(CheckRow::numeric(
        "gaussian multiplier at (ln 2, 0.05) = 2.65",
        k,
        "abs 0.01",
        (k - 2.65).abs() <= 0.01,
    ));

    for l in [2usize, 5, 10, 50] {
        let g = StateSpace64::moving_average(l).map_err(|e| anyhow!("{e}"))?;
        let h2sq = g.h2_norm().map_err(|e| anyhow!("{e}"))?.powi(2);
        let hinf = g.hinf_norm().map_err(|e| anyhow!("{e}"))?;
        rows.push(CheckRow::numeric(
            &format!("moving-average({l}) squared h2 norm = 1/{l}"),
            h2sq,
            "abs 1e-9",
            (h2sq - 1.0 / l as f64).abs() <= 1e-9,
        ));
        rows.push(CheckRow::numeric(
            &format!("moving-average({l}) hinf norm = 1"),
            hinf,
            "abs 1e-9",
            (hinf - 1.0).abs() <= 1e-9,
        ));
    }

    // noise placement crossover: input wins exactly when n < l
    let budget = PrivacyBudget::new(2.0f64.ln(), 0.05).map_err(|e| anyhow!("{e}"))?;
    let mut crossover_ok = true;
    for n in 1..=10usize {
        for l in 1..=10usize {
            let chans: Vec<StateSpace64> = (0..n)
                .map(|_| StateSpace64::moving_average(l))
                .collect::<dpfilter_core::Result<_>>()
                .map_err(|e| anyhow!("{e}"))?;
            let adj = AdjacencySpec::BoundedVariation {
                orders: vec![NormOrder::L2; n],
                bounds: vec![1.0; n],
            };
            let rep = crossover_analysis(&chans, &adj, budget, NoiseKind::Gaussian)
                .map_err(|e| anyhow!("{e}"))?;
            // the diagonal n == l is an exact analytic tie, which the
            // preference classifier resolves up to rounding
            let input_better = rep.preferred == Preference::Input;
            if input_better != (n < l) {
                crossover_ok = false;
            }
        }
    }
    rows.push(CheckRow {
        target: "input placement beats output exactly when participants < window".into(),
        observed: if crossover_ok {
            "holds on the 10x10 grid".into()
        } else {
            "violated".into()
        },
        tolerance: "exact".into(),
        pass: crossover_ok,
    });

    let gain = norms::traffic_participant_gain(200)?;
    rows.push(CheckRow::numeric(
        "vehicle scenario per-participant release gain = 0.57",
        gain,
        "abs 0.02",
        (gain - 0.57).abs() <= 0.02,
    ));
    // diagnostic: the squared gain lands on the 0.57 reference value,
    // suggesting the reference reports a squared gain
    rows.push(CheckRow::numeric(
        "diagnostic: squared per-participant gain",
        gain * gain,
        "(informational)",
        true,
    ));
    Ok(rows)
}

fn traffic_suite(cfg: &TrafficConfig) -> Result<Vec<CheckRow>> {
    cfg.validate()?;
    let budget = cfg.common.budget.to_core()?;
    let mut rows = Vec::new();
    let designs = [
        (
            "uncompensated input-noise rmse = 26 km/h",
            0.20,
            26.0,
            design_input_noise_dp(traffic::models(cfg)?, &budget, false, FilterForm::Filtering)?,
        ),
        (
            "compensated input-noise rmse = 0.31 km/h",
            0.15,
            0.31,
            design_input_noise_dp(traffic::models(cfg)?, &budget, true, FilterForm::Filtering)?,
        ),
        (
            "output-perturbation rmse = 2.41 km/h",
            0.15,
            2.41,
            design_output_noise_dp(traffic::models(cfg)?, &budget, FilterForm::Filtering)?,
        ),
    ];
    for (name, rel, target, design) in &designs {
        let mc = monte_carlo_rmse(
            design,
            cfg.common.horizon,
            cfg.common.trials,
            cfg.common.seed,
            None,
            cfg.discard,
        )?;
        let kmh = mps_to_kmh(mc.rmse);
        rows.push(CheckRow::numeric(
            name,
            kmh,
            &format!("rel {rel}"),
            within(*target, kmh, *rel),
        ));
    }

    // qualitative convergence: from a wrong initial velocity the compensated
    // scheme takes longer to settle than the output scheme
    let wrong = DVector::from_vec(vec![0.0, cfg.wrong_init_kmh / 3.6]);
    let conv_trials = cfg.common.trials.min(50);
    let step = |design| -> Result<Option<usize>> {
        Ok(monte_carlo_rmse(
            design,
            cfg.common.horizon,
            conv_trials,
            derive_seed(cfg.common.seed, 1000),
            Some(&wrong),
            cfg.discard,
        )?
        .convergence_step)
    };
    let comp_step = step(&designs[1].3)?;
    let out_step = step(&designs[2].3)?;
    let pass = match (comp_step, out_step) {
        (Some(c), Some(o)) => c > o,
        (None, Some(_)) => true,
        _ => false,
    };
    rows.push(CheckRow {
        target: "compensated scheme converges slower than output scheme from 75 km/h".into(),
        observed: format!("settle steps {comp_step:?} vs {out_step:?}"),
        tolerance: "qualitative".into(),
        pass,
    });
    Ok(rows)
}

fn synth_suite(cfg: &SynthConfig) -> Result<Vec<CheckRow>> {
    cfg.validate()?;
    let budget = cfg.common.budget.to_core()?;
    let kap = kappa(&budget).map_err(|e| anyhow!("{e}"))?;
    let k2 = kap * kap;
    let n = cfg.participants;
    let models = dpfilter_core::kalman::build_traffic_scenario(
        n, 1.0, 1.0, 1.0, cfg.rho, cfg.v0_kmh,
    )
    .map_err(|e| anyhow!("{e}"))?;
    let model = &models[0];
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| anyhow!("synth suite needs a sweep"))?;

    let mut best: Option<f64> = None;
    let mut verification_ok = true;
    let mut verified = 0usize;
    for lambda in sweep {
        let point = match synthesize_at_lambda::<f64>(model, lambda, LmiPath::Unstable) {
            Ok(Some(p)) => p,
            Ok(None) | Err(_) => continue,
        };
        let v = match verify_filter(model, &point.filter, LmiPath::Unstable, point.mu, lambda, 1e-5)
        {
            Ok(v) => v,
            Err(_) => {
                verification_ok = false;
                continue;
            }
        };
        verified += 1;
        let slack = 1e-5;
        if v.error_h2_sq > point.mu * (1.0 + slack) + slack
            || v.sensitivity_sq > lambda * (1.0 + slack) + slack
        {
            verification_ok = false;
        }
        let total = n as f64 * v.error_h2_sq + k2 * v.sensitivity_sq;
        if best.map(|b| total < b).unwrap_or(true) {
            best = Some(total);
        }
    }
    let best = best.ok_or_else(|| anyhow!("no certified filter on the sweep"))?;
    let rmse = mps_to_kmh(best.sqrt());
    let mut rows = Vec::new();
    rows.push(CheckRow::numeric(
        "synthesized rmse at most the 2.41 km/h output baseline",
        rmse,
        "abs 0",
        rmse <= 2.41,
    ));
    rows.push(CheckRow::numeric(
        "synthesized rmse near 2.31 km/h (soft)",
        rmse,
        "abs 0.1",
        rmse <= 2.31 + 0.1,
    ));
    rows.push(CheckRow {
        target: "every recovered filter passes independent norm verification".into(),
        observed: format!("{verified} filters verified"),
        tolerance: "rel 1e-5".into(),
        pass: verification_ok && verified > 0,
    });
    Ok(rows)
}

fn events_suite(cfg: &EventsConfig) -> Result<Vec<CheckRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let designs = events::designs(cfg)?;
    let predicted_input = designs[0].1.predicted_mse();
    rows.push(CheckRow::numeric(
        "input-noise mse = 30.1 (analytic)",
        predicted_input,
        "rel 0.02",
        within(30.1, predicted_input, 0.02),
    ));

    let input = generate_burst_input(cfg.common.horizon, cfg.p_on, cfg.p_off, cfg.common.seed)?;
    let mc = |i: usize| -> Result<f64> {
        Ok(monte_carlo_event_mse(
            &designs[i].1,
            &input,
            cfg.common.trials,
            derive_seed(cfg.common.seed, 1),
        )?
        .mean)
    };
    let m_input = mc(0)?;
    let m_det = mc(1)?;
    let m_zfe = mc(2)?;
    let m_mmse = mc(3)?;
    rows.push(CheckRow {
        target: "empirical ordering mmse < zfe < input-noise".into(),
        observed: format!("{m_mmse:.2} < {m_zfe:.2} < {m_input:.2}"),
        tolerance: "strict".into(),
        pass: m_mmse < m_zfe && m_zfe < m_input,
    });
    rows.push(CheckRow::numeric(
        "zfe mean mse in [4, 9]",
        m_zfe,
        "interval",
        (4.0..=9.0).contains(&m_zfe),
    ));
    rows.push(CheckRow::numeric(
        "mmse mean mse in [3, 7]",
        m_mmse,
        "interval",
        (3.0..=7.0).contains(&m_mmse),
    ));
    rows.push(CheckRow::numeric(
        "detector mean mse below 60% of input-noise",
        m_det / m_input,
        "ratio < 0.6",
        m_det < 0.6 * m_input,
    ));
    Ok(rows)
}

pub fn run(
    suite: Suite,
    seed: Option<u64>,
    trials: Option<usize>,
    out: &Path,
) -> Result<()> {
    let wants = |s: Suite| suite == Suite::All || suite == s;
    let mut suites = Vec::new();
    if wants(Suite::Norms) {
        suites.push(("closed-form norms".to_string(), norms_suite()?));
    }
    if wants(Suite::Traffic) {
        let mut cfg = TrafficConfig::pinned();
        if let Some(s) = seed {
            cfg.common.seed = s;
        }
        if let Some(t) = trials {
            cfg.common.trials = t;
        }
        suites.push(("vehicle aggregation".to_string(), traffic_suite(&cfg)?));
    }
    if wants(Suite::Synth) {
        let mut cfg = SynthConfig::pinned();
        if let Some(s) = seed {
            cfg.common.seed = s;
        }
        if let Some(t) = trials {
            cfg.common.trials = t;
        }
        suites.push(("estimator synthesis".to_string(), synth_suite(&cfg)?));
    }
    if wants(Suite::Events) {
        let mut cfg = EventsConfig::pinned();
        if let Some(s) = seed {
            cfg.common.seed = s;
        }
        if let Some(t) = trials {
            cfg.common.trials = t;
        }
        suites.push(("event streams".to_string(), events_suite(&cfg)?));
    }

    let settings = ReproduceSettings {
        suite: format!("{suite:?}").to_lowercase(),
        seed,
        trials,
    };
    let mut bundle = ResultBundle::new("reproduce", settings)?;
    bundle.extra = serde_json::json!(suites
        .iter()
        .map(|(name, rows)| serde_json::json!({ "suite": name, "checks": rows }))
        .collect::<Vec<_>>());
    bundle.write_summary(out)?;
    let report = write_report(out, &suites)?;

    let total: usize = suites.iter().map(|(_, r)| r.len()).sum();
    let passed: usize = suites
        .iter()
        .map(|(_, r)| r.iter().filter(|c| c.pass).count())
        .sum();
    for (name, rows) in &suites {
        for r in rows.iter().filter(|r| !r.pass) {
            println!("FAIL [{name}] {}: observed {}", r.target, r.observed);
        }
    }
    println!(
        "reproduce: {passed}/{total} checks passed; report at {}",
        report.display()
    );
    Ok(())
}
