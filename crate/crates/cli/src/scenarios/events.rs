//! Event-stream scenario: one burst input released through the four
//! equalizer variants, with analytic predictions, Monte Carlo estimates, and
//! a sample-path trace.

use std::path::Path;

use anyhow::Result;
use dpfilter_core::events::{
    burst_statistics, design_input_noise, design_mmse, design_zfe,
    generate_burst_input, monte_carlo_event_mse, run_event_pipeline,
    EqualizerDesign,
};
use dpfilter_core::mechanisms::NoiseKind;
use dpfilter_core::numerics::derive_seed;
use dpfilter_core::privacy::BudgetLedger;

use crate::bundle::{write_trace, ResultBundle, SummaryRecord, TraceValue};
use crate::config::EventsConfig;

pub fn designs(cfg: &EventsConfig) -> Result<Vec<(String, EqualizerDesign<f64>)>> {
    let g = cfg.filter.to_core()?;
    let budget = cfg.common.budget.to_core()?;
    let input = design_input_noise(&g, &budget, NoiseKind::Gaussian, false)?;
    let detector = design_input_noise(&g, &budget, NoiseKind::Gaussian, true)?;
    let zfe = design_zfe(&g, &budget, cfg.factor_order)?;
    let stats = burst_statistics::<f64>(cfg.p_on, cfg.p_off, cfg.common.horizon / 4)?;
    let mmse = design_mmse(&g, zfe.pre(), &stats, &budget, cfg.fir_order)?;
    Ok(vec![
        ("input_noise".into(), input),
        ("input_noise_detector".into(), detector),
        ("zfe".into(), zfe),
        ("mmse".into(), mmse),
    ])
}

pub fn run(cfg: &EventsConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let designs = designs(cfg)?;
    let input = generate_burst_input(cfg.common.horizon, cfg.p_on, cfg.p_off, cfg.common.seed)?;

    let mut bundle = ResultBundle::new("events", cfg.clone())?;
    let mut released_traces = Vec::new();
    let mut reference = Vec::new();
    for (name, design) in &designs {
        let mc = monte_carlo_event_mse(
            design,
            &input,
            cfg.common.trials,
            derive_seed(cfg.common.seed, 1),
        )?;
        // the detector release is nonlinear, so its analytic prediction
        // refers to the linear variant and is omitted here
        let predicted = if design.detector() {
            None
        } else {
            Some(design.predicted_mse())
        };
        bundle.records.push(SummaryRecord::estimated(
            &format!("{name}_mse"),
            "output^2",
            predicted,
            mc.mean,
            mc.standard_error,
            mc.trials,
        ));
        let mut ledger = BudgetLedger::new();
        let one = run_event_pipeline(design, &input, derive_seed(cfg.common.seed, 2), &mut ledger)?;
        reference = one.reference.clone();
        released_traces.push(one.released);
    }
    bundle.records.push(SummaryRecord::analytic(
        "zfe_lower_bound",
        "output^2",
        designs[2].1.lower_bound(),
    ));

    let header: Vec<String> = ["step", "input", "reference"]
        .iter()
        .map(|s| s.to_string())
        .chain(designs.iter().map(|(n, _)| format!("released_{n}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_trace(
        out,
        "events",
        &header_refs,
        (0..cfg.common.horizon).map(|t| {
            let mut row = vec![
                TraceValue::Step(t),
                TraceValue::Value(input.values()[t] as f64),
                TraceValue::Value(reference[t]),
            ];
            row.extend(released_traces.iter().map(|r| TraceValue::Value(r[t])));
            row
        }),
    )?;
    let path = bundle.write_summary(out)?;
    println!("events: wrote {}", path.display());
    Ok(())
}
