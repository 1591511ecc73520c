//! Aggregation scenario: moving-average channels with input or output noise
//! placement, analytic crossover, and Monte Carlo confirmation.

use std::path::Path;

use anyhow::Result;
use dpfilter_core::mechanisms::{
    crossover_analysis, design_input_perturbation, design_output_perturbation,
    monte_carlo_mse, run_pipeline, AggregatorPipeline, Preference,
};
use dpfilter_core::numerics::derive_seed;
use dpfilter_core::privacy::{AdjacencySpec, BudgetLedger, NormOrder};
use dpfilter_core::StateSpace64;
use nalgebra::DVector;

use crate::bundle::{chunked_mean, write_trace, ResultBundle, SummaryRecord, TraceValue};
use crate::config::AggregateConfig;

fn channels(cfg: &AggregateConfig) -> Result<Vec<StateSpace64>> {
    (0..cfg.participants)
        .map(|_| {
            StateSpace64::moving_average(cfg.filter_length)
                .map_err(|e| anyhow::anyhow!("channel: {e}"))
        })
        .collect()
}

fn unit_inputs(cfg: &AggregateConfig) -> Vec<Vec<DVector<f64>>> {
    vec![vec![DVector::from_element(1, 1.0); cfg.common.horizon]; cfg.participants]
}

fn empirical(
    pipeline: &AggregatorPipeline<f64>,
    cfg: &AggregateConfig,
) -> Result<(f64, f64, usize)> {
    let inputs = unit_inputs(cfg);
    let chunks = 10usize.min(cfg.common.trials);
    let per_chunk = (cfg.common.trials / chunks).max(1);
    let mut means = Vec::with_capacity(chunks);
    for c in 0..chunks {
        means.push(monte_carlo_mse(
            pipeline,
            &inputs,
            per_chunk,
            derive_seed(cfg.common.seed, c as u64),
        )?);
    }
    Ok(chunked_mean(&means, per_chunk))
}

pub fn run(cfg: &AggregateConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let budget = cfg.common.budget.to_core()?;
    let adjacency = AdjacencySpec::BoundedVariation {
        orders: vec![NormOrder::L2; cfg.participants],
        bounds: vec![cfg.bound; cfg.participants],
    };
    let kind = cfg.noise.to_core();
    let input = design_input_perturbation(channels(cfg)?, &adjacency, budget, kind)?;
    let output = design_output_perturbation(channels(cfg)?, &adjacency, budget, kind)?;
    let crossover = crossover_analysis(&channels(cfg)?, &adjacency, budget, kind)?;

    let mut bundle = ResultBundle::new("aggregate", cfg.clone())?;
    for (name, pipeline) in [("input_placement", &input), ("output_placement", &output)] {
        let (mean, se, trials) = empirical(pipeline, cfg)?;
        bundle.records.push(SummaryRecord::estimated(
            &format!("{name}_mse"),
            "output^2",
            Some(pipeline.predicted_mse()),
            mean,
            se,
            trials,
        ));
    }
    bundle.extra = serde_json::json!({
        "preferred_placement": match crossover.preferred {
            Preference::Input => "input",
            Preference::Output => "output",
            Preference::Tie => "tie",
        },
    });

    // one seeded run of each placement for the trace table
    let inputs = unit_inputs(cfg);
    let mut ledger = BudgetLedger::new();
    let run_in = run_pipeline(&input, &inputs, cfg.common.seed, &mut ledger)?;
    let run_out = run_pipeline(&output, &inputs, cfg.common.seed, &mut ledger)?;
    write_trace(
        out,
        "aggregate",
        &["step", "true", "released_input", "released_output"],
        (0..cfg.common.horizon).map(|t| {
            vec![
                TraceValue::Step(t),
                TraceValue::Value(run_in.true_signal[t][0]),
                TraceValue::Value(run_in.released[t][0]),
                TraceValue::Value(run_out.released[t][0]),
            ]
        }),
    )?;
    let path = bundle.write_summary(out)?;
    println!("aggregate: wrote {}", path.display());
    Ok(())
}
