//! `flowforge bench`: timed pipeline runs and the feature-mask sweep.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use flowforge_core::bench::traffic::generate_traffic;
use flowforge_core::bench::{
    emit_report, feature_sweep, median, run_scenario, BenchError, BenchReport, Scenario,
};
use flowforge_core::catalog::FeatureMask;
use flowforge_core::nids::DecisionTreeModel;
use flowforge_core::packet::PacketStream;
use flowforge_core::pcap::read_pcap;

use crate::config::Settings;
use crate::CliError;

use super::{load_model_file, Overrides};

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Scenario to run; repeatable. Default: forwarding and netflow, plus
    /// nids when --model is given.
    #[arg(long = "scenario", value_name = "NAME")]
    pub scenarios: Vec<String>,
    /// dtm-1 model for the nids scenario.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Replay this capture instead of synthetic traffic.
    #[arg(long, value_name = "FILE")]
    pub pcap: Option<PathBuf>,
    /// Comma-separated list of feature masks: run the netflow mask sweep
    /// (at least two masks) instead of the scenario suite.
    #[arg(long, value_name = "LIST")]
    pub masks: Option<String>,
    /// Directory for report.csv, plot.csv and (sweeps) sweep.csv.
    #[arg(long, value_name = "DIR", default_value = "bench-out")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn scenario_list(
    args: &BenchArgs,
    model: Option<&DecisionTreeModel>,
) -> Result<Vec<Scenario>, CliError> {
    if args.scenarios.is_empty() {
        let mut list = vec![Scenario::Forwarding, Scenario::Netflow];
        if model.is_some() {
            list.push(Scenario::Nids);
        }
        return Ok(list);
    }
    let mut list = Vec::with_capacity(args.scenarios.len());
    for name in &args.scenarios {
        let sc = Scenario::parse(name).ok_or_else(|| {
            CliError::Usage(format!(
                "--scenario: unknown scenario {name:?} (forwarding, netflow, nids)"
            ))
        })?;
        if !list.contains(&sc) {
            list.push(sc);
        }
    }
    Ok(list)
}

fn load_stream(args: &BenchArgs, settings: &Settings) -> Result<PacketStream, CliError> {
    match &args.pcap {
        Some(path) => read_pcap(path)
            .map_err(|e| CliError::Runtime(anyhow!("--pcap {}: {e}", path.display()))),
        None => generate_traffic(&settings.traffic_spec())
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn bench_error(e: BenchError) -> CliError {
    match e {
        BenchError::ModelRequired => {
            CliError::Usage("--model is required for the nids scenario".to_string())
        }
        BenchError::InsufficientMasks(_) => {
            CliError::Usage(format!("--masks: {e}"))
        }
        BenchError::Table(t) => CliError::Usage(format!("--index-bits: {t}")),
        other => CliError::Runtime(anyhow!(other)),
    }
}

pub fn run(args: &BenchArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let model = args.model.as_deref().map(load_model_file).transpose()?;
    let stream = load_stream(args, &settings)?;
    let config = settings.bench_config();
    let reps = settings.repetitions.max(1);

    if let Some(list) = &args.masks {
        let mut masks = Vec::new();
        for part in list.split(',') {
            let mask = FeatureMask::parse(part)
                .map_err(|e| CliError::Usage(format!("--masks: {e}")))?;
            masks.push(mask);
        }
        let sweep = feature_sweep(&stream, &masks, reps, &config).map_err(bench_error)?;
        emit_report(&sweep.reports, &args.out_dir).map_err(bench_error)?;
        let mut sweep_csv = String::from("mask,median_pps,drop_vs_smallest_pct\n");
        for s in &sweep.summary {
            sweep_csv.push_str(&format!(
                "{},{:.3},{:.4}\n",
                s.mask.display_name(),
                s.median_pps,
                s.drop_vs_smallest_pct
            ));
        }
        let path = args.out_dir.join("sweep.csv");
        std::fs::write(&path, &sweep_csv)
            .with_context(|| format!("--out-dir {}: cannot write", path.display()))?;
        for s in &sweep.summary {
            println!(
                "mask={} median_pps={:.3} drop_vs_smallest_pct={:.4}",
                s.mask.display_name(),
                s.median_pps,
                s.drop_vs_smallest_pct
            );
        }
        return Ok(());
    }

    let scenarios = scenario_list(args, model.as_ref())?;
    if scenarios.contains(&Scenario::Nids) && model.is_none() {
        return Err(CliError::Usage(
            "--model is required for the nids scenario".to_string(),
        ));
    }

    // Warm up unmeasured, then interleave repetitions across scenarios so
    // transient system noise spreads over all of them rather than skewing
    // whichever scenario owned a contiguous block of wall clock.
    if let Some(&first) = scenarios.first() {
        run_scenario(first, &stream, &config, model.as_ref(), 0).map_err(bench_error)?;
    }
    let mut grouped: Vec<Vec<BenchReport>> = scenarios.iter().map(|_| Vec::new()).collect();
    for rep in 0..reps {
        for (group, &scenario) in grouped.iter_mut().zip(&scenarios) {
            let report = run_scenario(scenario, &stream, &config, model.as_ref(), rep)
                .map_err(bench_error)?;
            group.push(report);
        }
    }
    let mut reports: Vec<BenchReport> = Vec::new();
    let mut medians: Vec<(&'static str, f64)> = Vec::new();
    for (group, &scenario) in grouped.into_iter().zip(&scenarios) {
        let pps: Vec<f64> = group.iter().map(|r| r.pps).collect();
        medians.push((scenario.name(), median(&pps)));
        reports.extend(group);
    }
    emit_report(&reports, &args.out_dir).map_err(bench_error)?;

    for (name, value) in &medians {
        println!("scenario={name} median_pps={value:.3}");
    }
    let find = |name| medians.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
    if let (Some(netflow), Some(nids)) = (find("netflow"), find("nids")) {
        if netflow > 0.0 {
            println!(
                "drop_nids_vs_netflow_pct={:.4}",
                (netflow - nids) / netflow * 100.0
            );
        }
    }
    Ok(())
}
