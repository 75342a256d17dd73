//! Desk-scale benchmark harness: three pipeline scenarios, offered-load
//! pacing, feature-mask sweeps, and CSV report emission.
//!
//! Work is deterministic for a fixed stream: packet, flow, collision and
//! classification counts never depend on timing. Only the duration-derived
//! columns vary between runs.

pub mod traffic;

use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::catalog::FeatureMask;
use crate::flowtable::{flow_id, FlowRecord, FlowTable, FlowTableError};
use crate::nids::DecisionTreeModel;
use crate::packet::{parse_packet, CanonicalKey, PacketStream, ParseOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Parse and count only.
    Forwarding,
    /// Parse plus flow-table update.
    Netflow,
    /// Netflow plus decision-tree classification on every update.
    Nids,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Forwarding, Scenario::Netflow, Scenario::Nids];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Forwarding => "forwarding",
            Scenario::Netflow => "netflow",
            Scenario::Nids => "nids",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        match s {
            "forwarding" => Some(Scenario::Forwarding),
            "netflow" => Some(Scenario::Netflow),
            "nids" => Some(Scenario::Nids),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("the nids scenario requires a model")]
    ModelRequired,
    #[error("feature sweep needs at least 2 masks, got {0}")]
    InsufficientMasks(usize),
    #[error(transparent)]
    Table(#[from] FlowTableError),
    #[error("report i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed report csv: {0}")]
    BadReport(String),
}

/// Knobs shared by every scenario run.
#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub index_bits: u8,
    pub mask: FeatureMask,
    /// Target offered load; `None` runs the pipeline flat out.
    pub offered_pps: Option<u64>,
    /// Worker threads; above 1 the stream is partitioned by flow-id high
    /// bits and aggregate throughput is reported.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            index_bits: crate::flowtable::DEFAULT_INDEX_BITS,
            mask: FeatureMask::ALL,
            offered_pps: None,
            workers: 1,
        }
    }
}

/// Outcome of one scenario repetition.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub scenario: &'static str,
    pub mask: FeatureMask,
    pub packets_offered: u64,
    pub packets_processed: u64,
    pub duration_s: f64,
    pub pps: f64,
    pub gbps: f64,
    pub collisions: u64,
    pub evictions: u64,
    pub rep: u32,
    /// Flows resident in the table when the stream ended.
    pub flows: u64,
    /// The pacing target this run was offered, for the plot file.
    pub offered_pps: Option<u64>,
    /// Packets processed in each elapsed wall-clock second (empty in
    /// sharded mode).
    pub per_second: Vec<u64>,
}

/// Clock bookkeeping for one timed loop: offered-load pacing and the
/// per-second throughput series. Checks the clock only every `check_mask+1`
/// packets to keep it out of the hot path.
struct Meter {
    start: Instant,
    target_pps: Option<u64>,
    check_mask: u64,
    per_second: Vec<u64>,
    seconds_filled: u64,
    processed_at_fill: u64,
}

impl Meter {
    fn new(target_pps: Option<u64>) -> Meter {
        Meter {
            start: Instant::now(),
            target_pps,
            // Pacing wants fine granularity; free-running loops check
            // rarely so the clock read cost stays negligible.
            check_mask: if target_pps.is_some() { 63 } else { 4095 },
            per_second: Vec::new(),
            seconds_filled: 0,
            processed_at_fill: 0,
        }
    }

    #[inline]
    fn tick(&mut self, processed: u64) {
        if processed & self.check_mask != 0 {
            return;
        }
        if let Some(pps) = self.target_pps {
            let due = Duration::from_secs_f64(processed as f64 / pps as f64);
            while self.start.elapsed() < due {
                std::hint::spin_loop();
            }
        }
        let sec = self.start.elapsed().as_secs();
        while self.seconds_filled < sec {
            self.per_second.push(processed - self.processed_at_fill);
            self.processed_at_fill = processed;
            self.seconds_filled += 1;
        }
    }

    fn finish(mut self, processed: u64) -> (f64, Vec<u64>) {
        let duration = self.start.elapsed().as_secs_f64().max(1e-9);
        if processed > self.processed_at_fill {
            self.per_second.push(processed - self.processed_at_fill);
        }
        (duration, self.per_second)
    }
}

fn loop_forwarding<'a>(
    frames: impl Iterator<Item = (&'a [u8], u64)>,
    meter: &mut Meter,
) -> (u64, u64) {
    let mut processed = 0u64;
    let mut bytes = 0u64;
    for (frame, ts) in frames {
        // black_box keeps the pure parse from being optimized out of the
        // measured loop.
        std::hint::black_box(parse_packet(frame, ts));
        processed += 1;
        bytes += frame.len() as u64;
        meter.tick(processed);
    }
    (processed, bytes)
}

fn loop_netflow<'a>(
    frames: impl Iterator<Item = (&'a [u8], u64)>,
    table: &mut FlowTable,
    meter: &mut Meter,
) -> (u64, u64) {
    let mut processed = 0u64;
    let mut bytes = 0u64;
    for (frame, ts) in frames {
        if let ParseOutcome::Parsed(pkt) = parse_packet(frame, ts) {
            let (key, forward) = CanonicalKey::from_tuple(&pkt.five_tuple());
            let _ = table.update_flow(&pkt, key, forward);
        }
        processed += 1;
        bytes += frame.len() as u64;
        meter.tick(processed);
    }
    (processed, bytes)
}

fn loop_nids<'a>(
    frames: impl Iterator<Item = (&'a [u8], u64)>,
    table: &mut FlowTable,
    model: &DecisionTreeModel,
    meter: &mut Meter,
) -> (u64, u64) {
    let mut processed = 0u64;
    let mut bytes = 0u64;
    for (frame, ts) in frames {
        if let ParseOutcome::Parsed(pkt) = parse_packet(frame, ts) {
            let (key, forward) = CanonicalKey::from_tuple(&pkt.five_tuple());
            let _ = table.update_flow_with(&pkt, key, forward, |rec| {
                rec.malicious_flag = model.classify_label(rec);
            });
        }
        processed += 1;
        bytes += frame.len() as u64;
        meter.tick(processed);
    }
    (processed, bytes)
}

fn build_report(
    scenario: Scenario,
    config: &BenchConfig,
    rep: u32,
    offered: u64,
    processed: u64,
    bytes: u64,
    duration_s: f64,
    per_second: Vec<u64>,
    collisions: u64,
    evictions: u64,
    flows: u64,
) -> BenchReport {
    BenchReport {
        scenario: scenario.name(),
        mask: config.mask,
        packets_offered: offered,
        packets_processed: processed,
        duration_s,
        pps: processed as f64 / duration_s,
        gbps: bytes as f64 * 8.0 / duration_s / 1e9,
        collisions,
        evictions,
        rep,
        flows,
        offered_pps: config.offered_pps,
        per_second,
    }
}

/// Run one repetition of a scenario and also return the final flow-table
/// snapshot (empty for forwarding).
pub fn run_scenario_with_snapshot(
    scenario: Scenario,
    stream: &PacketStream,
    config: &BenchConfig,
    model: Option<&DecisionTreeModel>,
    rep: u32,
) -> Result<(BenchReport, Vec<FlowRecord>), BenchError> {
    if scenario == Scenario::Nids && model.is_none() {
        return Err(BenchError::ModelRequired);
    }
    if config.workers > 1 {
        return run_sharded(scenario, stream, config, model, rep);
    }
    let offered = stream.len() as u64;
    match scenario {
        Scenario::Forwarding => {
            let mut meter = Meter::new(config.offered_pps);
            let (processed, bytes) = loop_forwarding(stream.iter(), &mut meter);
            let (duration_s, per_second) = meter.finish(processed);
            Ok((
                build_report(
                    scenario, config, rep, offered, processed, bytes, duration_s, per_second,
                    0, 0, 0,
                ),
                Vec::new(),
            ))
        }
        Scenario::Netflow | Scenario::Nids => {
            let mut table = FlowTable::new(config.index_bits, config.mask)?;
            let mut meter = Meter::new(config.offered_pps);
            let (processed, bytes) = match scenario {
                Scenario::Nids => loop_nids(
                    stream.iter(),
                    &mut table,
                    model.expect("checked above"),
                    &mut meter,
                ),
                _ => loop_netflow(stream.iter(), &mut table, &mut meter),
            };
            let (duration_s, per_second) = meter.finish(processed);
            let snapshot = table.snapshot();
            Ok((
                build_report(
                    scenario, config, rep, offered, processed, bytes, duration_s, per_second,
                    table.collisions(), table.evictions(), snapshot.len() as u64,
                ),
                snapshot,
            ))
        }
    }
}

/// Run one repetition of a scenario.
pub fn run_scenario(
    scenario: Scenario,
    stream: &PacketStream,
    config: &BenchConfig,
    model: Option<&DecisionTreeModel>,
    rep: u32,
) -> Result<BenchReport, BenchError> {
    run_scenario_with_snapshot(scenario, stream, config, model, rep).map(|(r, _)| r)
}

struct WorkerOut {
    processed: u64,
    bytes: u64,
    table: Option<FlowTable>,
}

fn run_sharded(
    scenario: Scenario,
    stream: &PacketStream,
    config: &BenchConfig,
    model: Option<&DecisionTreeModel>,
    rep: u32,
) -> Result<(BenchReport, Vec<FlowRecord>), BenchError> {
    let workers = config.workers;
    let offered = stream.len() as u64;
    let needs_table = scenario != Scenario::Forwarding;

    // Untimed pre-pass: partition frame indices. Flow-owning scenarios
    // partition by flow-id high bits so each table slot has one owner;
    // forwarding just round-robins.
    let mut parts: Vec<Vec<u32>> = vec![Vec::new(); workers];
    for i in 0..stream.len() {
        let (frame, ts) = stream.frame(i);
        let w = if needs_table {
            match parse_packet(frame, ts) {
                ParseOutcome::Parsed(pkt) => {
                    let (key, _) = CanonicalKey::from_tuple(&pkt.five_tuple());
                    (flow_id(&key, config.index_bits) as usize * workers) >> config.index_bits
                }
                _ => i % workers,
            }
        } else {
            i % workers
        };
        parts[w].push(i as u32);
    }

    // Tables built serially so configuration errors surface before any
    // thread spawns.
    let mut tables: Vec<Option<FlowTable>> = Vec::with_capacity(workers);
    for _ in 0..workers {
        tables.push(if needs_table {
            Some(FlowTable::new(config.index_bits, config.mask)?)
        } else {
            None
        });
    }

    let per_worker_pps = config.offered_pps.map(|p| (p / workers as u64).max(1));
    let start = Instant::now();
    let outs: Vec<WorkerOut> = std::thread::scope(|scope| {
        let handles: Vec<_> = parts
            .iter()
            .zip(tables.into_iter())
            .map(|(idxs, mut table)| {
                let idxs: &[u32] = idxs;
                scope.spawn(move || {
                    let frames = idxs.iter().map(|&i| stream.frame(i as usize));
                    let mut meter = Meter::new(per_worker_pps);
                    let (processed, bytes) = match (scenario, table.as_mut()) {
                        (Scenario::Nids, Some(t)) => {
                            loop_nids(frames, t, model.expect("checked"), &mut meter)
                        }
                        (_, Some(t)) => loop_netflow(frames, t, &mut meter),
                        (_, None) => loop_forwarding(frames, &mut meter),
                    };
                    let _ = meter.finish(processed);
                    WorkerOut { processed, bytes, table }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("bench worker panicked"))
            .collect()
    });
    let duration_s = start.elapsed().as_secs_f64().max(1e-9);

    let processed: u64 = outs.iter().map(|o| o.processed).sum();
    let bytes: u64 = outs.iter().map(|o| o.bytes).sum();
    let mut collisions = 0;
    let mut evictions = 0;
    let mut snapshot = Vec::new();
    for out in outs {
        if let Some(table) = out.table {
            collisions += table.collisions();
            evictions += table.evictions();
            snapshot.extend(table.snapshot());
        }
    }
    snapshot.sort_by_key(|r: &FlowRecord| (r.first_ts, r.slot));
    let flows = snapshot.len() as u64;
    Ok((
        build_report(
            scenario, config, rep, offered, processed, bytes, duration_s, Vec::new(),
            collisions, evictions, flows,
        ),
        snapshot,
    ))
}

/// Median of a non-empty sample; even-sized samples average the middle two.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-mask sweep aggregate: median throughput and the throughput drop
/// relative to the smallest mask in the sweep.
#[derive(Debug, Clone)]
pub struct MaskSummary {
    pub mask: FeatureMask,
    pub median_pps: f64,
    pub drop_vs_smallest_pct: f64,
}

#[derive(Debug)]
pub struct SweepResult {
    /// One report per (mask, repetition), masks in input order.
    pub reports: Vec<BenchReport>,
    pub summary: Vec<MaskSummary>,
}

/// Run the netflow scenario for each mask, `repetitions` times each
/// (interleaved, after one unmeasured warm-up pass), and summarize
/// throughput drop relative to the smallest mask.
pub fn feature_sweep(
    stream: &PacketStream,
    masks: &[FeatureMask],
    repetitions: u32,
    config: &BenchConfig,
) -> Result<SweepResult, BenchError> {
    if masks.len() < 2 {
        return Err(BenchError::InsufficientMasks(masks.len()));
    }
    let repetitions = repetitions.max(1);
    // One unmeasured pass lets caches and CPU frequency settle before the
    // clock matters; interleaving the repetitions across masks spreads any
    // transient system slowdown over every mask instead of letting it skew
    // one mask's contiguous block.
    {
        let warm = BenchConfig { mask: masks[0], ..*config };
        run_scenario(Scenario::Netflow, stream, &warm, None, 0)?;
    }
    let mut grouped: Vec<Vec<BenchReport>> = masks
        .iter()
        .map(|_| Vec::with_capacity(repetitions as usize))
        .collect();
    for rep in 0..repetitions {
        for (group, &mask) in grouped.iter_mut().zip(masks) {
            let cfg = BenchConfig { mask, ..*config };
            group.push(run_scenario(Scenario::Netflow, stream, &cfg, None, rep)?);
        }
    }
    let medians: Vec<f64> = grouped
        .iter()
        .map(|group| median(&group.iter().map(|r| r.pps).collect::<Vec<f64>>()))
        .collect();
    let mut reports = Vec::with_capacity(masks.len() * repetitions as usize);
    for group in grouped {
        reports.extend(group);
    }
    // Baseline: the mask with the fewest enabled fields (first on ties).
    let base_idx = (0..masks.len())
        .min_by_key(|&i| (masks[i].len(), i))
        .expect("non-empty masks");
    let base = medians[base_idx];
    let summary = masks
        .iter()
        .zip(&medians)
        .map(|(&mask, &median_pps)| MaskSummary {
            mask,
            median_pps,
            drop_vs_smallest_pct: if base == 0.0 {
                0.0
            } else {
                (base - median_pps) / base * 100.0
            },
        })
        .collect();
    Ok(SweepResult { reports, summary })
}

pub const REPORT_HEADER: &str =
    "scenario,mask,packets_offered,packets_processed,duration_s,pps,gbps,collisions,evictions,rep";
pub const PLOT_HEADER: &str = "offered_pps,achieved_pps";

fn format_report_row(r: &BenchReport) -> String {
    format!(
        "{},{},{},{},{:.6},{:.3},{:.6},{},{},{}",
        r.scenario,
        r.mask.display_name(),
        r.packets_offered,
        r.packets_processed,
        r.duration_s,
        r.pps,
        r.gbps,
        r.collisions,
        r.evictions,
        r.rep,
    )
}

/// Render the report CSV (the documented 10-column schema).
pub fn render_report_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format_report_row(r));
        out.push('\n');
    }
    out
}

/// Render the plot-data file: one (offered, achieved) point per report.
/// Unlimited runs plot at their achieved rate.
pub fn render_plot_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for r in reports {
        let offered = r.offered_pps.map_or(r.pps, |p| p as f64);
        out.push_str(&format!("{:.3},{:.3}\n", offered, r.pps));
    }
    out
}

/// Write `report.csv` and `plot.csv` into `out_dir`.
pub fn emit_report(reports: &[BenchReport], out_dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let mut report = std::fs::File::create(out_dir.join("report.csv"))?;
    report.write_all(render_report_csv(reports).as_bytes())?;
    let mut plot = std::fs::File::create(out_dir.join("plot.csv"))?;
    plot.write_all(render_plot_csv(reports).as_bytes())?;
    Ok(())
}

/// One parsed row of a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub mask: String,
    pub packets_offered: u64,
    pub packets_processed: u64,
    pub duration_s: f64,
    pub pps: f64,
    pub gbps: f64,
    pub collisions: u64,
    pub evictions: u64,
    pub rep: u32,
}

/// Parse a report CSV produced by [`render_report_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, BenchError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REPORT_HEADER => {}
        other => return Err(BenchError::BadReport(format!("bad header: {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 {
            return Err(BenchError::BadReport(format!(
                "row {}: expected 10 columns, found {}",
                i + 2,
                cells.len()
            )));
        }
        let bad = |what: &str| BenchError::BadReport(format!("row {}: bad {what}", i + 2));
        rows.push(ReportRow {
            scenario: cells[0].to_string(),
            mask: cells[1].to_string(),
            packets_offered: cells[2].parse().map_err(|_| bad("packets_offered"))?,
            packets_processed: cells[3].parse().map_err(|_| bad("packets_processed"))?,
            duration_s: cells[4].parse().map_err(|_| bad("duration_s"))?,
            pps: cells[5].parse().map_err(|_| bad("pps"))?,
            gbps: cells[6].parse().map_err(|_| bad("gbps"))?,
            collisions: cells[7].parse().map_err(|_| bad("collisions"))?,
            evictions: cells[8].parse().map_err(|_| bad("evictions"))?,
            rep: cells[9].parse().map_err(|_| bad("rep"))?,
        });
    }
    Ok(rows)
}
