//! `flowforge run`: replay a capture through the flow pipeline.

use std::net::UdpSocket;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use flowforge_core::export::render_csv;
use flowforge_core::export::{encode_v9, ExporterState};
use flowforge_core::flowtable::{FlowRecord, FlowTable, SlotVerdict};
use flowforge_core::packet::{parse_packet, CanonicalKey, ParseOutcome};
use flowforge_core::pcap::read_pcap;

use crate::config::Settings;
use crate::CliError;

use super::{load_model_file, resolve, write_out, Overrides};

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Input capture (classic pcap, microsecond or nanosecond stamps).
    #[arg(long, value_name = "FILE")]
    pub pcap: PathBuf,
    /// dtm-1 model; when given, every flow is classified on every packet
    /// and the CSV gains a label column.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Write the flow CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also send every finished flow as NetFlow v9 datagrams over UDP to
    /// export_host:export_port.
    #[arg(long)]
    pub export: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run(args: &RunArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let stream = read_pcap(&args.pcap)
        .map_err(|e| anyhow!("--pcap {}: {e}", args.pcap.display()))?;
    let model = args.model.as_deref().map(load_model_file).transpose()?;
    if let Some(m) = &model {
        if !settings.feature_mask.is_superset_of(m.feature_mask()) {
            let missing = m
                .feature_mask()
                .iter()
                .find(|f| !settings.feature_mask.contains(*f))
                .expect("not a superset");
            return Err(CliError::Usage(format!(
                "--feature-mask: the model reads {} but the mask disables it",
                missing.name()
            )));
        }
    }
    let mut table = FlowTable::new(settings.index_bits, settings.feature_mask)
        .map_err(|e| CliError::Usage(format!("--index-bits: {e}")))?;

    let mut finished: Vec<FlowRecord> = Vec::new();
    let mut packets = 0u64;
    let mut parsed = 0u64;
    let mut now = 0u64;
    for (frame, ts) in stream.iter() {
        packets += 1;
        // The clock never runs backwards even if stamps arrive reordered.
        now = now.max(ts);
        let pkt = match parse_packet(frame, ts) {
            ParseOutcome::Parsed(p) => p,
            _ => continue,
        };
        parsed += 1;
        let (key, is_forward) = CanonicalKey::from_tuple(&pkt.five_tuple());
        let verdict = match &model {
            Some(m) => {
                let (_, verdict, ()) = table.update_flow_with(&pkt, key, is_forward, |rec| {
                    rec.malicious_flag = m.classify_label(rec);
                });
                verdict
            }
            None => table.update_flow(&pkt, key, is_forward).1,
        };
        // A slot collision evicts the incumbent: that flow is finished as
        // far as the table is concerned, so it exports like any other.
        if let SlotVerdict::CollisionEvicted(old) = verdict {
            finished.push(*old);
        }
        finished.extend(table.expire_flows(
            now,
            settings.idle_timeout_s,
            settings.active_timeout_s,
        ));
    }
    finished.extend(table.drain());
    finished.sort_by_key(|r| (r.first_ts, r.slot));

    let csv = render_csv(&finished, settings.feature_mask, model.is_some());
    write_out(args.out.as_deref(), &csv)?;

    let mut datagrams = 0usize;
    if args.export {
        let dest = resolve("--export", &settings.export_host, settings.export_port)?;
        let socket = UdpSocket::bind(("0.0.0.0", 0))
            .context("--export: cannot open a UDP socket")?;
        let mut state = ExporterState::new(settings.source_id);
        let payloads = encode_v9(
            &finished,
            settings.feature_mask,
            settings.template_id,
            &mut state,
        )
        .map_err(|e| CliError::Usage(format!("--template-id: {e}")))?;
        for payload in &payloads {
            socket
                .send_to(payload, dest)
                .with_context(|| format!("--export: send to {dest} failed"))?;
        }
        datagrams = payloads.len();
    }

    eprintln!(
        "{}",
        serde_json::json!({
            "packets": packets,
            "parsed": parsed,
            "flows": finished.len(),
            "collisions": table.collisions(),
            "evictions": table.evictions(),
            "datagrams": datagrams,
        })
    );
    Ok(())
}
