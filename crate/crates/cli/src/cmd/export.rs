//! `flowforge export`: CSV flow records back onto the NetFlow v9 wire.

use std::net::UdpSocket;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use flowforge_core::export::read_records_csv;
use flowforge_core::export::{encode_v9, ExporterState};

use crate::config::Settings;
use crate::CliError;

use super::{read_named, resolve, Overrides};

#[derive(Debug, clap::Args)]
pub struct ExportArgs {
    /// Flow records CSV to encode.
    #[arg(long, value_name = "FILE")]
    pub records: PathBuf,
    /// Write each datagram as a file in this directory instead of sending
    /// UDP to export_host:export_port.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run(args: &ExportArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let text = read_named("--records", &args.records)?;
    let flows = read_records_csv(&text)
        .map_err(|e| anyhow!("--records {}: {e}", args.records.display()))?;

    // The template mirrors the CSV's own columns unless --feature-mask
    // narrows it; widening would export fields the CSV never carried.
    let mask = if args.overrides.sets_feature_mask() {
        if !flows.mask.is_superset_of(settings.feature_mask) {
            let missing = settings
                .feature_mask
                .iter()
                .find(|f| !flows.mask.contains(*f))
                .expect("not a superset");
            return Err(CliError::Usage(format!(
                "--feature-mask: enables {} but the CSV has no such column",
                missing.name()
            )));
        }
        settings.feature_mask
    } else {
        flows.mask
    };

    let mut state = ExporterState::new(settings.source_id);
    let payloads = encode_v9(&flows.records, mask, settings.template_id, &mut state)
        .map_err(|e| CliError::Usage(format!("--template-id: {e}")))?;
    let bytes: usize = payloads.iter().map(Vec::len).sum();

    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("--out-dir {}: cannot create", dir.display()))?;
            for (i, payload) in payloads.iter().enumerate() {
                let path = dir.join(format!("datagram-{i:04}.bin"));
                std::fs::write(&path, payload)
                    .with_context(|| format!("--out-dir {}: cannot write", path.display()))?;
            }
        }
        None => {
            let dest = resolve("export_host", &settings.export_host, settings.export_port)?;
            let socket = UdpSocket::bind(("0.0.0.0", 0))
                .context("export: cannot open a UDP socket")?;
            for payload in &payloads {
                socket
                    .send_to(payload, dest)
                    .with_context(|| format!("export: send to {dest} failed"))?;
            }
        }
    }

    eprintln!(
        "{}",
        serde_json::json!({
            "records": flows.records.len(),
            "datagrams": payloads.len(),
            "bytes": bytes,
        })
    );
    Ok(())
}
