//! `flowforge gen`: synthetic pcap generation.

use std::path::PathBuf;

use anyhow::anyhow;
use flowforge_core::bench::traffic::generate_traffic;
use flowforge_core::pcap::write_pcap;

use crate::config::Settings;
use crate::CliError;

use super::Overrides;

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    /// Output pcap path.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run(args: &GenArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let spec = settings.traffic_spec();
    let stream = generate_traffic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write_pcap(&args.out, &stream)
        .map_err(|e| anyhow!("--out {}: {e}", args.out.display()))?;
    eprintln!(
        "{}",
        serde_json::json!({
            "frames": stream.len(),
            "bytes": stream.total_bytes(),
            "flows": spec.flows,
            "packets_per_flow": spec.packets_per_flow,
            "seed": spec.seed,
        })
    );
    Ok(())
}
