//! Subcommand implementations. Each module owns its clap `Args` struct and
//! a `run(args, settings)` entry point.

pub mod bench;
pub mod classify;
pub mod collect;
pub mod compile;
pub mod export;
pub mod gen;
pub mod run;

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;

use anyhow::Context;

use crate::config::{Settings, KNOWN_KEYS};
use crate::CliError;

/// Per-invocation overrides for the config keys, shared by every
/// subcommand: `--index-bits 16` beats both the config file and the
/// default. Values are kept as text so `Settings::apply` stays the single
/// parser and error source.
#[derive(Debug, Default, clap::Args)]
#[command(next_help_heading = "Config key overrides")]
pub struct Overrides {
    /// Override the index_bits key.
    #[arg(long, value_name = "N")]
    index_bits: Option<String>,
    /// Override the feature_mask key (7, 12, 22, or field names).
    #[arg(long, value_name = "MASK")]
    feature_mask: Option<String>,
    /// Override the idle_timeout_s key.
    #[arg(long, value_name = "SECS")]
    idle_timeout_s: Option<String>,
    /// Override the active_timeout_s key.
    #[arg(long, value_name = "SECS")]
    active_timeout_s: Option<String>,
    /// Override the template_id key.
    #[arg(long, value_name = "ID")]
    template_id: Option<String>,
    /// Override the source_id key.
    #[arg(long, value_name = "ID")]
    source_id: Option<String>,
    /// Override the export_host key.
    #[arg(long, value_name = "HOST")]
    export_host: Option<String>,
    /// Override the export_port key.
    #[arg(long, value_name = "PORT")]
    export_port: Option<String>,
    /// Override the seed key.
    #[arg(long, value_name = "SEED")]
    seed: Option<String>,
    /// Override the flows key.
    #[arg(long, value_name = "N")]
    flows: Option<String>,
    /// Override the packets_per_flow key.
    #[arg(long, value_name = "N")]
    packets_per_flow: Option<String>,
    /// Override the packet_size key.
    #[arg(long, value_name = "BYTES")]
    packet_size: Option<String>,
    /// Override the tcp_percent key.
    #[arg(long, value_name = "PCT")]
    tcp_percent: Option<String>,
    /// Override the offered_pps key (0 = flat out).
    #[arg(long, value_name = "PPS")]
    offered_pps: Option<String>,
    /// Override the repetitions key.
    #[arg(long, value_name = "N")]
    repetitions: Option<String>,
    /// Override the workers key.
    #[arg(long, value_name = "N")]
    workers: Option<String>,
}

impl Overrides {
    /// Fold the given flags into `settings`. Errors name the flag.
    pub fn apply(&self, settings: &mut Settings) -> Result<(), CliError> {
        let values = [
            &self.index_bits,
            &self.feature_mask,
            &self.idle_timeout_s,
            &self.active_timeout_s,
            &self.template_id,
            &self.source_id,
            &self.export_host,
            &self.export_port,
            &self.seed,
            &self.flows,
            &self.packets_per_flow,
            &self.packet_size,
            &self.tcp_percent,
            &self.offered_pps,
            &self.repetitions,
            &self.workers,
        ];
        debug_assert_eq!(values.len(), KNOWN_KEYS.len());
        for ((key, _, _), value) in KNOWN_KEYS.iter().zip(values) {
            if let Some(v) = value {
                settings.apply(key, v).map_err(|msg| {
                    CliError::Usage(format!("--{}: {msg}", key.replace('_', "-")))
                })?;
            }
        }
        Ok(())
    }

    pub fn sets_feature_mask(&self) -> bool {
        self.feature_mask.is_some()
    }
}

/// Read a whole file, attributing failures to the flag that named it.
pub(crate) fn read_named(flag: &str, path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .with_context(|| format!("{flag} {}: cannot read", path.display()))
        .map_err(CliError::Runtime)
}

/// Write `text` to `out`, or stdout when no path was given.
pub(crate) fn write_out(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("--out {}: cannot write", path.display()))
            .map_err(CliError::Runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Resolve host:port to the first socket address it names.
pub(crate) fn resolve(flag: &str, host: &str, port: u16) -> Result<SocketAddr, CliError> {
    (host, port)
        .to_socket_addrs()
        .ok()
        .and_then(|mut addrs| addrs.next())
        .ok_or_else(|| CliError::Usage(format!("{flag}: cannot resolve {host}:{port}")))
}

/// Load and validate a dtm-1 model file.
pub(crate) fn load_model_file(
    path: &Path,
) -> Result<flowforge_core::nids::DecisionTreeModel, CliError> {
    let text = read_named("--model", path)?;
    flowforge_core::nids::load_model(&text).map_err(|e| {
        CliError::Runtime(anyhow::anyhow!("--model {}: {e}", path.display()))
    })
}
