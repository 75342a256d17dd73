//! Flat key=value configuration shared by every subcommand.
//!
//! Precedence: command-line flags > config file > built-in defaults.
//! Unknown keys in a config file are rejected, never ignored.

use std::path::Path;

use flowforge_core::catalog::FeatureMask;

use crate::CliError;

/// Every configuration key, its default, and a one-line description.
/// `--help` renders this table; `Settings::apply` accepts exactly these.
pub const KNOWN_KEYS: &[(&str, &str, &str)] = &[
    ("index_bits", "20", "flow table size as log2 of slot count (8..=24)"),
    ("feature_mask", "22", "feature set: 7, 12, 22, or comma-separated names"),
    ("idle_timeout_s", "30", "export a flow after this much quiet time"),
    ("active_timeout_s", "120", "export a long-lived flow after this lifetime"),
    ("template_id", "256", "NetFlow v9 template id (>= 256)"),
    ("source_id", "0", "NetFlow v9 observation domain id"),
    ("export_host", "127.0.0.1", "default UDP host for export/collect"),
    ("export_port", "2055", "default UDP port for export/collect"),
    ("seed", "0", "RNG seed for synthetic traffic and benchmarks"),
    ("flows", "1000", "synthetic traffic: concurrent flows"),
    ("packets_per_flow", "10", "synthetic traffic: packets per flow"),
    ("packet_size", "64", "synthetic traffic: frame size in bytes (64..=1514)"),
    ("tcp_percent", "80", "synthetic traffic: share of TCP flows (0..=100)"),
    ("offered_pps", "0", "benchmark pacing target in packets/s (0 = flat out)"),
    ("repetitions", "5", "benchmark repetitions per scenario"),
    ("workers", "1", "benchmark worker threads (>1 shards by flow id)"),
];

#[derive(Debug, Clone)]
pub struct Settings {
    pub index_bits: u8,
    pub feature_mask: FeatureMask,
    pub idle_timeout_s: u64,
    pub active_timeout_s: u64,
    pub template_id: u16,
    pub source_id: u32,
    pub export_host: String,
    pub export_port: u16,
    pub seed: u64,
    pub flows: u32,
    pub packets_per_flow: u32,
    pub packet_size: u16,
    pub tcp_percent: u8,
    pub offered_pps: u64,
    pub repetitions: u32,
    pub workers: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            index_bits: 20,
            feature_mask: FeatureMask::ALL,
            idle_timeout_s: 30,
            active_timeout_s: 120,
            template_id: 256,
            source_id: 0,
            export_host: "127.0.0.1".to_string(),
            export_port: 2055,
            seed: 0,
            flows: 1000,
            packets_per_flow: 10,
            packet_size: 64,
            tcp_percent: 80,
            offered_pps: 0,
            repetitions: 5,
            workers: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

impl Settings {
    /// Set one key from its textual value. Errors name the key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "index_bits" => self.index_bits = parse(key, value)?,
            "feature_mask" => {
                self.feature_mask = FeatureMask::parse(value.trim())
                    .map_err(|e| format!("feature_mask: {e}"))?;
            }
            "idle_timeout_s" => self.idle_timeout_s = parse(key, value)?,
            "active_timeout_s" => self.active_timeout_s = parse(key, value)?,
            "template_id" => self.template_id = parse(key, value)?,
            "source_id" => self.source_id = parse(key, value)?,
            "export_host" => self.export_host = value.trim().to_string(),
            "export_port" => self.export_port = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "flows" => self.flows = parse(key, value)?,
            "packets_per_flow" => self.packets_per_flow = parse(key, value)?,
            "packet_size" => self.packet_size = parse(key, value)?,
            "tcp_percent" => self.tcp_percent = parse(key, value)?,
            "offered_pps" => self.offered_pps = parse(key, value)?,
            "repetitions" => self.repetitions = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Merge a key=value file. Blank lines and `#` comments are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("--config {}: {e}", path.display()))
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "--config {}: line {} is not key=value: {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            self.apply(key.trim(), value).map_err(|msg| {
                CliError::Usage(format!(
                    "--config {}: line {}: {msg}",
                    path.display(),
                    lineno + 1
                ))
            })?;
        }
        Ok(())
    }

    /// The benchmark configuration view of these settings.
    pub fn bench_config(&self) -> flowforge_core::bench::BenchConfig {
        flowforge_core::bench::BenchConfig {
            index_bits: self.index_bits,
            mask: self.feature_mask,
            offered_pps: if self.offered_pps == 0 { None } else { Some(self.offered_pps) },
            workers: self.workers.max(1),
        }
    }

    /// The synthetic traffic view of these settings.
    pub fn traffic_spec(&self) -> flowforge_core::bench::traffic::SyntheticSpec {
        flowforge_core::bench::traffic::SyntheticSpec {
            flows: self.flows,
            packets_per_flow: self.packets_per_flow,
            packet_size: self.packet_size,
            tcp_percent: self.tcp_percent,
            seed: self.seed,
        }
    }
}

/// Render the key table for `--help`.
pub fn keys_help() -> String {
    let mut out = String::from(
        "Configuration keys (flags > --config file > defaults):\n",
    );
    for (key, default, desc) in KNOWN_KEYS {
        out.push_str(&format!("  {key:<17} {desc} [default: {default}]\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_table() {
        let mut from_table = Settings::default();
        // Applying every documented default must be accepted and reproduce
        // the defaults themselves.
        for (key, default, _) in KNOWN_KEYS {
            from_table.apply(key, default).unwrap();
        }
        let d = Settings::default();
        assert_eq!(from_table.index_bits, d.index_bits);
        assert_eq!(from_table.feature_mask, d.feature_mask);
        assert_eq!(from_table.export_host, d.export_host);
        assert_eq!(from_table.repetitions, d.repetitions);
        assert_eq!(from_table.workers, d.workers);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut s = Settings::default();
        let err = s.apply("index_bitz", "12").unwrap_err();
        assert!(err.contains("index_bitz"), "{err}");
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut s = Settings::default();
        let err = s.apply("export_port", "http").unwrap_err();
        assert!(err.contains("export_port"), "{err}");
        let err = s.apply("feature_mask", "NOT_A_FIELD").unwrap_err();
        assert!(err.contains("feature_mask"), "{err}");
    }

    #[test]
    fn mask_presets_parse() {
        let mut s = Settings::default();
        s.apply("feature_mask", "7").unwrap();
        assert_eq!(s.feature_mask.len(), 7);
        s.apply("feature_mask", "IN_PKTS,OUT_PKTS").unwrap();
        assert_eq!(s.feature_mask.len(), 2);
    }
}
