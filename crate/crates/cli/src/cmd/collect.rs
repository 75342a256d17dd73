//! `flowforge collect`: UDP NetFlow v9 listener decoding back to CSV.

use std::io::Write;
use std::net::{ToSocketAddrs, UdpSocket};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use flowforge_core::export::Collector;
use flowforge_core::export::to_csv;
use flowforge_core::flowtable::FlowRecord;

use crate::config::Settings;
use crate::CliError;

use super::{write_out, Overrides};

#[derive(Debug, clap::Args)]
pub struct CollectArgs {
    /// Bind address as host:port; port 0 picks a free one. Defaults to
    /// export_host:export_port.
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<String>,
    /// Write the decoded CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Stop after receiving this many datagrams.
    #[arg(long, value_name = "N")]
    pub max_datagrams: Option<u64>,
    /// Stop after this much quiet time.
    #[arg(long, value_name = "MS", default_value_t = 2000)]
    pub idle_timeout_ms: u64,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run(args: &CollectArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let bind = args
        .listen
        .clone()
        .unwrap_or_else(|| format!("{}:{}", settings.export_host, settings.export_port));
    let addr = bind
        .to_socket_addrs()
        .ok()
        .and_then(|mut addrs| addrs.next())
        .ok_or_else(|| CliError::Usage(format!("--listen: cannot resolve {bind:?}")))?;
    let socket =
        UdpSocket::bind(addr).with_context(|| format!("--listen: cannot bind {addr}"))?;
    let local = socket.local_addr().context("--listen: no local address")?;

    // Announce the bound address first so a co-process can start sending.
    println!("{}", serde_json::json!({ "listening": local.to_string() }));
    std::io::stdout().flush().ok();

    socket
        .set_read_timeout(Some(Duration::from_millis(args.idle_timeout_ms.max(1))))
        .context("--idle-timeout-ms: cannot arm the socket timeout")?;

    let mut collector = Collector::new();
    let mut records: Vec<FlowRecord> = Vec::new();
    let mut bad_datagrams = 0u64;
    let mut buf = vec![0u8; 65535];
    loop {
        if let Some(max) = args.max_datagrams {
            if collector.datagrams_in() >= max {
                break;
            }
        }
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => match collector.feed(&buf[..n]) {
                Ok(mut decoded) => records.append(&mut decoded),
                Err(_) => bad_datagrams += 1,
            },
            Err(e)
                if matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                ) =>
            {
                break;
            }
            Err(e) => return Err(CliError::Runtime(anyhow::anyhow!("receive failed: {e}"))),
        }
    }

    // Render with the columns the templates actually described; fall back
    // to the configured mask when nothing arrived.
    let mask = if collector.observed_mask().is_empty() {
        settings.feature_mask
    } else {
        collector.observed_mask()
    };
    write_out(args.out.as_deref(), &to_csv(&records, mask))?;

    eprintln!(
        "{}",
        serde_json::json!({
            "datagrams": collector.datagrams_in(),
            "records": records.len(),
            "bad_datagrams": bad_datagrams,
            "dropped": collector.dropped(),
            "pending": collector.pending(),
        })
    );
    Ok(())
}
