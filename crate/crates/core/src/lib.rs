//! flowforge-core: a software model of an in-switch flow monitor with an
//! inline decision-tree intrusion detector.
//!
//! The pipeline mirrors what a programmable data plane can afford: flows
//! live in a fixed-size direct-indexed table keyed by a CRC-32 hash of the
//! canonical 5-tuple, per-flow features are updated with integer-only
//! arithmetic, and a compiled decision tree classifies a flow from those
//! features using nothing but unsigned compares. Around that core sit a
//! NetFlow v9 exporter/collector pair, CSV views of the table, a synthetic
//! traffic generator, and a benchmark harness.
//!
//! Entry points:
//! - [`packet::parse_packet`] / [`packet::CanonicalKey`] — frame decoding
//!   and direction-independent flow keys.
//! - [`flowtable::FlowTable`] — the register-array flow table.
//! - [`nids::load_model`] / [`nids::compile_to_p4`] — decision-tree
//!   loading, classification, and P4 source emission.
//! - [`export`] — CSV and NetFlow v9 encode/decode plus a collector.
//! - [`bench`] — scenario runner, feature sweeps, report files.

pub mod bench;
pub mod catalog;
pub mod export;
pub mod flowtable;
pub mod metrics;
pub mod nids;
pub mod packet;
pub mod pcap;

#[cfg(any(test, feature = "testutil"))]
pub mod testutil;
