//! Flow-record export: CSV text, NetFlow v9 datagrams, and the collector
//! that decodes v9 back into records.

mod collector;
mod csv;
mod v9;

pub use collector::Collector;
pub use csv::{read_records_csv, render_csv, to_csv, CsvError, CsvFlows};
pub use v9::{
    decode_v9, encode_v9, DecodeError, DecodeOutcome, EncodeError, ExporterState, TemplateCache,
    MAX_DATAGRAM_BYTES, MIN_TEMPLATE_ID, TEMPLATE_REFRESH_DATAGRAMS, TEMPLATE_REFRESH_SECS,
};
