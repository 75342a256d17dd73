//! NetFlow v9 wire encoding and decoding.
//!
//! Layout: a 20-byte message header, then FlowSets. FlowSet id 0 carries
//! templates; ids >= 256 carry data records described by a previously seen
//! template. All integers are big-endian; every FlowSet is zero-padded to
//! a multiple of 4 bytes; the header count field totals template plus data
//! records.

use std::collections::HashMap;

use thiserror::Error;

use crate::catalog::{FeatureId, FeatureMask};
use crate::flowtable::FlowRecord;

/// Payload ceiling per datagram: 1500-byte MTU minus IP and UDP headers.
pub const MAX_DATAGRAM_BYTES: usize = 1464;
/// Data FlowSet ids start here; lower ids are reserved for templates.
pub const MIN_TEMPLATE_ID: u16 = 256;
/// The template is re-sent after this many datagrams.
pub const TEMPLATE_REFRESH_DATAGRAMS: u32 = 20;
/// The template is re-sent after this many seconds.
pub const TEMPLATE_REFRESH_SECS: u32 = 600;

const HEADER_BYTES: usize = 20;
const VERSION: u16 = 9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("template id {0} is below the minimum {MIN_TEMPLATE_ID}")]
    TemplateIdReserved(u16),
    #[error("one record of {record} bytes exceeds the {budget}-byte datagram budget")]
    RecordTooLarge { record: usize, budget: usize },
    #[error("feature mask is empty")]
    EmptyMask,
}

/// Exporter-session state: sequence numbers and template refresh tracking.
/// The clock fields are plain data set by the caller, keeping encoding
/// deterministic and testable.
#[derive(Debug, Clone)]
pub struct ExporterState {
    pub source_id: u32,
    pub sys_uptime_ms: u32,
    pub unix_secs: u32,
    sequence: u32,
    datagrams_since_template: u32,
    template_sent_at_secs: Option<u32>,
}

impl ExporterState {
    pub fn new(source_id: u32) -> ExporterState {
        ExporterState {
            source_id,
            sys_uptime_ms: 0,
            unix_secs: 0,
            sequence: 0,
            datagrams_since_template: 0,
            template_sent_at_secs: None,
        }
    }

    pub fn sequence(&self) -> u32 {
        self.sequence
    }

    /// True when the next datagram must carry the template FlowSet.
    fn template_due(&self) -> bool {
        match self.template_sent_at_secs {
            None => true,
            Some(sent_at) => {
                self.datagrams_since_template >= TEMPLATE_REFRESH_DATAGRAMS
                    || self.unix_secs.saturating_sub(sent_at) >= TEMPLATE_REFRESH_SECS
            }
        }
    }
}

fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn push_feature(buf: &mut Vec<u8>, rec: &FlowRecord, f: FeatureId) {
    let v = rec.feature(f);
    match f.byte_width() {
        1 => buf.push(v as u8),
        2 => push_u16(buf, v as u16),
        4 => push_u32(buf, v as u32),
        _ => buf.extend_from_slice(&v.to_be_bytes()),
    }
}

fn template_flowset(mask: FeatureMask, template_id: u16) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + mask.len() * 4);
    push_u16(&mut buf, 0); // FlowSet id 0: template
    push_u16(&mut buf, (8 + mask.len() * 4) as u16);
    push_u16(&mut buf, template_id);
    push_u16(&mut buf, mask.len() as u16);
    for f in mask.iter() {
        push_u16(&mut buf, f.v9_type());
        push_u16(&mut buf, f.byte_width() as u16);
    }
    buf
}

/// Encode records into one or more datagrams of at most
/// [`MAX_DATAGRAM_BYTES`]. The template FlowSet rides in the first datagram
/// whenever the refresh policy says it is due (always on a fresh state);
/// an empty record list produces a single template-only datagram. Records
/// are never split across datagrams; the sequence number increments once
/// per datagram.
pub fn encode_v9(
    records: &[FlowRecord],
    mask: FeatureMask,
    template_id: u16,
    state: &mut ExporterState,
) -> Result<Vec<Vec<u8>>, EncodeError> {
    if template_id < MIN_TEMPLATE_ID {
        return Err(EncodeError::TemplateIdReserved(template_id));
    }
    if mask.is_empty() {
        return Err(EncodeError::EmptyMask);
    }
    let record_bytes = mask.record_byte_width();
    // Worst-case budget: a datagram that also carries the template.
    let template = template_flowset(mask, template_id);
    let tight_budget = MAX_DATAGRAM_BYTES - HEADER_BYTES - template.len() - 4;
    if record_bytes > tight_budget {
        return Err(EncodeError::RecordTooLarge { record: record_bytes, budget: tight_budget });
    }

    let mut datagrams = Vec::new();
    let mut remaining = records;
    let mut send_template = state.template_due() || records.is_empty();
    loop {
        let mut body_budget = MAX_DATAGRAM_BYTES - HEADER_BYTES;
        let mut count: u16 = 0;
        let mut body = Vec::new();
        if send_template {
            body.extend_from_slice(&template);
            body_budget -= template.len();
            count += 1;
            state.datagrams_since_template = 0;
            state.template_sent_at_secs = Some(state.unix_secs);
        }
        if !remaining.is_empty() {
            let fit = (body_budget - 4) / record_bytes;
            let take = fit.min(remaining.len());
            let chunk = &remaining[..take];
            remaining = &remaining[take..];

            let data_len = 4 + take * record_bytes;
            let padded_len = (data_len + 3) & !3;
            push_u16(&mut body, template_id);
            push_u16(&mut body, padded_len as u16);
            for rec in chunk {
                for f in mask.iter() {
                    push_feature(&mut body, rec, f);
                }
            }
            body.resize(body.len() + (padded_len - data_len), 0);
            count += take as u16;
        }

        let mut datagram = Vec::with_capacity(HEADER_BYTES + body.len());
        push_u16(&mut datagram, VERSION);
        push_u16(&mut datagram, count);
        push_u32(&mut datagram, state.sys_uptime_ms);
        push_u32(&mut datagram, state.unix_secs);
        push_u32(&mut datagram, state.sequence);
        push_u32(&mut datagram, state.source_id);
        datagram.extend_from_slice(&body);
        debug_assert!(datagram.len() <= MAX_DATAGRAM_BYTES);
        datagrams.push(datagram);

        state.sequence = state.sequence.wrapping_add(1);
        state.datagrams_since_template += 1;
        send_template = false;
        if remaining.is_empty() {
            break;
        }
    }
    Ok(datagrams)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unsupported NetFlow version {0}")]
    BadVersion(u16),
    #[error("truncated flowset: {0}")]
    TruncatedFlowSet(&'static str),
    #[error("malformed template: {0}")]
    BadTemplate(&'static str),
    #[error("header declares {declared} records, datagram carries {found}")]
    CountMismatch { declared: u16, found: usize },
}

/// Templates seen so far, keyed by (source_id, template_id). Each template
/// is the ordered (field type, field length) list from the wire.
#[derive(Debug, Default, Clone)]
pub struct TemplateCache {
    templates: HashMap<(u32, u16), Vec<(u16, u16)>>,
}

impl TemplateCache {
    pub fn new() -> TemplateCache {
        TemplateCache::default()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, source_id: u32, template_id: u16) -> Option<&Vec<(u16, u16)>> {
        self.templates.get(&(source_id, template_id))
    }

    /// Union of the catalog features named by every cached template. Field
    /// types the catalog does not know are skipped.
    pub fn observed_mask(&self) -> FeatureMask {
        let mut mask = FeatureMask::empty();
        for fields in self.templates.values() {
            for &(field_type, _) in fields {
                if let Some(feature) = FeatureId::from_v9_type(field_type) {
                    mask.insert(feature);
                }
            }
        }
        mask
    }
}

/// Result of decoding one datagram.
#[derive(Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded {
        records: Vec<FlowRecord>,
        templates_added: usize,
    },
    /// A data FlowSet referenced a template the cache does not hold; the
    /// caller should retain the datagram and retry after the next template
    /// arrives. Any templates in the datagram were still cached.
    NeedTemplate { template_id: u16 },
}

fn read_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([buf[at], buf[at + 1]])
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn decode_record(payload: &[u8], template: &[(u16, u16)]) -> FlowRecord {
    let mut rec = FlowRecord::blank();
    let mut at = 0;
    for &(field_type, field_len) in template {
        let field_len = field_len as usize;
        let cell = &payload[at..at + field_len];
        at += field_len;
        let feature = match FeatureId::from_v9_type(field_type) {
            Some(f) => f,
            // Unknown field type: skip; lets the collector walk foreign
            // templates without losing the fields it does understand.
            None => continue,
        };
        let mut v = 0u64;
        for &b in cell.iter().take(8) {
            v = (v << 8) | u64::from(b);
        }
        rec.set_feature(feature, v);
    }
    rec
}

/// Decode one datagram against (and updating) the template cache.
pub fn decode_v9(
    datagram: &[u8],
    cache: &mut TemplateCache,
) -> Result<DecodeOutcome, DecodeError> {
    if datagram.len() < HEADER_BYTES {
        return Err(DecodeError::TruncatedFlowSet("message header"));
    }
    let version = read_u16(datagram, 0);
    if version != VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let declared_count = read_u16(datagram, 2);
    let source_id = read_u32(datagram, 16);

    let mut records = Vec::new();
    let mut templates_added = 0usize;
    let mut template_records = 0usize;
    let mut missing_template: Option<u16> = None;
    let mut at = HEADER_BYTES;
    while at < datagram.len() {
        if datagram.len() - at < 4 {
            return Err(DecodeError::TruncatedFlowSet("flowset header"));
        }
        let flowset_id = read_u16(datagram, at);
        let flowset_len = read_u16(datagram, at + 2) as usize;
        if flowset_len < 4 {
            return Err(DecodeError::TruncatedFlowSet("flowset length below 4"));
        }
        if at + flowset_len > datagram.len() {
            return Err(DecodeError::TruncatedFlowSet("flowset exceeds datagram"));
        }
        let payload = &datagram[at + 4..at + flowset_len];
        at += flowset_len;

        if flowset_id == 0 {
            // Template FlowSet: one or more templates back to back.
            let mut t = 0;
            while t + 4 <= payload.len() {
                let template_id = read_u16(payload, t);
                let field_count = read_u16(payload, t + 2) as usize;
                t += 4;
                if template_id < MIN_TEMPLATE_ID {
                    return Err(DecodeError::BadTemplate("template id below 256"));
                }
                if field_count == 0 {
                    return Err(DecodeError::BadTemplate("zero fields"));
                }
                if t + field_count * 4 > payload.len() {
                    return Err(DecodeError::TruncatedFlowSet("template fields"));
                }
                let mut fields = Vec::with_capacity(field_count);
                for i in 0..field_count {
                    let field_type = read_u16(payload, t + i * 4);
                    let field_len = read_u16(payload, t + i * 4 + 2);
                    if field_len == 0 {
                        return Err(DecodeError::BadTemplate("zero-length field"));
                    }
                    fields.push((field_type, field_len));
                }
                t += field_count * 4;
                cache.templates.insert((source_id, template_id), fields);
                templates_added += 1;
                template_records += 1;
            }
            // Remaining 1-3 bytes are padding.
        } else if flowset_id >= MIN_TEMPLATE_ID {
            let Some(template) = cache.get(source_id, flowset_id) else {
                missing_template.get_or_insert(flowset_id);
                continue;
            };
            let record_len: usize = template.iter().map(|&(_, l)| l as usize).sum();
            let mut t = 0;
            while payload.len() - t >= record_len {
                records.push(decode_record(&payload[t..], template));
                t += record_len;
            }
            // Remainder smaller than one record is padding.
        }
        // FlowSet ids 1..=255 other than 0 are reserved (options templates
        // and future use); skip their payload.
    }

    if let Some(template_id) = missing_template {
        return Ok(DecodeOutcome::NeedTemplate { template_id });
    }
    let found = records.len() + template_records;
    if found != usize::from(declared_count) {
        return Err(DecodeError::CountMismatch { declared: declared_count, found });
    }
    Ok(DecodeOutcome::Decoded { records, templates_added })
}
