//! The flow feature catalog: 22 NetFlow-style fields with fixed integer
//! widths, stable ordering, NetFlow v9 field type ids, and the register
//! names used by the P4 emitter.
//!
//! Everything downstream (flow table updates, CSV headers, v9 templates,
//! generated P4) is keyed off this table, so the ordering here is part of
//! the wire/file contracts and must not change.

use std::fmt;

use thiserror::Error;

/// Number of fields in the catalog.
pub const FEATURE_COUNT: usize = 22;

/// Identifier for one catalog field. Discriminants are catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FeatureId {
    Ipv4SrcAddr = 0,
    Ipv4DstAddr = 1,
    L4SrcPort = 2,
    L4DstPort = 3,
    Protocol = 4,
    InPkts = 5,
    OutPkts = 6,
    InBytes = 7,
    OutBytes = 8,
    FlowDurationMs = 9,
    TcpFlags = 10,
    MinTtl = 11,
    MaxTtl = 12,
    MinIpPktLen = 13,
    MaxIpPktLen = 14,
    TcpWinMaxIn = 15,
    TcpWinMaxOut = 16,
    NumPktsUpTo128 = 17,
    NumPkts128To256 = 18,
    NumPkts256To512 = 19,
    NumPkts512To1024 = 20,
    NumPkts1024To1514 = 21,
}

/// Static metadata for one catalog field.
pub struct FeatureInfo {
    pub id: FeatureId,
    /// Canonical field name, used in CSV headers, model files and P4 output.
    pub name: &'static str,
    /// Register width in bits: 8, 16, 32 or 64.
    pub bits: u8,
    /// NetFlow v9 field type id. Standard ids where one exists; fields with
    /// no standard id use the 40001+ range declared in the README.
    pub v9_type: u16,
    /// Register name used by the P4 emitter.
    pub register: &'static str,
}

/// The catalog, in canonical order.
pub const CATALOG: [FeatureInfo; FEATURE_COUNT] = [
    FeatureInfo { id: FeatureId::Ipv4SrcAddr, name: "IPV4_SRC_ADDR", bits: 32, v9_type: 8, register: "srcip_register" },
    FeatureInfo { id: FeatureId::Ipv4DstAddr, name: "IPV4_DST_ADDR", bits: 32, v9_type: 12, register: "dstip_register" },
    FeatureInfo { id: FeatureId::L4SrcPort, name: "L4_SRC_PORT", bits: 16, v9_type: 7, register: "srcport_register" },
    FeatureInfo { id: FeatureId::L4DstPort, name: "L4_DST_PORT", bits: 16, v9_type: 11, register: "dstport_register" },
    FeatureInfo { id: FeatureId::Protocol, name: "PROTOCOL", bits: 8, v9_type: 4, register: "protocol_register" },
    FeatureInfo { id: FeatureId::InPkts, name: "IN_PKTS", bits: 32, v9_type: 2, register: "received_packet_counter" },
    FeatureInfo { id: FeatureId::OutPkts, name: "OUT_PKTS", bits: 32, v9_type: 24, register: "transmitted_packet_counter" },
    FeatureInfo { id: FeatureId::InBytes, name: "IN_BYTES", bits: 64, v9_type: 1, register: "received_byte_counter" },
    FeatureInfo { id: FeatureId::OutBytes, name: "OUT_BYTES", bits: 64, v9_type: 23, register: "transmitted_byte_counter" },
    FeatureInfo { id: FeatureId::FlowDurationMs, name: "FLOW_DURATION_MS", bits: 32, v9_type: 40001, register: "flow_duration_register" },
    FeatureInfo { id: FeatureId::TcpFlags, name: "TCP_FLAGS", bits: 8, v9_type: 6, register: "tcpflags_register" },
    FeatureInfo { id: FeatureId::MinTtl, name: "MIN_TTL", bits: 8, v9_type: 52, register: "minttl_register" },
    FeatureInfo { id: FeatureId::MaxTtl, name: "MAX_TTL", bits: 8, v9_type: 53, register: "maxttl_register" },
    FeatureInfo { id: FeatureId::MinIpPktLen, name: "MIN_IP_PKT_LEN", bits: 16, v9_type: 25, register: "minpktlen_register" },
    FeatureInfo { id: FeatureId::MaxIpPktLen, name: "MAX_IP_PKT_LEN", bits: 16, v9_type: 26, register: "maxpktlen_register" },
    FeatureInfo { id: FeatureId::TcpWinMaxIn, name: "TCP_WIN_MAX_IN", bits: 16, v9_type: 40002, register: "tcpwinmaxin_register" },
    FeatureInfo { id: FeatureId::TcpWinMaxOut, name: "TCP_WIN_MAX_OUT", bits: 16, v9_type: 40003, register: "tcpwinmaxout_register" },
    FeatureInfo { id: FeatureId::NumPktsUpTo128, name: "NUM_PKTS_UP_TO_128_BYTES", bits: 32, v9_type: 40004, register: "pktsize_bucket1_register" },
    FeatureInfo { id: FeatureId::NumPkts128To256, name: "NUM_PKTS_128_TO_256_BYTES", bits: 32, v9_type: 40005, register: "pktsize_bucket2_register" },
    FeatureInfo { id: FeatureId::NumPkts256To512, name: "NUM_PKTS_256_TO_512_BYTES", bits: 32, v9_type: 40006, register: "pktsize_bucket3_register" },
    FeatureInfo { id: FeatureId::NumPkts512To1024, name: "NUM_PKTS_512_TO_1024_BYTES", bits: 32, v9_type: 40007, register: "pktsize_bucket4_register" },
    FeatureInfo { id: FeatureId::NumPkts1024To1514, name: "NUM_PKTS_1024_TO_1514_BYTES", bits: 32, v9_type: 40008, register: "pktsize_bucket5_register" },
];

impl FeatureId {
    /// All features in catalog order.
    pub fn all() -> impl Iterator<Item = FeatureId> {
        CATALOG.iter().map(|f| f.id)
    }

    pub fn from_index(idx: usize) -> Option<FeatureId> {
        CATALOG.get(idx).map(|f| f.id)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn info(self) -> &'static FeatureInfo {
        &CATALOG[self as usize]
    }

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn bits(self) -> u8 {
        self.info().bits
    }

    /// Width in bytes on the v9 wire.
    pub fn byte_width(self) -> usize {
        usize::from(self.bits() / 8)
    }

    /// Largest value representable at this field's width.
    pub fn max_value(self) -> u64 {
        match self.bits() {
            64 => u64::MAX,
            bits => (1u64 << bits) - 1,
        }
    }

    pub fn v9_type(self) -> u16 {
        self.info().v9_type
    }

    pub fn register(self) -> &'static str {
        self.info().register
    }

    /// Look up a feature by its canonical name.
    pub fn from_name(name: &str) -> Option<FeatureId> {
        CATALOG.iter().find(|f| f.name == name).map(|f| f.id)
    }

    /// Look up a feature by its v9 field type id.
    pub fn from_v9_type(v9_type: u16) -> Option<FeatureId> {
        CATALOG.iter().find(|f| f.v9_type == v9_type).map(|f| f.id)
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("unknown feature name {0:?} in feature mask")]
    UnknownFeature(String),
    #[error("empty feature mask")]
    Empty,
}

/// A subset of the catalog: which fields are maintained and exported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureMask(u32);

impl FeatureMask {
    const FULL_BITS: u32 = (1 << FEATURE_COUNT as u32) - 1;

    /// All 22 fields.
    pub const ALL: FeatureMask = FeatureMask(Self::FULL_BITS);

    /// The seven fields visible in the hand-written decision-tree pipeline:
    /// the four declared locals plus the three fields appearing only in
    /// conditions.
    pub const PRESET_7: FeatureMask = FeatureMask(
        1 << FeatureId::L4SrcPort as u32
            | 1 << FeatureId::L4DstPort as u32
            | 1 << FeatureId::InPkts as u32
            | 1 << FeatureId::MinTtl as u32
            | 1 << FeatureId::MinIpPktLen as u32
            | 1 << FeatureId::TcpWinMaxOut as u32
            | 1 << FeatureId::NumPkts1024To1514 as u32,
    );

    /// The first twelve catalog fields: 5-tuple, packet/byte counters,
    /// duration, TCP flags and MIN_TTL.
    pub const PRESET_12: FeatureMask = FeatureMask((1 << 12) - 1);

    pub const fn empty() -> FeatureMask {
        FeatureMask(0)
    }

    pub fn contains(self, f: FeatureId) -> bool {
        self.0 & (1 << f as u32) != 0
    }

    pub fn insert(&mut self, f: FeatureId) {
        self.0 |= 1 << f as u32;
    }

    pub fn union(self, other: FeatureMask) -> FeatureMask {
        FeatureMask(self.0 | other.0)
    }

    /// True when every bit of `other` is also set in `self`.
    pub fn is_superset_of(self, other: FeatureMask) -> bool {
        self.0 & other.0 == other.0
    }

    /// Number of enabled fields.
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Enabled features in catalog order.
    pub fn iter(self) -> impl Iterator<Item = FeatureId> {
        FeatureId::all().filter(move |f| self.contains(*f))
    }

    /// Sum of enabled field byte widths: the v9 data record size.
    pub fn record_byte_width(self) -> usize {
        self.iter().map(|f| f.byte_width()).sum()
    }

    /// Parse a mask: a preset name ("7", "12", "22") or a comma-separated
    /// list of catalog field names.
    pub fn parse(s: &str) -> Result<FeatureMask, MaskError> {
        match s.trim() {
            "7" => return Ok(Self::PRESET_7),
            "12" => return Ok(Self::PRESET_12),
            "22" => return Ok(Self::ALL),
            "" => return Err(MaskError::Empty),
            _ => {}
        }
        let mut mask = FeatureMask::empty();
        for part in s.split(',') {
            let name = part.trim();
            if name.is_empty() {
                continue;
            }
            match FeatureId::from_name(name) {
                Some(f) => mask.insert(f),
                None => return Err(MaskError::UnknownFeature(name.to_string())),
            }
        }
        if mask.is_empty() {
            return Err(MaskError::Empty);
        }
        Ok(mask)
    }

    /// Short display form: the preset name when the mask matches one,
    /// otherwise the raw bits in hex.
    pub fn display_name(self) -> String {
        if self == Self::ALL {
            "22".to_string()
        } else if self == Self::PRESET_12 {
            "12".to_string()
        } else if self == Self::PRESET_7 {
            "7".to_string()
        } else {
            format!("0x{:06x}", self.0)
        }
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_consistent() {
        assert_eq!(CATALOG.len(), FEATURE_COUNT);
        for (idx, info) in CATALOG.iter().enumerate() {
            assert_eq!(info.id as usize, idx, "{} out of order", info.name);
            assert!(matches!(info.bits, 8 | 16 | 32 | 64));
            assert_eq!(FeatureId::from_name(info.name), Some(info.id));
            assert_eq!(FeatureId::from_v9_type(info.v9_type), Some(info.id));
        }
    }

    #[test]
    fn v9_type_ids_unique() {
        for a in &CATALOG {
            for b in &CATALOG {
                if a.id != b.id {
                    assert_ne!(a.v9_type, b.v9_type);
                }
            }
        }
    }

    #[test]
    fn preset_sizes() {
        assert_eq!(FeatureMask::PRESET_7.len(), 7);
        assert_eq!(FeatureMask::PRESET_12.len(), 12);
        assert_eq!(FeatureMask::ALL.len(), 22);
        assert!(FeatureMask::ALL.is_superset_of(FeatureMask::PRESET_12));
        assert!(FeatureMask::ALL.is_superset_of(FeatureMask::PRESET_7));
    }

    #[test]
    fn full_record_width_is_72_bytes() {
        assert_eq!(FeatureMask::ALL.record_byte_width(), 72);
    }

    #[test]
    fn parse_presets_and_lists() {
        assert_eq!(FeatureMask::parse("22").unwrap(), FeatureMask::ALL);
        assert_eq!(FeatureMask::parse("7").unwrap(), FeatureMask::PRESET_7);
        assert_eq!(FeatureMask::parse("12").unwrap(), FeatureMask::PRESET_12);
        let m = FeatureMask::parse("IN_PKTS,MIN_TTL").unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.contains(FeatureId::InPkts));
        assert!(m.contains(FeatureId::MinTtl));
        assert_eq!(
            FeatureMask::parse("IN_PKTS,FOO"),
            Err(MaskError::UnknownFeature("FOO".to_string()))
        );
        assert_eq!(FeatureMask::parse(""), Err(MaskError::Empty));
    }

    #[test]
    fn display_names() {
        assert_eq!(FeatureMask::ALL.display_name(), "22");
        assert_eq!(FeatureMask::parse("IN_PKTS").unwrap().display_name(), "0x000020");
    }
}
