//! The NetFlow generator: a fixed-size table of flow records indexed by a
//! truncated CRC-32 of the canonical 5-tuple, updated per packet.
//!
//! The table mirrors a bank of fixed-width registers: one slot per flow id,
//! saturating arithmetic at each field's width, collisions resolved by
//! evicting the incumbent record (and counting it) rather than silently
//! conflating flows.

use thiserror::Error;

use crate::catalog::{FeatureId, FeatureMask};
use crate::packet::{CanonicalKey, ParsedPacket};

/// CRC-32 lookup table for the reflected IEEE 802.3 polynomial.
const CRC_TABLE: [u32; 256] = build_crc_table();

const fn build_crc_table() -> [u32; 256] {
    // 0xEDB88320 is the bit-reversed form of the 0x04C11DB7 polynomial.
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u32;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// CRC-32 (IEEE 802.3): reflected, init 0xFFFFFFFF, final XOR 0xFFFFFFFF.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc = (crc >> 8) ^ CRC_TABLE[((crc ^ u32::from(b)) & 0xFF) as usize];
    }
    !crc
}

pub const MIN_INDEX_BITS: u8 = 8;
pub const MAX_INDEX_BITS: u8 = 24;
pub const DEFAULT_INDEX_BITS: u8 = 20;
pub const DEFAULT_IDLE_TIMEOUT_S: u64 = 30;
pub const DEFAULT_ACTIVE_TIMEOUT_S: u64 = 120;

/// Table slot index for a canonical key: CRC-32 over the 13-byte key
/// serialization, masked to the low `index_bits`.
pub fn flow_id(key: &CanonicalKey, index_bits: u8) -> u32 {
    debug_assert!((MIN_INDEX_BITS..=MAX_INDEX_BITS).contains(&index_bits));
    crc32(&key.key_bytes()) & ((1u32 << index_bits) - 1)
}

/// One flow's accumulated state: the 22 catalog fields plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub key: CanonicalKey,
    /// True when the flow initiator is the `a` endpoint of the key.
    pub initiator_is_a: bool,
    /// Slot index this record occupies.
    pub slot: u32,
    pub first_ts: u64,
    pub last_ts: u64,
    pub malicious_flag: u8,

    // The catalog fields, initiator side = SRC.
    pub src_ip: u32,
    pub dst_ip: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    pub in_pkts: u32,
    pub out_pkts: u32,
    pub in_bytes: u64,
    pub out_bytes: u64,
    pub flow_duration_ms: u32,
    pub tcp_flags: u8,
    pub min_ttl: u8,
    pub max_ttl: u8,
    pub min_ip_pkt_len: u16,
    pub max_ip_pkt_len: u16,
    pub tcp_win_max_in: u16,
    pub tcp_win_max_out: u16,
    pub num_pkts_up_to_128: u32,
    pub num_pkts_128_to_256: u32,
    pub num_pkts_256_to_512: u32,
    pub num_pkts_512_to_1024: u32,
    pub num_pkts_1024_to_1514: u32,
}

impl FlowRecord {
    /// A zeroed record for the given key, ready for its first `apply`.
    /// Min-fields start at their width maximum so the first fold lands on
    /// the first packet's value.
    fn empty(key: CanonicalKey, initiator_is_a: bool, slot: u32, ts: u64) -> FlowRecord {
        let (src, dst) = if initiator_is_a { (key.a, key.b) } else { (key.b, key.a) };
        FlowRecord {
            key,
            initiator_is_a,
            slot,
            first_ts: ts,
            last_ts: ts,
            malicious_flag: 0,
            src_ip: src.ip,
            dst_ip: dst.ip,
            src_port: src.port,
            dst_port: dst.port,
            protocol: key.protocol,
            in_pkts: 0,
            out_pkts: 0,
            in_bytes: 0,
            out_bytes: 0,
            flow_duration_ms: 0,
            tcp_flags: 0,
            min_ttl: u8::MAX,
            max_ttl: 0,
            min_ip_pkt_len: u16::MAX,
            max_ip_pkt_len: 0,
            tcp_win_max_in: 0,
            tcp_win_max_out: 0,
            num_pkts_up_to_128: 0,
            num_pkts_128_to_256: 0,
            num_pkts_256_to_512: 0,
            num_pkts_512_to_1024: 0,
            num_pkts_1024_to_1514: 0,
        }
    }

    /// Fold one packet into the record. `is_in` is true for packets in the
    /// initiator -> responder direction. Only fields enabled in `mask` are
    /// maintained; all counters saturate at their width maximum.
    fn apply(&mut self, pkt: &ParsedPacket, is_in: bool, mask: FeatureMask) {
        self.last_ts = self.last_ts.max(pkt.ts_micros);
        self.first_ts = self.first_ts.min(pkt.ts_micros);
        let len = pkt.ip_total_len;
        if is_in {
            if mask.contains(FeatureId::InPkts) {
                self.in_pkts = self.in_pkts.saturating_add(1);
            }
            if mask.contains(FeatureId::InBytes) {
                self.in_bytes = self.in_bytes.saturating_add(u64::from(len));
            }
            if mask.contains(FeatureId::TcpWinMaxIn) {
                self.tcp_win_max_in = self.tcp_win_max_in.max(pkt.tcp_window);
            }
        } else {
            if mask.contains(FeatureId::OutPkts) {
                self.out_pkts = self.out_pkts.saturating_add(1);
            }
            if mask.contains(FeatureId::OutBytes) {
                self.out_bytes = self.out_bytes.saturating_add(u64::from(len));
            }
            if mask.contains(FeatureId::TcpWinMaxOut) {
                self.tcp_win_max_out = self.tcp_win_max_out.max(pkt.tcp_window);
            }
        }
        if mask.contains(FeatureId::FlowDurationMs) {
            let micros = self.last_ts - self.first_ts;
            self.flow_duration_ms = u32::try_from(micros / 1000).unwrap_or(u32::MAX);
        }
        if mask.contains(FeatureId::TcpFlags) {
            self.tcp_flags |= pkt.tcp_flags;
        }
        if mask.contains(FeatureId::MinTtl) {
            self.min_ttl = self.min_ttl.min(pkt.ttl);
        }
        if mask.contains(FeatureId::MaxTtl) {
            self.max_ttl = self.max_ttl.max(pkt.ttl);
        }
        if mask.contains(FeatureId::MinIpPktLen) {
            self.min_ip_pkt_len = self.min_ip_pkt_len.min(len);
        }
        if mask.contains(FeatureId::MaxIpPktLen) {
            self.max_ip_pkt_len = self.max_ip_pkt_len.max(len);
        }
        let bucket = match len {
            0..=128 => FeatureId::NumPktsUpTo128,
            129..=256 => FeatureId::NumPkts128To256,
            257..=512 => FeatureId::NumPkts256To512,
            513..=1024 => FeatureId::NumPkts512To1024,
            _ => FeatureId::NumPkts1024To1514,
        };
        if mask.contains(bucket) {
            let counter = match bucket {
                FeatureId::NumPktsUpTo128 => &mut self.num_pkts_up_to_128,
                FeatureId::NumPkts128To256 => &mut self.num_pkts_128_to_256,
                FeatureId::NumPkts256To512 => &mut self.num_pkts_256_to_512,
                FeatureId::NumPkts512To1024 => &mut self.num_pkts_512_to_1024,
                _ => &mut self.num_pkts_1024_to_1514,
            };
            *counter = counter.saturating_add(1);
        }
    }

    /// Read one catalog field, widened to u64.
    pub fn feature(&self, f: FeatureId) -> u64 {
        match f {
            FeatureId::Ipv4SrcAddr => u64::from(self.src_ip),
            FeatureId::Ipv4DstAddr => u64::from(self.dst_ip),
            FeatureId::L4SrcPort => u64::from(self.src_port),
            FeatureId::L4DstPort => u64::from(self.dst_port),
            FeatureId::Protocol => u64::from(self.protocol),
            FeatureId::InPkts => u64::from(self.in_pkts),
            FeatureId::OutPkts => u64::from(self.out_pkts),
            FeatureId::InBytes => self.in_bytes,
            FeatureId::OutBytes => self.out_bytes,
            FeatureId::FlowDurationMs => u64::from(self.flow_duration_ms),
            FeatureId::TcpFlags => u64::from(self.tcp_flags),
            FeatureId::MinTtl => u64::from(self.min_ttl),
            FeatureId::MaxTtl => u64::from(self.max_ttl),
            FeatureId::MinIpPktLen => u64::from(self.min_ip_pkt_len),
            FeatureId::MaxIpPktLen => u64::from(self.max_ip_pkt_len),
            FeatureId::TcpWinMaxIn => u64::from(self.tcp_win_max_in),
            FeatureId::TcpWinMaxOut => u64::from(self.tcp_win_max_out),
            FeatureId::NumPktsUpTo128 => u64::from(self.num_pkts_up_to_128),
            FeatureId::NumPkts128To256 => u64::from(self.num_pkts_128_to_256),
            FeatureId::NumPkts256To512 => u64::from(self.num_pkts_256_to_512),
            FeatureId::NumPkts512To1024 => u64::from(self.num_pkts_512_to_1024),
            FeatureId::NumPkts1024To1514 => u64::from(self.num_pkts_1024_to_1514),
        }
    }

    /// Set one catalog field from a u64, truncating to the field width.
    /// Used by CSV record readers and test fixtures.
    pub fn set_feature(&mut self, f: FeatureId, value: u64) {
        match f {
            FeatureId::Ipv4SrcAddr => self.src_ip = value as u32,
            FeatureId::Ipv4DstAddr => self.dst_ip = value as u32,
            FeatureId::L4SrcPort => self.src_port = value as u16,
            FeatureId::L4DstPort => self.dst_port = value as u16,
            FeatureId::Protocol => self.protocol = value as u8,
            FeatureId::InPkts => self.in_pkts = value as u32,
            FeatureId::OutPkts => self.out_pkts = value as u32,
            FeatureId::InBytes => self.in_bytes = value,
            FeatureId::OutBytes => self.out_bytes = value,
            FeatureId::FlowDurationMs => self.flow_duration_ms = value as u32,
            FeatureId::TcpFlags => self.tcp_flags = value as u8,
            FeatureId::MinTtl => self.min_ttl = value as u8,
            FeatureId::MaxTtl => self.max_ttl = value as u8,
            FeatureId::MinIpPktLen => self.min_ip_pkt_len = value as u16,
            FeatureId::MaxIpPktLen => self.max_ip_pkt_len = value as u16,
            FeatureId::TcpWinMaxIn => self.tcp_win_max_in = value as u16,
            FeatureId::TcpWinMaxOut => self.tcp_win_max_out = value as u16,
            FeatureId::NumPktsUpTo128 => self.num_pkts_up_to_128 = value as u32,
            FeatureId::NumPkts128To256 => self.num_pkts_128_to_256 = value as u32,
            FeatureId::NumPkts256To512 => self.num_pkts_256_to_512 = value as u32,
            FeatureId::NumPkts512To1024 => self.num_pkts_512_to_1024 = value as u32,
            FeatureId::NumPkts1024To1514 => self.num_pkts_1024_to_1514 = value as u32,
        }
    }

    /// A blank record not tied to a table slot. Used by readers that
    /// reconstruct records from serialized fields.
    pub fn blank() -> FlowRecord {
        let key = CanonicalKey {
            a: crate::packet::Endpoint { ip: 0, port: 0 },
            b: crate::packet::Endpoint { ip: 0, port: 0 },
            protocol: 0,
        };
        let mut rec = FlowRecord::empty(key, true, 0, 0);
        rec.min_ttl = 0;
        rec.min_ip_pkt_len = 0;
        rec
    }

    #[cfg(debug_assertions)]
    fn check_invariants(&self, mask: FeatureMask) {
        if mask.contains(FeatureId::MinTtl) && mask.contains(FeatureId::MaxTtl) {
            debug_assert!(self.min_ttl <= self.max_ttl);
        }
        if mask.contains(FeatureId::MinIpPktLen) && mask.contains(FeatureId::MaxIpPktLen) {
            debug_assert!(self.min_ip_pkt_len <= self.max_ip_pkt_len);
        }
        let buckets_enabled = [
            FeatureId::NumPktsUpTo128,
            FeatureId::NumPkts128To256,
            FeatureId::NumPkts256To512,
            FeatureId::NumPkts512To1024,
            FeatureId::NumPkts1024To1514,
            FeatureId::InPkts,
            FeatureId::OutPkts,
        ]
        .iter()
        .all(|f| mask.contains(*f));
        if buckets_enabled {
            let buckets = u64::from(self.num_pkts_up_to_128)
                + u64::from(self.num_pkts_128_to_256)
                + u64::from(self.num_pkts_256_to_512)
                + u64::from(self.num_pkts_512_to_1024)
                + u64::from(self.num_pkts_1024_to_1514);
            debug_assert_eq!(buckets, u64::from(self.in_pkts) + u64::from(self.out_pkts));
        }
    }
}

/// Result of folding one packet into the table.
#[derive(Debug, PartialEq, Eq)]
pub enum SlotVerdict {
    /// Slot was empty; a record was created.
    Created,
    /// Slot held this flow; the record was updated.
    Updated,
    /// Slot held a different flow; the incumbent was evicted (carried here
    /// so the caller can export it) and the slot reinitialized.
    CollisionEvicted(Box<FlowRecord>),
}

#[derive(Debug, Error)]
pub enum FlowTableError {
    #[error("index_bits {0} out of range {MIN_INDEX_BITS}..={MAX_INDEX_BITS}")]
    IndexBitsOutOfRange(u8),
}

/// The register-array flow table.
pub struct FlowTable {
    slots: Vec<Option<Box<FlowRecord>>>,
    index_bits: u8,
    mask: FeatureMask,
    collisions: u64,
    evictions: u64,
}

impl FlowTable {
    pub fn new(index_bits: u8, mask: FeatureMask) -> Result<FlowTable, FlowTableError> {
        if !(MIN_INDEX_BITS..=MAX_INDEX_BITS).contains(&index_bits) {
            return Err(FlowTableError::IndexBitsOutOfRange(index_bits));
        }
        let size = 1usize << index_bits;
        let mut slots = Vec::with_capacity(size);
        slots.resize_with(size, || None);
        Ok(FlowTable { slots, index_bits, mask, collisions: 0, evictions: 0 })
    }

    pub fn index_bits(&self) -> u8 {
        self.index_bits
    }

    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Fold one packet into the table under an already-canonicalized key,
    /// then run `and_then` on the freshly updated record while the slot is
    /// still borrowed — the in-band hook used to classify per packet
    /// without a second slot lookup. `is_forward` is the direction flag
    /// from key canonicalization.
    pub fn update_flow_with<R>(
        &mut self,
        pkt: &ParsedPacket,
        key: CanonicalKey,
        is_forward: bool,
        and_then: impl FnOnce(&mut FlowRecord) -> R,
    ) -> (u32, SlotVerdict, R) {
        let slot_idx = flow_id(&key, self.index_bits);
        let slot = &mut self.slots[slot_idx as usize];
        let (verdict, ret) = match slot {
            Some(rec) if rec.key == key => {
                let is_in = is_forward == rec.initiator_is_a;
                rec.apply(pkt, is_in, self.mask);
                #[cfg(debug_assertions)]
                rec.check_invariants(self.mask);
                (SlotVerdict::Updated, and_then(rec))
            }
            Some(_) => {
                self.collisions += 1;
                self.evictions += 1;
                let mut rec = Box::new(FlowRecord::empty(key, is_forward, slot_idx, pkt.ts_micros));
                rec.apply(pkt, true, self.mask);
                #[cfg(debug_assertions)]
                rec.check_invariants(self.mask);
                let ret = and_then(&mut rec);
                let old = slot.replace(rec).expect("occupied arm");
                (SlotVerdict::CollisionEvicted(old), ret)
            }
            None => {
                let mut rec = Box::new(FlowRecord::empty(key, is_forward, slot_idx, pkt.ts_micros));
                rec.apply(pkt, true, self.mask);
                #[cfg(debug_assertions)]
                rec.check_invariants(self.mask);
                let ret = and_then(&mut rec);
                *slot = Some(rec);
                (SlotVerdict::Created, ret)
            }
        };
        (slot_idx, verdict, ret)
    }

    /// Fold one packet into the table under an already-canonicalized key.
    pub fn update_flow(
        &mut self,
        pkt: &ParsedPacket,
        key: CanonicalKey,
        is_forward: bool,
    ) -> (u32, SlotVerdict) {
        let (slot, verdict, ()) = self.update_flow_with(pkt, key, is_forward, |_| ());
        (slot, verdict)
    }

    /// Canonicalize and fold one parsed packet.
    pub fn update_packet(&mut self, pkt: &ParsedPacket) -> (u32, SlotVerdict) {
        let (key, is_forward) = CanonicalKey::from_tuple(&pkt.five_tuple());
        self.update_flow(pkt, key, is_forward)
    }

    /// Mutable access to the record at a slot, for in-band classification.
    pub fn record_at(&mut self, slot: u32) -> Option<&mut FlowRecord> {
        self.slots[slot as usize].as_deref_mut()
    }

    /// Return and clear every record idle longer than `idle_timeout_s` or
    /// alive longer than `active_timeout_s` at time `now_micros`.
    pub fn expire_flows(
        &mut self,
        now_micros: u64,
        idle_timeout_s: u64,
        active_timeout_s: u64,
    ) -> Vec<FlowRecord> {
        let idle_us = idle_timeout_s.saturating_mul(1_000_000);
        let active_us = active_timeout_s.saturating_mul(1_000_000);
        let mut expired = Vec::new();
        for slot in &mut self.slots {
            let due = match slot {
                Some(rec) => {
                    now_micros.saturating_sub(rec.last_ts) > idle_us
                        || now_micros.saturating_sub(rec.first_ts) > active_us
                }
                None => false,
            };
            if due {
                expired.push(*slot.take().expect("checked occupied"));
            }
        }
        expired
    }

    /// Return and clear every occupied record (end-of-input flush).
    pub fn drain(&mut self) -> Vec<FlowRecord> {
        self.slots.iter_mut().filter_map(|s| s.take()).map(|b| *b).collect()
    }

    /// Non-destructive copy of all occupied records, in slot order.
    pub fn snapshot(&self) -> Vec<FlowRecord> {
        self.slots.iter().filter_map(|s| s.as_deref().cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{Endpoint, FiveTuple};

    fn pkt(tuple: FiveTuple, ts: u64) -> ParsedPacket {
        ParsedPacket {
            ts_micros: ts,
            wire_len: 64,
            ip_total_len: 50,
            ttl: 64,
            protocol: tuple.protocol,
            src_ip: tuple.src_ip,
            dst_ip: tuple.dst_ip,
            src_port: tuple.src_port,
            dst_port: tuple.dst_port,
            tcp_flags: 0,
            tcp_window: 0,
        }
    }

    fn sample_tuple() -> FiveTuple {
        FiveTuple {
            src_ip: 0x0A000001,
            dst_ip: 0x0A000002,
            src_port: 1234,
            dst_port: 80,
            protocol: 6,
        }
    }

    /// The standard CRC-32 check value over "123456789".
    #[test]
    fn crc32_check_value() {
        assert_eq!(crc32(b"123456789"), 0xCBF43926);
    }

    // Flow-id values frozen from an independent CRC-32 implementation run
    // over the documented 13-byte key serialization.
    #[test]
    fn flow_id_frozen_values() {
        let key = CanonicalKey {
            a: Endpoint { ip: 0x0A000001, port: 1234 },
            b: Endpoint { ip: 0x0A000002, port: 80 },
            protocol: 6,
        };
        assert_eq!(crc32(&key.key_bytes()), 0x9E9C0453);
        assert_eq!(flow_id(&key, 20), 0xC0453);
        assert_eq!(flow_id(&key, 20), 787_539);

        let zero = CanonicalKey {
            a: Endpoint { ip: 0, port: 0 },
            b: Endpoint { ip: 0, port: 0 },
            protocol: 0,
        };
        assert_eq!(crc32(&zero.key_bytes()), 0x0F744682);
        assert_eq!(flow_id(&zero, 8), 130);

        let same_ip = CanonicalKey {
            a: Endpoint { ip: 0x0A000001, port: 7 },
            b: Endpoint { ip: 0x0A000001, port: 9 },
            protocol: 17,
        };
        assert_eq!(crc32(&same_ip.key_bytes()), 0x7792E113);
    }

    #[test]
    fn flow_id_is_deterministic_and_bounded() {
        let key = CanonicalKey {
            a: Endpoint { ip: 0xC0A80001, port: 4433 },
            b: Endpoint { ip: 0xC0A80099, port: 443 },
            protocol: 6,
        };
        assert_eq!(flow_id(&key, 12), flow_id(&key, 12));
        for bits in MIN_INDEX_BITS..=MAX_INDEX_BITS {
            assert!(flow_id(&key, bits) < (1 << bits));
        }
    }

    #[test]
    fn single_packet_initializes_record() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        let mut p = pkt(sample_tuple(), 1_000);
        p.ip_total_len = 60;
        p.tcp_flags = 0x02;
        p.tcp_window = 1000;
        let (slot, verdict) = table.update_packet(&p);
        assert_eq!(verdict, SlotVerdict::Created);
        let snap = table.snapshot();
        assert_eq!(snap.len(), 1);
        let rec = &snap[0];
        assert_eq!(rec.slot, slot);
        assert_eq!(rec.src_ip, 0x0A000001);
        assert_eq!(rec.dst_ip, 0x0A000002);
        assert_eq!(rec.src_port, 1234);
        assert_eq!(rec.dst_port, 80);
        assert_eq!(rec.in_pkts, 1);
        assert_eq!(rec.out_pkts, 0);
        assert_eq!(rec.in_bytes, 60);
        assert_eq!(rec.min_ttl, 64);
        assert_eq!(rec.max_ttl, 64);
        assert_eq!(rec.min_ip_pkt_len, 60);
        assert_eq!(rec.max_ip_pkt_len, 60);
        assert_eq!(rec.num_pkts_up_to_128, 1);
        assert_eq!(rec.tcp_win_max_in, 1000);
        assert_eq!(rec.tcp_win_max_out, 0);
        assert_eq!(rec.tcp_flags, 0x02);
        assert_eq!(rec.flow_duration_ms, 0);
    }

    #[test]
    fn reverse_packet_counts_as_out() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        let fwd = sample_tuple();
        let rev = FiveTuple {
            src_ip: fwd.dst_ip,
            dst_ip: fwd.src_ip,
            src_port: fwd.dst_port,
            dst_port: fwd.src_port,
            protocol: fwd.protocol,
        };
        table.update_packet(&pkt(fwd, 1_000));
        let mut back = pkt(rev, 3_500);
        back.tcp_window = 26866;
        let (_, verdict) = table.update_packet(&back);
        assert_eq!(verdict, SlotVerdict::Updated);

        let snap = table.snapshot();
        assert_eq!(snap.len(), 1);
        let rec = &snap[0];
        assert_eq!(rec.in_pkts, 1);
        assert_eq!(rec.out_pkts, 1);
        assert_eq!(rec.tcp_win_max_out, 26866);
        // Initiator stays the first packet's source.
        assert_eq!(rec.src_ip, fwd.src_ip);
        assert_eq!(rec.flow_duration_ms, 2); // floor(2500us / 1000)
        assert_eq!(rec.first_ts, 1_000);
        assert_eq!(rec.last_ts, 3_500);
    }

    #[test]
    fn responder_initiated_flow_keeps_its_initiator() {
        // First packet from the lexicographically larger endpoint: the
        // record's SRC must still be that packet's source.
        let t = FiveTuple {
            src_ip: 0x0A000002,
            dst_ip: 0x0A000001,
            src_port: 443,
            dst_port: 50000,
            protocol: 6,
        };
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        table.update_packet(&pkt(t, 0));
        let rec = &table.snapshot()[0];
        assert_eq!(rec.src_ip, 0x0A000002);
        assert_eq!(rec.src_port, 443);
        assert_eq!(rec.in_pkts, 1);
        assert!(!rec.initiator_is_a);
    }

    #[test]
    fn size_buckets_split_on_documented_boundaries() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        let t = sample_tuple();
        for len in [1u16, 128, 129, 256, 257, 512, 513, 1024, 1025, 1514, 3000] {
            let mut p = pkt(t, 0);
            p.ip_total_len = len;
            table.update_packet(&p);
        }
        let rec = &table.snapshot()[0];
        assert_eq!(rec.num_pkts_up_to_128, 2);
        assert_eq!(rec.num_pkts_128_to_256, 2);
        assert_eq!(rec.num_pkts_256_to_512, 2);
        assert_eq!(rec.num_pkts_512_to_1024, 2);
        assert_eq!(rec.num_pkts_1024_to_1514, 3); // 1025, 1514 and oversized 3000
        let sum = rec.num_pkts_up_to_128
            + rec.num_pkts_128_to_256
            + rec.num_pkts_256_to_512
            + rec.num_pkts_512_to_1024
            + rec.num_pkts_1024_to_1514;
        assert_eq!(sum, rec.in_pkts + rec.out_pkts);
    }

    #[test]
    fn collision_evicts_incumbent() {
        // With 2^8 slots, 17 distinct keys must produce at least one
        // collision by pigeonhole on a CRC that spreads well; instead of
        // relying on luck, search for two keys sharing a slot.
        let mut keys: Vec<(CanonicalKey, u32)> = Vec::new();
        'outer: for i in 0u32..10_000 {
            let t = FiveTuple {
                src_ip: 0x0A000000 + i,
                dst_ip: 0x0B000000 + i,
                src_port: 1000,
                dst_port: 2000,
                protocol: 6,
            };
            let (key, _) = CanonicalKey::from_tuple(&t);
            let id = flow_id(&key, 8);
            for (other, other_id) in &keys {
                if *other_id == id && *other != key {
                    let mut table = FlowTable::new(8, FeatureMask::ALL).unwrap();
                    let t1 = FiveTuple {
                        src_ip: other.a.ip,
                        dst_ip: other.b.ip,
                        src_port: other.a.port,
                        dst_port: other.b.port,
                        protocol: other.protocol,
                    };
                    table.update_packet(&pkt(t1, 100));
                    let (_, v) = table.update_packet(&pkt(t, 200));
                    match v {
                        SlotVerdict::CollisionEvicted(old) => {
                            assert_eq!(old.key, *other);
                            assert_eq!(old.in_pkts, 1);
                        }
                        other => panic!("expected eviction, got {other:?}"),
                    }
                    assert_eq!(table.collisions(), 1);
                    assert_eq!(table.evictions(), 1);
                    // Slot now holds the new flow.
                    assert_eq!(table.snapshot()[0].key, key);
                    break 'outer;
                }
            }
            keys.push((key, id));
        }
        assert!(keys.len() < 10_000, "no colliding pair found");
    }

    #[test]
    fn expiry_on_idle_timeout() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        assert!(table.expire_flows(1_000_000_000, 30, 120).is_empty());

        table.update_packet(&pkt(sample_tuple(), 0));
        // 29 s idle: stays.
        assert!(table.expire_flows(29_000_000, 30, 120).is_empty());
        // Exactly 30 s idle: strict comparison keeps it.
        assert!(table.expire_flows(30_000_000, 30, 120).is_empty());
        // 31 s idle: expired, slot freed.
        let expired = table.expire_flows(31_000_000, 30, 120);
        assert_eq!(expired.len(), 1);
        assert_eq!(expired[0].in_pkts, 1);
        assert_eq!(table.occupied(), 0);
        // Second pass finds nothing.
        assert!(table.expire_flows(31_000_000, 30, 120).is_empty());
    }

    #[test]
    fn active_timeout_exports_live_flow() {
        // A flow receiving one packet per second for 125 s with a 120 s
        // active timeout: the first expiry pass after the 120 s mark
        // exports it even though it never went idle.
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        let t = sample_tuple();
        let mut exported_at = None;
        for sec in 0..=125u64 {
            let now = sec * 1_000_000;
            table.update_packet(&pkt(t, now));
            let expired = table.expire_flows(now, 30, 120);
            if !expired.is_empty() {
                exported_at = Some(sec);
                assert_eq!(expired[0].in_pkts + expired[0].out_pkts, 1 + sec as u32);
                break;
            }
        }
        assert_eq!(exported_at, Some(121));
    }

    #[test]
    fn snapshot_is_non_destructive() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        table.update_packet(&pkt(sample_tuple(), 0));
        assert_eq!(table.snapshot().len(), 1);
        assert_eq!(table.snapshot().len(), 1);
        assert_eq!(table.occupied(), 1);
        let drained = table.drain();
        assert_eq!(drained.len(), 1);
        assert_eq!(table.occupied(), 0);
    }

    #[test]
    fn records_sit_at_their_flow_id() {
        let mut table = FlowTable::new(12, FeatureMask::ALL).unwrap();
        for i in 0..200u32 {
            let t = FiveTuple {
                src_ip: 0x0A000000 + i,
                dst_ip: 0x0B000000 + i,
                src_port: (1000 + i) as u16,
                dst_port: 80,
                protocol: if i % 2 == 0 { 6 } else { 17 },
            };
            table.update_packet(&pkt(t, u64::from(i)));
        }
        for rec in table.snapshot() {
            assert_eq!(rec.slot, flow_id(&rec.key, 12));
        }
    }

    #[test]
    fn disabled_features_stay_untouched() {
        let mask = FeatureMask::parse("IN_PKTS,OUT_PKTS").unwrap();
        let mut table = FlowTable::new(10, mask).unwrap();
        let mut p = pkt(sample_tuple(), 0);
        p.ip_total_len = 700;
        p.tcp_flags = 0xFF;
        p.tcp_window = 9000;
        table.update_packet(&p);
        let rec = &table.snapshot()[0];
        assert_eq!(rec.in_pkts, 1);
        assert_eq!(rec.in_bytes, 0);
        assert_eq!(rec.tcp_flags, 0);
        assert_eq!(rec.tcp_win_max_in, 0);
        assert_eq!(rec.num_pkts_512_to_1024, 0);
        assert_eq!(rec.flow_duration_ms, 0);
    }

    #[test]
    fn counters_saturate_at_width_max() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        table.update_packet(&pkt(sample_tuple(), 0));
        {
            let slot = flow_id(
                &CanonicalKey::from_tuple(&sample_tuple()).0,
                table.index_bits(),
            );
            let rec = table.record_at(slot).unwrap();
            rec.in_pkts = u32::MAX;
            rec.num_pkts_up_to_128 = u32::MAX;
            rec.in_bytes = u64::MAX - 10;
        }
        table.update_packet(&pkt(sample_tuple(), 1));
        let rec = &table.snapshot()[0];
        assert_eq!(rec.in_pkts, u32::MAX);
        assert_eq!(rec.num_pkts_up_to_128, u32::MAX);
        assert_eq!(rec.in_bytes, u64::MAX);
    }

    #[test]
    fn long_flow_duration_saturates_u32() {
        let mut table = FlowTable::new(10, FeatureMask::ALL).unwrap();
        table.update_packet(&pkt(sample_tuple(), 0));
        // ~50 days later: duration in ms exceeds u32.
        let far = 5_000_000_000_000_000u64;
        table.update_packet(&pkt(sample_tuple(), far));
        assert_eq!(table.snapshot()[0].flow_duration_ms, u32::MAX);
    }

    #[test]
    fn rejects_out_of_range_index_bits() {
        assert!(FlowTable::new(7, FeatureMask::ALL).is_err());
        assert!(FlowTable::new(25, FeatureMask::ALL).is_err());
        assert!(FlowTable::new(8, FeatureMask::ALL).is_ok());
        assert!(FlowTable::new(24, FeatureMask::ALL).is_ok());
    }
}
