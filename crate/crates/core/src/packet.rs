//! Ethernet/IPv4/TCP/UDP frame decoding, 5-tuple extraction and canonical
//! flow keys.
//!
//! The decoder is deliberately total: any byte slice maps to exactly one of
//! `Parsed`, `NotIpv4` or `Malformed`, so pipelines can count every frame
//! they see without panicking on garbage input.

use std::fmt;
use std::net::Ipv4Addr;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// Fields extracted from one frame. Integer fields are host-order values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedPacket {
    /// Capture timestamp in microseconds.
    pub ts_micros: u64,
    /// Total frame length on the wire, saturated to u16.
    pub wire_len: u16,
    /// IPv4 total length header field.
    pub ip_total_len: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub src_ip: u32,
    pub dst_ip: u32,
    /// Zero for protocols other than TCP/UDP.
    pub src_port: u16,
    pub dst_port: u16,
    /// TCP flags byte; zero for non-TCP.
    pub tcp_flags: u8,
    /// TCP window field; zero for non-TCP.
    pub tcp_window: u16,
}

impl ParsedPacket {
    pub fn five_tuple(&self) -> FiveTuple {
        FiveTuple {
            src_ip: self.src_ip,
            dst_ip: self.dst_ip,
            src_port: self.src_port,
            dst_port: self.dst_port,
            protocol: self.protocol,
        }
    }
}

/// Ways an IPv4 frame can fail to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedHeader {
    /// Fewer than 20 bytes after the Ethernet header, or total length /
    /// IHL pointing past the end of the frame.
    TruncatedIpv4,
    /// IHL field below 5.
    IhlTooSmall,
    /// TCP header shorter than 20 bytes or UDP header shorter than 8.
    TruncatedTransport,
}

impl fmt::Display for MalformedHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MalformedHeader::TruncatedIpv4 => "truncated IPv4 header",
            MalformedHeader::IhlTooSmall => "IPv4 IHL below 5",
            MalformedHeader::TruncatedTransport => "truncated transport header",
        };
        f.write_str(s)
    }
}

/// Decode result for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseOutcome {
    Parsed(ParsedPacket),
    /// Not an IPv4 frame: wrong ethertype, or too short to carry one.
    NotIpv4,
    /// IPv4 by ethertype, but the headers do not decode.
    Malformed(MalformedHeader),
}

/// Decode one Ethernet frame. A single 802.1Q tag is skipped; QinQ and
/// non-IPv4 payloads report `NotIpv4`.
pub fn parse_packet(frame: &[u8], ts_micros: u64) -> ParseOutcome {
    if frame.len() < 14 {
        return ParseOutcome::NotIpv4;
    }
    let mut ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    let mut l3_off = 14;
    if ethertype == ETHERTYPE_VLAN {
        if frame.len() < 18 {
            return ParseOutcome::NotIpv4;
        }
        ethertype = u16::from_be_bytes([frame[16], frame[17]]);
        l3_off = 18;
    }
    if ethertype != ETHERTYPE_IPV4 {
        return ParseOutcome::NotIpv4;
    }

    let l3 = &frame[l3_off..];
    if l3.len() < 20 {
        return ParseOutcome::Malformed(MalformedHeader::TruncatedIpv4);
    }
    let ihl = l3[0] & 0x0f;
    if ihl < 5 {
        return ParseOutcome::Malformed(MalformedHeader::IhlTooSmall);
    }
    let ip_header_len = usize::from(ihl) * 4;
    if l3.len() < ip_header_len {
        return ParseOutcome::Malformed(MalformedHeader::TruncatedIpv4);
    }

    let ip_total_len = u16::from_be_bytes([l3[2], l3[3]]);
    let ttl = l3[8];
    let protocol = l3[9];
    let src_ip = u32::from_be_bytes([l3[12], l3[13], l3[14], l3[15]]);
    let dst_ip = u32::from_be_bytes([l3[16], l3[17], l3[18], l3[19]]);

    let l4 = &l3[ip_header_len..];
    let mut src_port = 0u16;
    let mut dst_port = 0u16;
    let mut tcp_flags = 0u8;
    let mut tcp_window = 0u16;
    match protocol {
        PROTO_TCP => {
            if l4.len() < 20 {
                return ParseOutcome::Malformed(MalformedHeader::TruncatedTransport);
            }
            src_port = u16::from_be_bytes([l4[0], l4[1]]);
            dst_port = u16::from_be_bytes([l4[2], l4[3]]);
            tcp_flags = l4[13];
            tcp_window = u16::from_be_bytes([l4[14], l4[15]]);
        }
        PROTO_UDP => {
            if l4.len() < 8 {
                return ParseOutcome::Malformed(MalformedHeader::TruncatedTransport);
            }
            src_port = u16::from_be_bytes([l4[0], l4[1]]);
            dst_port = u16::from_be_bytes([l4[2], l4[3]]);
        }
        _ => {}
    }

    ParseOutcome::Parsed(ParsedPacket {
        ts_micros,
        wire_len: u16::try_from(frame.len()).unwrap_or(u16::MAX),
        ip_total_len,
        ttl,
        protocol,
        src_ip,
        dst_ip,
        src_port,
        dst_port,
        tcp_flags,
        tcp_window,
    })
}

/// Directed 5-tuple, as observed on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FiveTuple {
    pub src_ip: u32,
    pub dst_ip: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

/// One endpoint of a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: u32,
    pub port: u16,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", Ipv4Addr::from(self.ip), self.port)
    }
}

/// Direction-independent flow key: endpoints ordered so that
/// `a <= b` under (ip, port) lexicographic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanonicalKey {
    pub a: Endpoint,
    pub b: Endpoint,
    pub protocol: u8,
}

impl CanonicalKey {
    /// Canonicalize a directed tuple. `forward` is true when the packet
    /// travels a -> b, i.e. its source is the lexicographically smaller
    /// endpoint.
    pub fn from_tuple(t: &FiveTuple) -> (CanonicalKey, bool) {
        let src = Endpoint { ip: t.src_ip, port: t.src_port };
        let dst = Endpoint { ip: t.dst_ip, port: t.dst_port };
        if src <= dst {
            (CanonicalKey { a: src, b: dst, protocol: t.protocol }, true)
        } else {
            (CanonicalKey { a: dst, b: src, protocol: t.protocol }, false)
        }
    }

    /// Fixed 13-byte big-endian serialization fed to the flow hash:
    /// a.ip, a.port, b.ip, b.port, protocol.
    pub fn key_bytes(&self) -> [u8; 13] {
        let mut out = [0u8; 13];
        out[0..4].copy_from_slice(&self.a.ip.to_be_bytes());
        out[4..6].copy_from_slice(&self.a.port.to_be_bytes());
        out[6..10].copy_from_slice(&self.b.ip.to_be_bytes());
        out[10..12].copy_from_slice(&self.b.port.to_be_bytes());
        out[12] = self.protocol;
        out
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <-> {} proto {}", self.a, self.b, self.protocol)
    }
}

/// Reference to one frame inside a [`PacketStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRef {
    pub offset: usize,
    pub len: usize,
    pub ts_micros: u64,
}

/// A packed sequence of frames with timestamps. Frames live back-to-back in
/// one buffer so iteration during benchmarks touches memory linearly.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct PacketStream {
    data: Vec<u8>,
    frames: Vec<FrameRef>,
}

impl PacketStream {
    pub fn new() -> PacketStream {
        PacketStream::default()
    }

    pub fn push(&mut self, frame: &[u8], ts_micros: u64) {
        let offset = self.data.len();
        self.data.extend_from_slice(frame);
        self.frames.push(FrameRef { offset, len: frame.len(), ts_micros });
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Total bytes across all frames.
    pub fn total_bytes(&self) -> u64 {
        self.data.len() as u64
    }

    pub fn frame(&self, idx: usize) -> (&[u8], u64) {
        let f = self.frames[idx];
        (&self.data[f.offset..f.offset + f.len], f.ts_micros)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> {
        self.frames
            .iter()
            .map(move |f| (&self.data[f.offset..f.offset + f.len], f.ts_micros))
    }
}

/// Compute the IPv4 header checksum over a 20-byte header with its checksum
/// field zeroed.
pub fn ipv4_header_checksum(header: &[u8]) -> u16 {
    let mut sum = 0u32;
    let mut i = 0;
    while i + 1 < header.len() {
        let word = u16::from_be_bytes([header[i], header[i + 1]]);
        // Skip the checksum field itself.
        if i != 10 {
            sum += u32::from(word);
        }
        i += 2;
    }
    if i < header.len() {
        sum += u32::from(header[i]) << 8;
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Parameters for building a synthetic test frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameSpec {
    pub src_ip: u32,
    pub dst_ip: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    pub ttl: u8,
    pub tcp_flags: u8,
    pub tcp_window: u16,
    /// Total frame size including Ethernet header; clamped to at least the
    /// minimum needed for the headers.
    pub frame_len: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            src_ip: 0,
            dst_ip: 0,
            src_port: 0,
            dst_port: 0,
            protocol: PROTO_TCP,
            ttl: 64,
            tcp_flags: 0,
            tcp_window: 0,
            frame_len: 64,
        }
    }
}

/// Build a well-formed Ethernet+IPv4+TCP/UDP frame. Padding bytes are zero;
/// the IPv4 checksum is valid.
pub fn build_frame(spec: &FrameSpec) -> Vec<u8> {
    let l4_len = if spec.protocol == PROTO_TCP { 20 } else { 8 };
    let min_len = 14 + 20 + l4_len;
    let frame_len = spec.frame_len.max(min_len);
    let mut frame = vec![0u8; frame_len];

    // Ethernet: locally-administered placeholder MACs, IPv4 ethertype.
    frame[0] = 0x02;
    frame[6] = 0x02;
    frame[7] = 0x00;
    frame[11] = 0x01;
    frame[12..14].copy_from_slice(&ETHERTYPE_IPV4.to_be_bytes());

    let ip_total_len = (frame_len - 14) as u16;
    {
        let ip = &mut frame[14..34];
        ip[0] = 0x45;
        ip[2..4].copy_from_slice(&ip_total_len.to_be_bytes());
        ip[4..6].copy_from_slice(&1u16.to_be_bytes()); // identification
        ip[6] = 0x40; // don't fragment
        ip[8] = spec.ttl;
        ip[9] = spec.protocol;
        ip[12..16].copy_from_slice(&spec.src_ip.to_be_bytes());
        ip[16..20].copy_from_slice(&spec.dst_ip.to_be_bytes());
        let csum = ipv4_header_checksum(ip);
        ip[10..12].copy_from_slice(&csum.to_be_bytes());
    }

    let l4 = &mut frame[34..];
    l4[0..2].copy_from_slice(&spec.src_port.to_be_bytes());
    l4[2..4].copy_from_slice(&spec.dst_port.to_be_bytes());
    if spec.protocol == PROTO_TCP {
        l4[4..8].copy_from_slice(&1u32.to_be_bytes()); // sequence number
        l4[12] = 0x50; // data offset 5
        l4[13] = spec.tcp_flags;
        l4[14..16].copy_from_slice(&spec.tcp_window.to_be_bytes());
    } else {
        let udp_len = (frame_len - 34) as u16;
        l4[4..6].copy_from_slice(&udp_len.to_be_bytes());
    }
    frame
}
