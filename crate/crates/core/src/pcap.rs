//! Classic pcap (libpcap) file reading and writing, microsecond timestamps,
//! both byte orders accepted on read.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::packet::PacketStream;

const MAGIC_NATIVE: u32 = 0xA1B2C3D4;
const MAGIC_SWAPPED: u32 = 0xD4C3B2A1;
const LINKTYPE_ETHERNET: u32 = 1;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("i/o error reading capture: {0}")]
    Io(#[from] io::Error),
    #[error("not a pcap file (magic 0x{0:08X})")]
    BadMagic(u32),
    #[error("unsupported link type {0}, expected Ethernet")]
    BadLinkType(u32),
    #[error("truncated pcap file: {0}")]
    Truncated(&'static str),
    #[error("packet record of {0} bytes exceeds sane bounds")]
    OversizedRecord(u32),
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> Result<bool, io::Error> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "mid-record end of file",
            ));
        }
        filled += n;
    }
    Ok(true)
}

/// Read an entire capture into a [`PacketStream`].
pub fn read_pcap(path: &Path) -> Result<PacketStream, PcapError> {
    let mut reader = BufReader::new(File::open(path)?);
    read_pcap_from(&mut reader)
}

pub fn read_pcap_from(reader: &mut impl Read) -> Result<PacketStream, PcapError> {
    let mut header = [0u8; 24];
    if !read_exact_or_eof(reader, &mut header)? {
        return Err(PcapError::Truncated("empty file"));
    }
    let magic = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
    // The writer below emits big-endian; accept either byte order.
    let swapped = match magic {
        MAGIC_NATIVE => false,
        MAGIC_SWAPPED => true,
        other => return Err(PcapError::BadMagic(other)),
    };
    let read_u32 = |bytes: &[u8]| -> u32 {
        let arr = [bytes[0], bytes[1], bytes[2], bytes[3]];
        if swapped {
            u32::from_le_bytes(arr)
        } else {
            u32::from_be_bytes(arr)
        }
    };
    let link_type = read_u32(&header[20..24]);
    if link_type != LINKTYPE_ETHERNET {
        return Err(PcapError::BadLinkType(link_type));
    }

    let mut stream = PacketStream::new();
    let mut rec_header = [0u8; 16];
    let mut frame = Vec::new();
    loop {
        match read_exact_or_eof(reader, &mut rec_header) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                return Err(PcapError::Truncated("record header"));
            }
            Err(e) => return Err(e.into()),
        }
        let ts_sec = read_u32(&rec_header[0..4]);
        let ts_usec = read_u32(&rec_header[4..8]);
        let incl_len = read_u32(&rec_header[8..12]);
        if incl_len > 256 * 1024 {
            return Err(PcapError::OversizedRecord(incl_len));
        }
        frame.resize(incl_len as usize, 0);
        match read_exact_or_eof(reader, &mut frame) {
            Ok(true) => {}
            Ok(false) if incl_len == 0 => {}
            Ok(false) => return Err(PcapError::Truncated("packet data")),
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                return Err(PcapError::Truncated("packet data"));
            }
            Err(e) => return Err(e.into()),
        }
        let ts_micros = u64::from(ts_sec) * 1_000_000 + u64::from(ts_usec);
        stream.push(&frame, ts_micros);
    }
    Ok(stream)
}

/// Write a capture. Big-endian, microsecond timestamps, Ethernet link type.
pub fn write_pcap(path: &Path, stream: &PacketStream) -> Result<(), PcapError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_pcap_to(&mut writer, stream)?;
    writer.flush()?;
    Ok(())
}

pub fn write_pcap_to(writer: &mut impl Write, stream: &PacketStream) -> Result<(), PcapError> {
    let mut header = [0u8; 24];
    header[0..4].copy_from_slice(&MAGIC_NATIVE.to_be_bytes());
    header[4..6].copy_from_slice(&2u16.to_be_bytes()); // major
    header[6..8].copy_from_slice(&4u16.to_be_bytes()); // minor
    header[16..20].copy_from_slice(&65535u32.to_be_bytes()); // snaplen
    header[20..24].copy_from_slice(&LINKTYPE_ETHERNET.to_be_bytes());
    writer.write_all(&header)?;

    for (frame, ts_micros) in stream.iter() {
        let ts_sec = (ts_micros / 1_000_000) as u32;
        let ts_usec = (ts_micros % 1_000_000) as u32;
        let len = frame.len() as u32;
        let mut rec = [0u8; 16];
        rec[0..4].copy_from_slice(&ts_sec.to_be_bytes());
        rec[4..8].copy_from_slice(&ts_usec.to_be_bytes());
        rec[8..12].copy_from_slice(&len.to_be_bytes());
        rec[12..16].copy_from_slice(&len.to_be_bytes());
        writer.write_all(&rec)?;
        writer.write_all(frame)?;
    }
    Ok(())
}
