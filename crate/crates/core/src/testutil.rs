//! Test-only helpers: independently written oracles and random generators.
//!
//! Everything here is deliberately implemented from the documented behavior
//! rather than by calling into the production code paths it checks — the
//! CRC is computed bit by bit instead of by table, flows are folded into an
//! unbounded map instead of the fixed-size table, and trees are evaluated
//! by walking the raw JSON or the emitted P4 text. Enabled with the
//! `testutil` feature (on for this crate's own tests).

use std::collections::HashMap;

use rand::Rng;

use crate::catalog::{FeatureId, FeatureMask, FEATURE_COUNT};
use crate::flowtable::FlowRecord;
use crate::packet::{
    build_frame, parse_packet, CanonicalKey, FrameSpec, PacketStream, ParseOutcome,
};

/// The worked decision-tree fragment and its hand-written P4 rendering.
pub const LISTING_FRAGMENT_DTM: &str = include_str!("../fixtures/listing_fragment.dtm");
pub const LISTING_FRAGMENT_P4: &str = include_str!("../fixtures/listing_fragment.p4");

/// Bit-at-a-time CRC-32 (reflected 0xEDB88320), the reference the table
/// implementation must agree with.
pub fn crc32_reference(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= u32::from(b);
        for _ in 0..8 {
            let lsb = crc & 1;
            crc >>= 1;
            if lsb == 1 {
                crc ^= 0xEDB8_8320;
            }
        }
    }
    !crc
}

/// One flow folded by the reference implementation.
pub struct RefFlow {
    pub first_ts: u64,
    pub last_ts: u64,
    /// Whether the flow's first packet traveled in the key's a -> b
    /// orientation.
    pub init_forward: bool,
    pub packets: u64,
    features: [u64; FEATURE_COUNT],
}

impl RefFlow {
    pub fn feature(&self, f: FeatureId) -> u64 {
        self.features[f.index()]
    }

    fn add(&mut self, f: FeatureId, amount: u64) {
        let i = f.index();
        self.features[i] = (self.features[i] + amount).min(f.max_value());
    }

    fn fold_max(&mut self, f: FeatureId, v: u64) {
        let i = f.index();
        self.features[i] = self.features[i].max(v);
    }

    fn fold_min(&mut self, f: FeatureId, v: u64) {
        let i = f.index();
        self.features[i] = self.features[i].min(v);
    }
}

/// Fold a stream into an unbounded per-flow map, reimplementing the update
/// rules with plain arithmetic. Frames that do not parse are skipped, the
/// same as the table pipeline.
pub fn reference_fold(stream: &PacketStream, mask: FeatureMask) -> HashMap<[u8; 13], RefFlow> {
    let mut flows: HashMap<[u8; 13], RefFlow> = HashMap::new();
    for (frame, ts) in stream.iter() {
        let pkt = match parse_packet(frame, ts) {
            ParseOutcome::Parsed(p) => p,
            _ => continue,
        };
        let (key, forward) = CanonicalKey::from_tuple(&pkt.five_tuple());
        let flow = flows.entry(key.key_bytes()).or_insert_with(|| {
            let mut features = [0u64; FEATURE_COUNT];
            // Identity fields come from the first packet as observed.
            features[FeatureId::Ipv4SrcAddr.index()] = u64::from(pkt.src_ip);
            features[FeatureId::Ipv4DstAddr.index()] = u64::from(pkt.dst_ip);
            features[FeatureId::L4SrcPort.index()] = u64::from(pkt.src_port);
            features[FeatureId::L4DstPort.index()] = u64::from(pkt.dst_port);
            features[FeatureId::Protocol.index()] = u64::from(pkt.protocol);
            // Min-folds start at the width maximum.
            features[FeatureId::MinTtl.index()] = FeatureId::MinTtl.max_value();
            features[FeatureId::MinIpPktLen.index()] = FeatureId::MinIpPktLen.max_value();
            RefFlow {
                first_ts: ts,
                last_ts: ts,
                init_forward: forward,
                packets: 0,
                features,
            }
        });

        flow.packets += 1;
        flow.first_ts = flow.first_ts.min(ts);
        flow.last_ts = flow.last_ts.max(ts);
        let is_in = forward == flow.init_forward;
        let len = u64::from(pkt.ip_total_len);

        if is_in {
            if mask.contains(FeatureId::InPkts) {
                flow.add(FeatureId::InPkts, 1);
            }
            if mask.contains(FeatureId::InBytes) {
                flow.add(FeatureId::InBytes, len);
            }
            if mask.contains(FeatureId::TcpWinMaxIn) {
                flow.fold_max(FeatureId::TcpWinMaxIn, u64::from(pkt.tcp_window));
            }
        } else {
            if mask.contains(FeatureId::OutPkts) {
                flow.add(FeatureId::OutPkts, 1);
            }
            if mask.contains(FeatureId::OutBytes) {
                flow.add(FeatureId::OutBytes, len);
            }
            if mask.contains(FeatureId::TcpWinMaxOut) {
                flow.fold_max(FeatureId::TcpWinMaxOut, u64::from(pkt.tcp_window));
            }
        }
        if mask.contains(FeatureId::FlowDurationMs) {
            let ms = (flow.last_ts - flow.first_ts) / 1000;
            flow.features[FeatureId::FlowDurationMs.index()] =
                ms.min(FeatureId::FlowDurationMs.max_value());
        }
        if mask.contains(FeatureId::TcpFlags) {
            flow.features[FeatureId::TcpFlags.index()] |= u64::from(pkt.tcp_flags);
        }
        if mask.contains(FeatureId::MinTtl) {
            flow.fold_min(FeatureId::MinTtl, u64::from(pkt.ttl));
        }
        if mask.contains(FeatureId::MaxTtl) {
            flow.fold_max(FeatureId::MaxTtl, u64::from(pkt.ttl));
        }
        if mask.contains(FeatureId::MinIpPktLen) {
            flow.fold_min(FeatureId::MinIpPktLen, len);
        }
        if mask.contains(FeatureId::MaxIpPktLen) {
            flow.fold_max(FeatureId::MaxIpPktLen, len);
        }
        let bucket = if len <= 128 {
            FeatureId::NumPktsUpTo128
        } else if len <= 256 {
            FeatureId::NumPkts128To256
        } else if len <= 512 {
            FeatureId::NumPkts256To512
        } else if len <= 1024 {
            FeatureId::NumPkts512To1024
        } else {
            FeatureId::NumPkts1024To1514
        };
        if mask.contains(bucket) {
            flow.add(bucket, 1);
        }
    }
    flows
}

/// Compare a set of table records against a reference fold. Returns the
/// first discrepancy as text, or Ok when every flow and every catalog
/// field agrees.
pub fn compare_to_reference(
    records: &[FlowRecord],
    reference: &HashMap<[u8; 13], RefFlow>,
) -> Result<(), String> {
    if records.len() != reference.len() {
        return Err(format!(
            "flow count mismatch: table has {}, reference has {}",
            records.len(),
            reference.len()
        ));
    }
    for rec in records {
        let key = rec.key.key_bytes();
        let Some(r) = reference.get(&key) else {
            return Err(format!("table flow {key:02x?} missing from reference"));
        };
        if rec.first_ts != r.first_ts || rec.last_ts != r.last_ts {
            return Err(format!(
                "flow {key:02x?}: timestamps ({}, {}) vs reference ({}, {})",
                rec.first_ts, rec.last_ts, r.first_ts, r.last_ts
            ));
        }
        for f in FeatureId::all() {
            if rec.feature(f) != r.feature(f) {
                return Err(format!(
                    "flow {key:02x?}: {} is {} but reference says {}",
                    f.name(),
                    rec.feature(f),
                    r.feature(f)
                ));
            }
        }
    }
    Ok(())
}

pub fn assert_matches_reference(records: &[FlowRecord], reference: &HashMap<[u8; 13], RefFlow>) {
    if let Err(msg) = compare_to_reference(records, reference) {
        panic!("table diverged from reference fold: {msg}");
    }
}

/// Classify a record by walking the raw model JSON directly, without the
/// packed representation. Panics on malformed input; only run this on
/// models the loader accepts.
pub fn classify_reference(model_json: &str, rec: &FlowRecord) -> u8 {
    let v: serde_json::Value = serde_json::from_str(model_json).expect("model json");
    let nodes = v["nodes"].as_array().expect("nodes array");
    let leaves = v["leaves"].as_array().expect("leaves array");
    let node_by_id: HashMap<u64, &serde_json::Value> = nodes
        .iter()
        .map(|n| (n["id"].as_u64().expect("node id"), n))
        .collect();
    let leaf_by_id: HashMap<u64, u64> = leaves
        .iter()
        .map(|l| {
            (
                l["id"].as_u64().expect("leaf id"),
                l["label"].as_u64().expect("leaf label"),
            )
        })
        .collect();

    let mut cur = v["root"].as_u64().expect("root id");
    loop {
        match node_by_id.get(&cur) {
            Some(node) => {
                let name = node["feature"].as_str().expect("feature name");
                let f = FeatureId::from_name(name).expect("known feature");
                let threshold = node["threshold"].as_u64().expect("threshold");
                let side = if rec.feature(f) <= threshold { "left" } else { "right" };
                cur = node[side].as_u64().expect("child id");
            }
            None => return leaf_by_id[&cur] as u8,
        }
    }
}

fn feature_of_register(register: &str) -> Option<FeatureId> {
    FeatureId::all().find(|f| f.register() == register)
}

fn expect_line(lines: &[&str], i: &mut usize, want: &str) {
    assert!(*i < lines.len(), "expected {want:?} but the program ended");
    assert_eq!(lines[*i].trim_start(), want, "at line {}", *i + 1);
    *i += 1;
}

fn skip_stmt(lines: &[&str], i: &mut usize) {
    let line = lines[*i].trim_start();
    if line.starts_with("if(") {
        *i += 1;
        skip_stmt(lines, i);
        expect_line(lines, i, "} else {");
        skip_stmt(lines, i);
        expect_line(lines, i, "}");
    } else {
        assert!(
            line.starts_with("malicious_flag_register.write("),
            "unexpected statement at line {}: {line:?}",
            *i + 1
        );
        *i += 1;
    }
}

fn exec_stmt(lines: &[&str], i: &mut usize, vars: &HashMap<&str, u64>) -> u8 {
    let line = lines[*i].trim_start();
    if let Some(rest) = line.strip_prefix("if(") {
        let (name, rest) = rest.split_once(" <= ").expect("condition shape");
        let threshold: u64 = rest
            .strip_suffix("){")
            .expect("condition shape")
            .parse()
            .expect("integer threshold");
        let value = *vars
            .get(name)
            .unwrap_or_else(|| panic!("condition reads unloaded variable {name}"));
        *i += 1;
        if value <= threshold {
            let label = exec_stmt(lines, i, vars);
            expect_line(lines, i, "} else {");
            skip_stmt(lines, i);
            expect_line(lines, i, "}");
            label
        } else {
            skip_stmt(lines, i);
            expect_line(lines, i, "} else {");
            let label = exec_stmt(lines, i, vars);
            expect_line(lines, i, "}");
            label
        }
    } else {
        let rest = line
            .strip_prefix("malicious_flag_register.write(current_flow_id,")
            .unwrap_or_else(|| panic!("expected a write at line {}: {line:?}", *i + 1));
        let label: u8 = rest
            .strip_suffix(");")
            .expect("write shape")
            .parse()
            .expect("integer label");
        *i += 1;
        label
    }
}

/// Execute emitted P4 classifier source against a record: parse the
/// declarations, bind variables from the register reads, then walk the
/// if/else structure. Register names — not the variable names — decide
/// which feature each read loads, so a mispaired read would be caught as a
/// classification difference.
pub fn interpret_emitted_p4(p4: &str, rec: &FlowRecord) -> u8 {
    let lines: Vec<&str> = p4.lines().collect();
    assert!(!lines.is_empty(), "empty program");
    let mut i = 0;

    let mut declared: HashMap<&str, FeatureId> = HashMap::new();
    while i < lines.len() {
        let Some(rest) = lines[i].strip_prefix("bit<") else { break };
        let (bits, rest) = rest.split_once("> ").expect("declaration shape");
        let (name, index) = rest.split_once(";//").expect("declaration shape");
        let index: usize = index.parse().expect("catalog position");
        let f = FeatureId::from_index(index - 1).expect("catalog position in range");
        assert_eq!(name, f.name(), "declared name vs catalog position");
        assert_eq!(
            bits.parse::<u8>().expect("bit width"),
            f.bits(),
            "declared width of {name}"
        );
        declared.insert(name, f);
        i += 1;
    }

    let mut vars: HashMap<&str, u64> = HashMap::new();
    while i < lines.len() {
        let Some((register, rest)) = lines[i].split_once(".read(") else { break };
        if register.contains(' ') || register.contains('<') {
            break;
        }
        let name = rest
            .strip_suffix(",current_flow_id);")
            .expect("read shape");
        let f = feature_of_register(register)
            .unwrap_or_else(|| panic!("unknown register {register}"));
        assert_eq!(
            declared.get(name),
            Some(&f),
            "read loads {register} into {name}"
        );
        vars.insert(name, rec.feature(f));
        i += 1;
    }

    let label = exec_stmt(&lines, &mut i, &vars);
    assert_eq!(i, lines.len(), "trailing lines after the final statement");
    label
}

fn random_child(
    rng: &mut impl Rng,
    depth: u32,
    max_depth: u32,
    feats: &[FeatureId],
    nodes: &mut Vec<serde_json::Value>,
    leaves: &mut Vec<serde_json::Value>,
    next_id: &mut u32,
) -> u32 {
    let id = *next_id;
    *next_id += 1;
    let make_leaf = depth >= max_depth || rng.random_bool(0.3);
    if make_leaf {
        leaves.push(serde_json::json!({
            "id": id,
            "label": u32::from(rng.random_bool(0.5)),
        }));
        return id;
    }
    let f = feats[rng.random_range(0..feats.len())];
    // Mix full-width thresholds with small ones so both subtree sides see
    // traffic from uniformly random records.
    let threshold = if rng.random_bool(0.5) {
        rng.random_range(0..=f.max_value())
    } else {
        rng.random_range(0..=f.max_value().min(512))
    };
    let left = random_child(rng, depth + 1, max_depth, feats, nodes, leaves, next_id);
    let right = random_child(rng, depth + 1, max_depth, feats, nodes, leaves, next_id);
    nodes.push(serde_json::json!({
        "id": id,
        "feature": f.name(),
        "threshold": threshold,
        "left": left,
        "right": right,
    }));
    id
}

/// Generate a random well-formed dtm-1 model over the given feature set.
pub fn random_model_json(rng: &mut impl Rng, mask: FeatureMask, max_depth: u32) -> String {
    let feats: Vec<FeatureId> = mask.iter().collect();
    assert!(!feats.is_empty(), "mask must enable at least one feature");
    let mut nodes = Vec::new();
    let mut leaves = Vec::new();
    let mut next_id = 0;
    let root = random_child(rng, 0, max_depth.max(1), &feats, &mut nodes, &mut leaves, &mut next_id);
    serde_json::json!({
        "format": "dtm-1",
        "root": root,
        "nodes": nodes,
        "leaves": leaves,
    })
    .to_string()
}

/// A record with every catalog field drawn uniformly from its width.
pub fn random_record(rng: &mut impl Rng) -> FlowRecord {
    let mut rec = FlowRecord::blank();
    for f in FeatureId::all() {
        rec.set_feature(f, rng.random_range(0..=f.max_value()));
    }
    rec
}

/// A synthetic corpus richer than the benchmark generator: mixed frame
/// sizes across all five bucket boundaries, TCP/UDP/GRE flows, timestamp
/// jitter (including reordering), and a sprinkle of non-IPv4 and truncated
/// frames that the pipeline must skip.
pub fn varied_traffic(flows: usize, packets: usize, seed: u64) -> PacketStream {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    assert!(flows > 0 && packets > 0);

    struct Endpoints {
        spec: FrameSpec,
    }
    let mut seen = std::collections::HashSet::new();
    let mut flow_specs: Vec<Endpoints> = Vec::with_capacity(flows);
    while flow_specs.len() < flows {
        let protocol = match rng.random_range(0..100) {
            0..=59 => 6u8,
            60..=91 => 17,
            _ => 47, // ports are not part of the flow key for GRE
        };
        let (src_port, dst_port) = if protocol == 47 {
            (0, 0)
        } else {
            (rng.random_range(1024..=65535), rng.random_range(1..1024))
        };
        let spec = FrameSpec {
            src_ip: 0x0A00_0000 | rng.random_range(0..0x00FF_FFFFu32),
            dst_ip: 0xC0A8_0000 | rng.random_range(0..0xFFFFu32),
            src_port,
            dst_port,
            protocol,
            ttl: rng.random_range(16..=255),
            tcp_flags: 0,
            tcp_window: 0,
            frame_len: 64,
        };
        // Uniqueness is judged on the canonical key the parser would
        // produce, so GRE's zeroed ports collapse correctly.
        let frame = build_frame(&spec);
        let ParseOutcome::Parsed(pkt) = parse_packet(&frame, 0) else {
            panic!("generator built an unparseable frame");
        };
        let (key, _) = CanonicalKey::from_tuple(&pkt.five_tuple());
        if seen.insert(key.key_bytes()) {
            flow_specs.push(Endpoints { spec });
        }
    }

    let mut stream = PacketStream::new();
    let base_ts = 1_700_000_000_000_000u64;
    for i in 0..packets {
        let ts = base_ts + i as u64 * 5 + rng.random_range(0..10);
        // Roughly one frame in fifty exercises the skip paths.
        match rng.random_range(0..100) {
            0 => {
                // ARP-sized non-IPv4 frame.
                let mut frame = vec![0u8; 60];
                frame[0] = 0x02;
                frame[6] = 0x02;
                frame[12] = 0x08;
                frame[13] = 0x06;
                stream.push(&frame, ts);
                continue;
            }
            1 => {
                // IPv4 ethertype but a truncated header.
                let donor = build_frame(&flow_specs[i % flows].spec);
                stream.push(&donor[..14 + 10], ts);
                continue;
            }
            _ => {}
        }

        let flow = &flow_specs[i % flows];
        let reverse = rng.random_bool(0.45);
        let mut spec = FrameSpec {
            frame_len: rng.random_range(64..=1514),
            ttl: rng.random_range(16..=255),
            ..flow.spec
        };
        if spec.protocol == 6 {
            spec.tcp_flags = rng.random_range(0..=0x3F);
            spec.tcp_window = rng.random_range(0..=65535);
        }
        if reverse {
            std::mem::swap(&mut spec.src_ip, &mut spec.dst_ip);
            std::mem::swap(&mut spec.src_port, &mut spec.dst_port);
        }
        stream.push(&build_frame(&spec), ts);
    }
    stream
}
