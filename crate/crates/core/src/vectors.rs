//! Golden vectors for cross-checking other implementations.
//!
//! Every file is plain text, one `key=value` record per line, `#` for
//! comments. Byte strings are lowercase hex.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::crypto::{compute_mac, derive_keystream, Direction, Scrambler64, SecurityContext};
use crate::shuffle::{parse_golden_permutations, GoldenPermutation};
use crate::wire::{internet_checksum, ChecksumVariant};

pub const PERMUTATION_SEEDS: [u64; 2] = [0x0123_4567_89AB_CDEF, 0];
pub const PERMUTATION_SIZES: [usize; 4] = [1, 2, 8, 112];

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn from_hex(s: &str) -> Result<Vec<u8>, String> {
    if !s.len().is_multiple_of(2) {
        return Err(format!("odd-length hex `{s}`"));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|e| e.to_string()))
        .collect()
}

fn sample_contexts() -> Vec<SecurityContext> {
    let mut key = [0u8; 16];
    key.iter_mut().enumerate().for_each(|(i, k)| *k = i as u8);
    let mut out = Vec::new();
    for (count, bearer, dir) in [
        (0, 0, Direction::Uplink),
        (1, 0, Direction::Uplink),
        (7, 3, Direction::Downlink),
        (0xFFFF_FFFF, 31, Direction::Downlink),
    ] {
        out.push(SecurityContext::new(key, count, bearer, dir).expect("valid bearer"));
    }
    out.push(SecurityContext::new([0xA5; 16], 42, 1, Direction::Uplink).expect("valid bearer"));
    out
}

fn ctx_fields(ctx: &SecurityContext) -> String {
    format!(
        "key={} count={} bearer={} direction={}",
        to_hex(ctx.key()),
        ctx.count(),
        ctx.bearer(),
        ctx.direction() as u8
    )
}

pub fn scrambler_vectors() -> String {
    let mut out = String::from("# SplitMix64 outputs: seed=<hex> outputs=<hex,...>\n");
    for seed in [0u64, 1, 0x0123_4567_89AB_CDEF] {
        let outputs: Vec<String> = Scrambler64::new(seed)
            .take(5)
            .map(|v| format!("{v:016x}"))
            .collect();
        let _ = writeln!(out, "seed={seed:016x} outputs={}", outputs.join(","));
    }
    out
}

pub fn checksum_vectors() -> String {
    let inputs: [&[u8]; 5] = [
        &[],
        &[0x01],
        &[0x00, 0x01, 0xF2, 0x03, 0xF4, 0xF5, 0xF6, 0xF7],
        &[
            0x13, 0x88, 0x17, 0x70, 0x00, 0x14, 0x00, 0x00, 0x43, 0x96, 0x00, 0x00, 0x41, 0xC8,
            0x00, 0x00, 0x40, 0x00, 0x00, 0x00,
        ],
        &[0xFF; 7],
    ];
    let mut out = String::from("# variant=<standard|inverted> data=<hex> checksum=<hex16>\n");
    for data in inputs {
        for variant in [ChecksumVariant::Standard, ChecksumVariant::Inverted] {
            let _ = writeln!(
                out,
                "variant={variant} data={} checksum={:04x}",
                to_hex(data),
                internet_checksum(data, variant)
            );
        }
    }
    out
}

pub fn keystream_vectors() -> String {
    let mut out = String::from("# key count bearer direction len keystream\n");
    for ctx in sample_contexts() {
        for len in [1, 8, 20, 24] {
            let ks = derive_keystream(&ctx, len).expect("len >= 1");
            let _ = writeln!(
                out,
                "{} len={len} keystream={}",
                ctx_fields(&ctx),
                to_hex(ks.as_bytes())
            );
        }
    }
    out
}

pub fn mac_vectors() -> String {
    let mut out = String::from("# key count bearer direction data tag\n");
    let payloads: [Vec<u8>; 3] = [vec![], (0..20).collect(), vec![0xFF; 33]];
    for ctx in sample_contexts() {
        for data in &payloads {
            let _ = writeln!(
                out,
                "{} data={} tag={}",
                ctx_fields(&ctx),
                to_hex(data),
                to_hex(&compute_mac(&ctx, data))
            );
        }
    }
    out
}

pub fn permutation_vectors() -> String {
    let mut out = String::from("# seed=<hex64> n=<size> table=<forward table>\n");
    for seed in PERMUTATION_SEEDS {
        for n in PERMUTATION_SIZES {
            let g = GoldenPermutation::generate(seed, n).expect("n >= 1");
            let _ = writeln!(out, "{g}");
        }
    }
    out
}

/// `(file name, contents)` for every vector file.
pub fn all_vector_files() -> Vec<(&'static str, String)> {
    vec![
        ("scrambler.txt", scrambler_vectors()),
        ("checksum.txt", checksum_vectors()),
        ("keystream.txt", keystream_vectors()),
        ("mac.txt", mac_vectors()),
        ("permutation.txt", permutation_vectors()),
    ]
}

fn records(text: &str) -> impl Iterator<Item = (usize, HashMap<&str, &str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split_whitespace().filter_map(|kv| kv.split_once('=')).collect()))
}

fn field<'a>(rec: &HashMap<&str, &'a str>, key: &str, line: usize) -> Result<&'a str, String> {
    rec.get(key)
        .copied()
        .ok_or_else(|| format!("line {line}: missing `{key}`"))
}

fn parse_ctx(rec: &HashMap<&str, &str>, line: usize) -> Result<SecurityContext, String> {
    let key: [u8; 16] = from_hex(field(rec, "key", line)?)?
        .try_into()
        .map_err(|_| format!("line {line}: key must be 16 bytes"))?;
    let num = |k| -> Result<u64, String> {
        field(rec, k, line)?
            .parse()
            .map_err(|e| format!("line {line}: {k}: {e}"))
    };
    let dir = Direction::try_from(num("direction")? as u8).map_err(|e| e.to_string())?;
    SecurityContext::new(key, num("count")? as u32, num("bearer")? as u8, dir)
        .map_err(|e| format!("line {line}: {e}"))
}

/// Recomputes every record of a vector file with this implementation.
/// Returns the number of records checked.
pub fn verify_vector_file(name: &str, text: &str) -> Result<usize, String> {
    let mut checked = 0;
    match name {
        "permutation.txt" => {
            for g in parse_golden_permutations(text).map_err(|e| e.to_string())? {
                if !g.reproduces() {
                    return Err(format!("permutation mismatch for seed {:016x}", g.seed));
                }
                checked += 1;
            }
        }
        _ => {
            for (line, rec) in records(text) {
                let ok = match name {
                    "scrambler.txt" => {
                        let seed = u64::from_str_radix(field(&rec, "seed", line)?, 16)
                            .map_err(|e| e.to_string())?;
                        field(&rec, "outputs", line)?
                            .split(',')
                            .zip(Scrambler64::new(seed))
                            .all(|(want, got)| u64::from_str_radix(want, 16) == Ok(got))
                    }
                    "checksum.txt" => {
                        let variant: ChecksumVariant = field(&rec, "variant", line)?.parse()?;
                        let data = from_hex(field(&rec, "data", line)?)?;
                        let want = u16::from_str_radix(field(&rec, "checksum", line)?, 16)
                            .map_err(|e| e.to_string())?;
                        internet_checksum(&data, variant) == want
                    }
                    "keystream.txt" => {
                        let ctx = parse_ctx(&rec, line)?;
                        let want = from_hex(field(&rec, "keystream", line)?)?;
                        derive_keystream(&ctx, want.len())
                            .map(|k| k.as_bytes() == want.as_slice())
                            .unwrap_or(false)
                    }
                    "mac.txt" => {
                        let ctx = parse_ctx(&rec, line)?;
                        let data = from_hex(field(&rec, "data", line)?)?;
                        let want = from_hex(field(&rec, "tag", line)?)?;
                        compute_mac(&ctx, &data).as_slice() == want.as_slice()
                    }
                    other => return Err(format!("unknown vector file `{other}`")),
                };
                if !ok {
                    return Err(format!("{name} line {line}: mismatch"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}
