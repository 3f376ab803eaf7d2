//! Test-only oracles. Nothing here calls into the checksum, scrambler or
//! permutation code it is used to check.

#![allow(dead_code)]

pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Plain SplitMix64, written out independently of the crate.
pub struct RefSplitMix(pub u64);

impl RefSplitMix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GAMMA);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// One's-complement sum via integer arithmetic mod 0xFFFF instead of
/// end-around carry. Returns the folded value (0 only for all-zero data).
pub fn ref_sum(bytes: &[u8]) -> u16 {
    let mut total: u64 = 0;
    for i in (0..bytes.len()).step_by(2) {
        let hi = bytes[i] as u64;
        let lo = if i + 1 < bytes.len() { bytes[i + 1] as u64 } else { 0 };
        total += hi * 256 + lo;
    }
    if total == 0 {
        0
    } else {
        match total % 0xFFFF {
            0 => 0xFFFF,
            r => r as u16,
        }
    }
}

/// Checksum the receiver would accept for `datagram` (bytes 6-7 ignored).
/// `inverted` stores the raw sum instead of its complement.
pub fn ref_expected_checksum(datagram: &[u8], inverted: bool) -> u16 {
    let mut d = datagram.to_vec();
    d[6] = 0;
    d[7] = 0;
    let s = ref_sum(&d);
    if inverted {
        s
    } else {
        !s
    }
}

pub fn ref_accepts(datagram: &[u8], inverted: bool) -> bool {
    let stored = u16::from_be_bytes([datagram[6], datagram[7]]);
    ref_expected_checksum(datagram, inverted) == stored
}

pub fn bit(bytes: &[u8], b: usize) -> u8 {
    (bytes[b / 8] >> (7 - b % 8)) & 1
}

pub fn flip(bytes: &mut [u8], b: usize) {
    bytes[b / 8] ^= 0x80 >> (b % 8);
}

/// Plaintext-level oracle: does the checksum still verify after flipping
/// `positions` of the plaintext datagram?
pub fn oracle_accepts_flips(plaintext: &[u8], positions: &[usize], inverted: bool) -> bool {
    let mut t = plaintext.to_vec();
    for &p in positions {
        flip(&mut t, p);
    }
    ref_accepts(&t, inverted)
}

/// Builds a plaintext datagram with the reference checksum filled in.
pub fn ref_datagram(src: u16, dst: u16, payload: &[u8], inverted: bool) -> Vec<u8> {
    let len = (8 + payload.len()) as u16;
    let mut d = Vec::new();
    d.extend_from_slice(&src.to_be_bytes());
    d.extend_from_slice(&dst.to_be_bytes());
    d.extend_from_slice(&len.to_be_bytes());
    d.extend_from_slice(&[0, 0]);
    d.extend_from_slice(payload);
    let c = ref_expected_checksum(&d, inverted);
    d[6..8].copy_from_slice(&c.to_be_bytes());
    d
}

/// Fraction of unordered pairs of distinct region bits that share a column.
pub fn exact_alignment_fraction(region: &[usize]) -> f64 {
    let mut aligned = 0u64;
    let mut total = 0u64;
    for i in 0..region.len() {
        for j in i + 1..region.len() {
            total += 1;
            if region[i] % 16 == region[j] % 16 {
                aligned += 1;
            }
        }
    }
    aligned as f64 / total as f64
}

/// Success matrix `m[checksum_bit][payload_bit]` of a single aligned
/// checksum-pair flip, found by brute force over random datagrams and all
/// 16 columns. Panics if the outcome ever depends on anything besides the
/// two plaintext bits.
pub fn brute_force_checksum_matrix(inverted: bool) -> [[bool; 2]; 2] {
    let mut rng = RefSplitMix(0xC0FF_EE00 ^ inverted as u64);
    let mut seen: [[Option<bool>; 2]; 2] = [[None; 2]; 2];
    let mut hits = [[[0u32; 2]; 2]; 16];
    while hits.iter().flatten().flatten().any(|&h| h < 8) {
        let mut payload = [0u8; 12];
        for b in payload.iter_mut() {
            *b = rng.next() as u8;
        }
        let d = ref_datagram(rng.next() as u16, rng.next() as u16, &payload, inverted);
        let col = (rng.next() % 16) as usize;
        let word = (rng.next() % 6) as usize;
        let cs_bit = 48 + col;
        let pl_bit = 64 + 16 * word + col;
        let (cb, pb) = (bit(&d, cs_bit) as usize, bit(&d, pl_bit) as usize);
        let ok = oracle_accepts_flips(&d, &[cs_bit, pl_bit], inverted);
        match seen[cb][pb] {
            None => seen[cb][pb] = Some(ok),
            Some(prev) => assert_eq!(prev, ok, "checksum-pair outcome is not a function of the two bits"),
        }
        hits[col][cb][pb] += 1;
    }
    seen.map(|row| row.map(|c| c.expect("combination observed")))
}

/// Same for two aligned payload bits.
pub fn brute_force_payload_matrix() -> [[bool; 2]; 2] {
    let mut rng = RefSplitMix(0x0BAD_C0DE);
    let mut seen: [[Option<bool>; 2]; 2] = [[None; 2]; 2];
    for _ in 0..20_000 {
        let mut payload = [0u8; 12];
        for b in payload.iter_mut() {
            *b = rng.next() as u8;
        }
        let d = ref_datagram(5000, 6000, &payload, false);
        let col = (rng.next() % 16) as usize;
        let w1 = (rng.next() % 6) as usize;
        let w2 = (w1 + 1 + (rng.next() % 5) as usize) % 6;
        let (p1, p2) = (64 + 16 * w1 + col, 64 + 16 * w2 + col);
        let (b1, b2) = (bit(&d, p1) as usize, bit(&d, p2) as usize);
        let ok = oracle_accepts_flips(&d, &[p1, p2], false);
        match seen[b1][b2] {
            None => seen[b1][b2] = Some(ok),
            Some(prev) => assert_eq!(prev, ok),
        }
    }
    seen.map(|row| row.map(|c| c.expect("combination observed")))
}
