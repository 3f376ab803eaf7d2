//! Keystream-seeded bit shuffling.
//!
//! The sender ciphers, then moves every bit of the protected region
//! (checksum, payload, and the tag when present) to a position chosen by a
//! Fisher-Yates permutation seeded from that packet's keystream. The
//! receiver rebuilds the same table from the same keystream and undoes it
//! before deciphering. The wire keeps its length.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::crypto::{fold_be64, scramble, Scrambler64};
use crate::wire::{get_bit, set_bit, WireLayout};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShuffleError {
    #[error("cannot derive a permutation seed from an empty keystream")]
    EmptyKeystream,
    #[error("permutation size must be at least 1")]
    EmptyTable,
    #[error("table is not a permutation of 0..{0}")]
    NotBijective(usize),
    #[error("region has {region} bits but table has {table} entries")]
    SizeMismatch { region: usize, table: usize },
    #[error("bit {bit} is outside a {wire_bits}-bit wire")]
    OutOfRange { bit: usize, wire_bits: usize },
    #[error("region indices must be strictly increasing")]
    NotIncreasing,
    #[error("line {line}: {reason}")]
    BadVectorLine { line: usize, reason: String },
}

/// Reduces a keystream to one 64-bit permutation seed.
pub fn derive_prp_seed(keystream: &[u8]) -> Result<u64, ShuffleError> {
    if keystream.is_empty() {
        return Err(ShuffleError::EmptyKeystream);
    }
    Ok(scramble(fold_be64(keystream)))
}

/// Forward permutation table: the bit at region position `i` is sent to
/// region position `table[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PermutationTable(Vec<usize>);

impl PermutationTable {
    pub fn from_vec(table: Vec<usize>) -> Result<Self, ShuffleError> {
        let n = table.len();
        let mut seen = vec![false; n];
        for &t in &table {
            if t >= n || std::mem::replace(&mut seen[t], true) {
                return Err(ShuffleError::NotBijective(n));
            }
        }
        Ok(PermutationTable(table))
    }

    pub fn identity(n: usize) -> Self {
        PermutationTable((0..n).collect())
    }

    /// Durstenfeld's Fisher-Yates: for `i` from `n-1` down to 1, swap `i`
    /// with `next % (i+1)`, drawing from a scrambler seeded with `seed`.
    pub fn build(seed: u64, n: usize) -> Result<Self, ShuffleError> {
        if n == 0 {
            return Err(ShuffleError::EmptyTable);
        }
        let mut table: Vec<usize> = (0..n).collect();
        let mut rng = Scrambler64::new(seed);
        for i in (1..n).rev() {
            let j = rng.below(i + 1);
            table.swap(i, j);
        }
        Ok(PermutationTable(table))
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &t) in self.0.iter().enumerate() {
            inv[t] = i;
        }
        PermutationTable(inv)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl std::ops::Index<usize> for PermutationTable {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

pub fn invert_permutation(table: &[usize]) -> Result<PermutationTable, ShuffleError> {
    Ok(PermutationTable::from_vec(table.to_vec())?.inverse())
}

/// Ordered absolute bit indices that the shuffle may move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedRegion(Vec<usize>);

impl ProtectedRegion {
    pub fn new(bits: Vec<usize>) -> Result<Self, ShuffleError> {
        if bits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ShuffleError::NotIncreasing);
        }
        Ok(ProtectedRegion(bits))
    }

    /// Checksum field, payload, then tag. Ports and length stay in place so
    /// the receiver can frame the packet before unshuffling.
    pub fn for_layout(layout: &WireLayout) -> Self {
        let bits = layout
            .checksum_bits()
            .chain(layout.payload_bits())
            .chain(layout.mac_bits())
            .collect();
        ProtectedRegion(bits)
    }

    pub fn bits(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Region position of an absolute bit, if the bit is protected.
    pub fn position_of(&self, bit: usize) -> Option<usize> {
        self.0.binary_search(&bit).ok()
    }

    fn check(&self, wire: &[u8], table: &PermutationTable) -> Result<(), ShuffleError> {
        if self.0.len() != table.len() {
            return Err(ShuffleError::SizeMismatch {
                region: self.0.len(),
                table: table.len(),
            });
        }
        let wire_bits = wire.len() * 8;
        match self.0.last() {
            Some(&bit) if bit >= wire_bits => Err(ShuffleError::OutOfRange { bit, wire_bits }),
            _ => Ok(()),
        }
    }
}

pub fn shuffle_bits(
    wire: &[u8],
    region: &ProtectedRegion,
    table: &PermutationTable,
) -> Result<Vec<u8>, ShuffleError> {
    region.check(wire, table)?;
    let bits = region.bits();
    let mut out = wire.to_vec();
    for (i, &src) in bits.iter().enumerate() {
        set_bit(&mut out, bits[table[i]], get_bit(wire, src));
    }
    Ok(out)
}

pub fn unshuffle_bits(
    wire: &[u8],
    region: &ProtectedRegion,
    table: &PermutationTable,
) -> Result<Vec<u8>, ShuffleError> {
    region.check(wire, table)?;
    let bits = region.bits();
    let mut out = wire.to_vec();
    for (i, &dst) in bits.iter().enumerate() {
        set_bit(&mut out, dst, get_bit(wire, bits[table[i]]));
    }
    Ok(out)
}

/// One line of the permutation golden-vector file:
/// `seed=0x0123456789abcdef n=8 table=6,7,1,4,0,2,3,5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenPermutation {
    pub seed: u64,
    pub table: PermutationTable,
}

impl GoldenPermutation {
    pub fn generate(seed: u64, n: usize) -> Result<Self, ShuffleError> {
        Ok(GoldenPermutation {
            seed,
            table: PermutationTable::build(seed, n)?,
        })
    }

    /// True if this implementation reproduces the recorded table.
    pub fn reproduces(&self) -> bool {
        PermutationTable::build(self.seed, self.table.len()).as_ref() == Ok(&self.table)
    }
}

impl fmt::Display for GoldenPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seed=0x{:016x} n={} table=", self.seed, self.table.len())?;
        for (i, t) in self.table.as_slice().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for GoldenPermutation {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let mut seed = None;
        let mut n = None;
        let mut table = None;
        for part in line.split_whitespace() {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            match key {
                "seed" => {
                    let hex = value.strip_prefix("0x").unwrap_or(value);
                    seed = Some(u64::from_str_radix(hex, 16).map_err(|e| e.to_string())?);
                }
                "n" => n = Some(value.parse::<usize>().map_err(|e| e.to_string())?),
                "table" => {
                    let entries = value
                        .split(',')
                        .map(|t| t.parse::<usize>().map_err(|e| e.to_string()))
                        .collect::<Result<Vec<_>, _>>()?;
                    table = Some(PermutationTable::from_vec(entries).map_err(|e| e.to_string())?);
                }
                other => return Err(format!("unknown key `{other}`")),
            }
        }
        let seed = seed.ok_or("missing seed")?;
        let table = table.ok_or("missing table")?;
        if n != Some(table.len()) {
            return Err("n does not match table length".into());
        }
        Ok(GoldenPermutation { seed, table })
    }
}

/// Parses a golden-vector file, skipping blank lines and `#` comments.
pub fn parse_golden_permutations(text: &str) -> Result<Vec<GoldenPermutation>, ShuffleError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.parse().map_err(|reason| ShuffleError::BadVectorLine {
                line: i + 1,
                reason,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_small_tables() {
        assert_eq!(PermutationTable::build(99, 1).unwrap().as_slice(), &[0]);
        assert_eq!(PermutationTable::build(0, 0), Err(ShuffleError::EmptyTable));
        // Frozen from an independent Python run of the same draw sequence.
        assert_eq!(
            PermutationTable::build(0x0123_4567_89AB_CDEF, 8)
                .unwrap()
                .as_slice(),
            &[6, 7, 1, 4, 0, 2, 3, 5]
        );
    }

    #[test]
    fn inversion() {
        assert_eq!(invert_permutation(&[2, 0, 1]).unwrap().as_slice(), &[1, 2, 0]);
        assert_eq!(PermutationTable::identity(5).inverse(), PermutationTable::identity(5));
        assert_eq!(
            invert_permutation(&[0, 0, 1]),
            Err(ShuffleError::NotBijective(3))
        );
        assert_eq!(invert_permutation(&[0, 3]), Err(ShuffleError::NotBijective(2)));
    }

    #[test]
    fn prp_seed() {
        assert_eq!(derive_prp_seed(&[0; 8]).unwrap(), scramble(0));
        assert_eq!(derive_prp_seed(&[]), Err(ShuffleError::EmptyKeystream));
        let ks: Vec<u8> = (1..=16).collect();
        let folded = u64::from_be_bytes(ks[..8].try_into().unwrap())
            ^ u64::from_be_bytes(ks[8..].try_into().unwrap());
        assert_eq!(derive_prp_seed(&ks).unwrap(), scramble(folded));
    }

    #[test]
    fn two_bit_region_swaps() {
        let region = ProtectedRegion::new(vec![3, 12]).unwrap();
        let table = PermutationTable::from_vec(vec![1, 0]).unwrap();
        let wire = [0b0001_0000, 0b0000_0000];
        let out = shuffle_bits(&wire, &region, &table).unwrap();
        assert_eq!(out, [0b0000_0000, 0b0000_1000]);
        assert_eq!(unshuffle_bits(&out, &region, &table).unwrap(), wire);
    }

    #[test]
    fn region_validation() {
        assert_eq!(
            ProtectedRegion::new(vec![4, 4]),
            Err(ShuffleError::NotIncreasing)
        );
        let region = ProtectedRegion::new(vec![1, 20]).unwrap();
        let t2 = PermutationTable::identity(2);
        assert_eq!(
            shuffle_bits(&[0, 0], &region, &t2),
            Err(ShuffleError::OutOfRange {
                bit: 20,
                wire_bits: 16
            })
        );
        assert_eq!(
            shuffle_bits(&[0; 4], &region, &PermutationTable::identity(3)),
            Err(ShuffleError::SizeMismatch {
                region: 2,
                table: 3
            })
        );
    }

    #[test]
    fn layout_region_is_checksum_payload_and_tag() {
        let r = ProtectedRegion::for_layout(&WireLayout::new(12, false));
        assert_eq!(r.len(), 112);
        assert_eq!(r.bits()[0], 48);
        assert_eq!(*r.bits().last().unwrap(), 159);
        let r = ProtectedRegion::for_layout(&WireLayout::new(12, true));
        assert_eq!(r.len(), 144);
        assert_eq!(r.position_of(48), Some(0));
        assert_eq!(r.position_of(47), None);
    }

    #[test]
    fn tampered_bit_lands_at_inverse_position() {
        let layout = WireLayout::new(12, false);
        let region = ProtectedRegion::for_layout(&layout);
        let table = PermutationTable::build(7, region.len()).unwrap();
        let wire: Vec<u8> = (0..20).map(|i| (i * 37) as u8).collect();
        let shuffled = shuffle_bits(&wire, &region, &table).unwrap();
        let inv = table.inverse();
        for pos in [0, 5, 50, 111] {
            let mut tampered = shuffled.clone();
            crate::wire::flip_bit(&mut tampered, region.bits()[pos]);
            let back = unshuffle_bits(&tampered, &region, &table).unwrap();
            let diff: Vec<usize> = (0..160)
                .filter(|&b| get_bit(&back, b) != get_bit(&wire, b))
                .collect();
            assert_eq!(diff, vec![region.bits()[inv[pos]]]);
        }
    }

    #[test]
    fn golden_line_round_trip() {
        let g = GoldenPermutation::generate(0x0123_4567_89AB_CDEF, 8).unwrap();
        assert_eq!(g.to_string(), "seed=0x0123456789abcdef n=8 table=6,7,1,4,0,2,3,5");
        assert_eq!(g.to_string().parse::<GoldenPermutation>().unwrap(), g);
        assert!(g.reproduces());
        let text = format!("# header\n\n{g}\nseed=0x1 n=2 table=0,0\n");
        assert!(matches!(
            parse_golden_permutations(&text),
            Err(ShuffleError::BadVectorLine { line: 4, .. })
        ));
    }
}
