//! Man-in-the-middle attacker.
//!
//! The attacker cannot decipher anything. It knows the wire layout and
//! flips ciphertext bits, which flips the same plaintext bits after
//! deciphering. Planning therefore takes only a [`WireLayout`] and a seed.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::crypto::Scrambler64;
use crate::wire::{column, flip_bit, Field, WireLayout, CHECKSUM_BIT_OFFSET, WORD_BITS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("a checksum attack needs at least one pair")]
    ZeroPairs,
    #[error("{0} pairs requested but only 16 checksum columns exist")]
    TooManyPairs(usize),
    #[error("bits {0} and {1} are not in the same column")]
    Misaligned(usize, usize),
    #[error("bit {0} is flipped more than once")]
    Duplicate(usize),
    #[error("bit {0} is outside the checksum and payload fields")]
    OutsideRegion(usize),
    #[error("bit {bit} is outside a {wire_bits}-bit wire")]
    OutOfRange { bit: usize, wire_bits: usize },
    #[error("no payload bit available in column {0}")]
    NoCandidate(usize),
    #[error("checksum column {0} is used by more than one pair")]
    ColumnReused(usize),
    #[error("{0} positions cannot be grouped into pairs")]
    Unpaired(usize),
    #[error("float bit index {0} out of range (0-31)")]
    BadFloatBit(u8),
    #[error("cannot parse attack `{0}`")]
    Parse(String),
}

/// Which float bit to target. Bit 0 is the sign; the exponent occupies
/// bits 1-8 and the mantissa 9-31.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FloatBit {
    Sign,
    ExponentSecondMsb,
    MantissaMsb,
    Index(u8),
}

impl FloatBit {
    pub fn index(self) -> usize {
        match self {
            FloatBit::Sign => 0,
            FloatBit::ExponentSecondMsb => 2,
            FloatBit::MantissaMsb => 9,
            FloatBit::Index(i) => i as usize,
        }
    }
}

impl fmt::Display for FloatBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FloatBit::Sign => f.write_str("sign"),
            FloatBit::ExponentSecondMsb => f.write_str("exp2"),
            FloatBit::MantissaMsb => f.write_str("mant"),
            FloatBit::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FloatFieldTarget {
    pub field: Field,
    pub bit: FloatBit,
}

impl FloatFieldTarget {
    pub fn new(field: Field, bit: FloatBit) -> Result<Self, AttackError> {
        if let FloatBit::Index(i) = bit {
            if i > 31 {
                return Err(AttackError::BadFloatBit(i));
            }
        }
        Ok(FloatFieldTarget { field, bit })
    }

    pub fn absolute_bit(&self) -> usize {
        self.field.base_bit() + self.bit.index()
    }
}

impl fmt::Display for FloatFieldTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.field, self.bit)
    }
}

impl FromStr for FloatFieldTarget {
    type Err = AttackError;

    /// `<field>.<bit>` with bit one of `sign`, `exp2`, `mant` or `0`..`31`.
    fn from_str(s: &str) -> Result<Self, AttackError> {
        let bad = || AttackError::Parse(s.to_string());
        let (field, bit) = s.trim().split_once('.').ok_or_else(bad)?;
        let field: Field = field.parse().map_err(|_| bad())?;
        let bit = match bit {
            "sign" => FloatBit::Sign,
            "exp2" | "exponent-second-msb" => FloatBit::ExponentSecondMsb,
            "mant" | "mantissa-msb" => FloatBit::MantissaMsb,
            n => FloatBit::Index(n.parse().map_err(|_| bad())?),
        };
        FloatFieldTarget::new(field, bit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    ChecksumPair,
    PayloadPair,
    Custom,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::ChecksumPair => "checksum",
            Strategy::PayloadPair => "payload",
            Strategy::Custom => "custom",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Concrete bit positions to flip on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackSpec {
    strategy: Strategy,
    positions: Vec<usize>,
}

impl AttackSpec {
    /// Validates the threat-model constraints: distinct positions, all within
    /// the checksum field or payload, and the pairing rules of the strategy.
    /// Pairs are laid out as consecutive positions.
    pub fn new(
        strategy: Strategy,
        positions: Vec<usize>,
        layout: &WireLayout,
    ) -> Result<Self, AttackError> {
        let mut seen = HashSet::new();
        for &p in &positions {
            if !seen.insert(p) {
                return Err(AttackError::Duplicate(p));
            }
            if !layout.checksum_bits().contains(&p) && !layout.payload_bits().contains(&p) {
                return Err(AttackError::OutsideRegion(p));
            }
        }
        match strategy {
            Strategy::Custom => {}
            Strategy::ChecksumPair | Strategy::PayloadPair => {
                if !positions.len().is_multiple_of(2) || positions.is_empty() {
                    return Err(AttackError::Unpaired(positions.len()));
                }
                let mut columns = HashSet::new();
                for pair in positions.chunks_exact(2) {
                    let (a, b) = (pair[0], pair[1]);
                    if column(a) != column(b) {
                        return Err(AttackError::Misaligned(a, b));
                    }
                    let want_checksum = strategy == Strategy::ChecksumPair;
                    if layout.checksum_bits().contains(&a) != want_checksum {
                        return Err(AttackError::OutsideRegion(a));
                    }
                    if !layout.payload_bits().contains(&b) {
                        return Err(AttackError::OutsideRegion(b));
                    }
                    if want_checksum && !columns.insert(column(a)) {
                        return Err(AttackError::ColumnReused(column(a)));
                    }
                }
            }
        }
        Ok(AttackSpec {
            strategy,
            positions,
        })
    }

    pub fn empty() -> Self {
        AttackSpec {
            strategy: Strategy::Custom,
            positions: Vec::new(),
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn flips(&self) -> usize {
        self.positions.len()
    }
}

/// Random checksum-pair attack: `pairs` distinct checksum columns, each
/// matched with a uniformly drawn payload bit in the same column.
pub fn plan_checksum_attack(
    layout: &WireLayout,
    rng_seed: u64,
    pairs: usize,
) -> Result<AttackSpec, AttackError> {
    plan_checksum_attack_in(layout, rng_seed, pairs, None)
}

/// Like [`plan_checksum_attack`] but payload bits are drawn only from one
/// float field.
pub fn plan_checksum_attack_in(
    layout: &WireLayout,
    rng_seed: u64,
    pairs: usize,
    field: Option<Field>,
) -> Result<AttackSpec, AttackError> {
    if pairs == 0 {
        return Err(AttackError::ZeroPairs);
    }
    if pairs > WORD_BITS {
        return Err(AttackError::TooManyPairs(pairs));
    }
    let mut rng = Scrambler64::new(rng_seed);
    let mut columns: Vec<usize> = (0..WORD_BITS).collect();
    let mut positions = Vec::with_capacity(2 * pairs);
    for i in 0..pairs {
        let j = i + rng.below(WORD_BITS - i);
        columns.swap(i, j);
        let col = columns[i];
        let candidates: Vec<usize> = layout
            .payload_bits_in_column(col)
            .filter(|b| field.is_none_or(|f| (f.base_bit()..f.base_bit() + 32).contains(b)))
            .collect();
        if candidates.is_empty() {
            return Err(AttackError::NoCandidate(col));
        }
        positions.push(CHECKSUM_BIT_OFFSET + col);
        positions.push(candidates[rng.below(candidates.len())]);
    }
    AttackSpec::new(Strategy::ChecksumPair, positions, layout)
}

/// Two column-aligned payload bits chosen by name.
pub fn plan_payload_attack(
    layout: &WireLayout,
    a: FloatFieldTarget,
    b: FloatFieldTarget,
) -> Result<AttackSpec, AttackError> {
    let (pa, pb) = (a.absolute_bit(), b.absolute_bit());
    if column(pa) != column(pb) {
        return Err(AttackError::Misaligned(pa, pb));
    }
    AttackSpec::new(Strategy::PayloadPair, vec![pa, pb], layout)
}

pub fn apply_flips(wire: &[u8], spec: &AttackSpec) -> Result<Vec<u8>, AttackError> {
    let wire_bits = wire.len() * 8;
    if let Some(&bit) = spec.positions.iter().find(|&&p| p >= wire_bits) {
        return Err(AttackError::OutOfRange { bit, wire_bits });
    }
    let mut out = wire.to_vec();
    for &p in &spec.positions {
        flip_bit(&mut out, p);
    }
    Ok(out)
}

/// An attack recipe, realized into an [`AttackSpec`] per packet.
///
/// Text forms: `checksum:k=<n>[,field=<field>]`,
/// `payload:<field>.<bit>,<field>.<bit>`, `custom:<pos>,<pos>,...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackPlan {
    Checksum { pairs: usize, field: Option<Field> },
    Payload(FloatFieldTarget, FloatFieldTarget),
    Custom(Vec<usize>),
}

impl AttackPlan {
    pub fn strategy(&self) -> Strategy {
        match self {
            AttackPlan::Checksum { .. } => Strategy::ChecksumPair,
            AttackPlan::Payload(..) => Strategy::PayloadPair,
            AttackPlan::Custom(_) => Strategy::Custom,
        }
    }

    pub fn flips(&self) -> usize {
        match self {
            AttackPlan::Checksum { pairs, .. } => 2 * pairs,
            AttackPlan::Payload(..) => 2,
            AttackPlan::Custom(p) => p.len(),
        }
    }

    /// Fixed plans ignore the seed.
    pub fn realize(&self, layout: &WireLayout, rng_seed: u64) -> Result<AttackSpec, AttackError> {
        match self {
            AttackPlan::Checksum { pairs, field } => {
                plan_checksum_attack_in(layout, rng_seed, *pairs, *field)
            }
            AttackPlan::Payload(a, b) => plan_payload_attack(layout, *a, *b),
            AttackPlan::Custom(p) => AttackSpec::new(Strategy::Custom, p.clone(), layout),
        }
    }
}

impl fmt::Display for AttackPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackPlan::Checksum { pairs, field: None } => write!(f, "checksum:k={pairs}"),
            AttackPlan::Checksum {
                pairs,
                field: Some(field),
            } => write!(f, "checksum:k={pairs},field={field}"),
            AttackPlan::Payload(a, b) => write!(f, "payload:{a},{b}"),
            AttackPlan::Custom(p) => {
                let list: Vec<String> = p.iter().map(usize::to_string).collect();
                write!(f, "custom:{}", list.join(","))
            }
        }
    }
}

impl FromStr for AttackPlan {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, AttackError> {
        let bad = || AttackError::Parse(s.to_string());
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind {
            "checksum" => {
                let mut pairs = None;
                let mut field = None;
                for arg in args.split(',') {
                    match arg.split_once('=') {
                        Some(("k", n)) => pairs = Some(n.parse().map_err(|_| bad())?),
                        Some(("field", f)) => field = Some(f.parse().map_err(|_| bad())?),
                        _ => return Err(bad()),
                    }
                }
                let pairs = pairs.ok_or_else(bad)?;
                if pairs == 0 {
                    return Err(AttackError::ZeroPairs);
                }
                if pairs > WORD_BITS {
                    return Err(AttackError::TooManyPairs(pairs));
                }
                Ok(AttackPlan::Checksum { pairs, field })
            }
            "payload" => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                let (a, b): (FloatFieldTarget, FloatFieldTarget) = (a.parse()?, b.parse()?);
                if column(a.absolute_bit()) != column(b.absolute_bit()) {
                    return Err(AttackError::Misaligned(a.absolute_bit(), b.absolute_bit()));
                }
                Ok(AttackPlan::Payload(a, b))
            }
            "custom" => args
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()
                .map(AttackPlan::Custom),
            _ => Err(bad()),
        }
    }
}
