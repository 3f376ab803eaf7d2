//! Deterministic stand-ins for the ciphering (keystream XOR) and integrity
//! (32-bit MAC) algorithms, built on a SplitMix64 scrambler.
//!
//! None of this is secure. The attack and the defense only depend on the
//! cipher being "plaintext XOR fresh keystream", so any reproducible
//! generator serves.

use thiserror::Error;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;
/// "NIA-STAN": separates MAC seeding from keystream seeding.
pub const MAC_DOMAIN: u64 = 0x4E49_412D_5354_414E;
pub const KEY_LEN: usize = 16;
pub const TAG_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("keystream length must be at least 1")]
    EmptyKeystream,
    #[error("data is {data} bytes but keystream is {keystream}")]
    LengthMismatch { data: usize, keystream: usize },
    #[error("bearer {0} out of range (must be < 32)")]
    BadBearer(u8),
    #[error("direction {0} out of range (must be 0 or 1)")]
    BadDirection(u8),
    #[error("fixed keystream holds {available} bytes, {requested} requested")]
    KeystreamExhausted { available: usize, requested: usize },
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(MIX_MUL_1);
    z ^= z >> 27;
    z = z.wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// One scrambler step from state `x`: the first output of a generator
/// seeded with `x`.
#[inline]
pub fn scramble(x: u64) -> u64 {
    mix(x.wrapping_add(GOLDEN_GAMMA))
}

/// SplitMix64 generator. Shared by the cipher, the MAC, the permutation
/// and every seeded choice in the simulator.
#[derive(Debug, Clone)]
pub struct Scrambler64 {
    state: u64,
}

impl Scrambler64 {
    pub fn new(seed: u64) -> Self {
        Scrambler64 { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// `next % bound`. The modulo bias is at most `bound / 2^64`.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(8) {
            let word = self.next_u64().to_be_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}

impl Iterator for Scrambler64 {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        Some(self.next_u64())
    }
}

/// XOR of consecutive 8-byte big-endian chunks; a short last chunk is
/// zero-padded on the right.
pub fn fold_be64(bytes: &[u8]) -> u64 {
    bytes.chunks(8).fold(0, |acc, chunk| {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        acc ^ u64::from_be_bytes(word)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Direction {
    #[default]
    Uplink = 0,
    Downlink = 1,
}

impl TryFrom<u8> for Direction {
    type Error = CryptoError;

    fn try_from(v: u8) -> Result<Self, CryptoError> {
        match v {
            0 => Ok(Direction::Uplink),
            1 => Ok(Direction::Downlink),
            other => Err(CryptoError::BadDirection(other)),
        }
    }
}

/// Shared key plus the per-packet control parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecurityContext {
    key: [u8; KEY_LEN],
    count: u32,
    bearer: u8,
    direction: Direction,
}

impl SecurityContext {
    pub fn new(
        key: [u8; KEY_LEN],
        count: u32,
        bearer: u8,
        direction: Direction,
    ) -> Result<Self, CryptoError> {
        if bearer >= 32 {
            return Err(CryptoError::BadBearer(bearer));
        }
        Ok(SecurityContext {
            key,
            count,
            bearer,
            direction,
        })
    }

    pub fn key(&self) -> &[u8; KEY_LEN] {
        &self.key
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn bearer(&self) -> u8 {
        self.bearer
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn with_count(mut self, count: u32) -> Self {
        self.count = count;
        self
    }

    fn key_fold(&self) -> u64 {
        fold_be64(&self.key)
    }

    fn control_word(&self) -> u64 {
        u64::from(self.bearer) * 2 + self.direction as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keystream(Vec<u8>);

impl Keystream {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, CryptoError> {
        if bytes.is_empty() {
            return Err(CryptoError::EmptyKeystream);
        }
        Ok(Keystream(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for Keystream {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Produces the per-packet keystream.
pub trait KeystreamGenerator {
    fn keystream(&self, ctx: &SecurityContext, len: usize) -> Result<Keystream, CryptoError>;
}

/// Produces and checks 32-bit tags.
pub trait MacGenerator {
    fn tag(&self, ctx: &SecurityContext, data: &[u8]) -> [u8; TAG_LEN];

    fn verify(&self, ctx: &SecurityContext, data: &[u8], tag: &[u8; TAG_LEN]) -> bool {
        self.tag(ctx, data) == *tag
    }
}

/// The reference scrambler-based keystream.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScramblerKeystream;

impl KeystreamGenerator for ScramblerKeystream {
    fn keystream(&self, ctx: &SecurityContext, len: usize) -> Result<Keystream, CryptoError> {
        derive_keystream(ctx, len)
    }
}

/// The reference scrambler-based MAC.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScramblerMac;

impl MacGenerator for ScramblerMac {
    fn tag(&self, ctx: &SecurityContext, data: &[u8]) -> [u8; TAG_LEN] {
        compute_mac(ctx, data)
    }
}

/// Ignores the context and hands out a prefix of a fixed byte string.
/// Used to replay recorded ciphertexts and to steer tests.
#[derive(Debug, Clone)]
pub struct FixedKeystream(pub Vec<u8>);

impl KeystreamGenerator for FixedKeystream {
    fn keystream(&self, _ctx: &SecurityContext, len: usize) -> Result<Keystream, CryptoError> {
        if len > self.0.len() {
            return Err(CryptoError::KeystreamExhausted {
                available: self.0.len(),
                requested: len,
            });
        }
        Keystream::from_bytes(self.0[..len].to_vec())
    }
}

impl<T: KeystreamGenerator + ?Sized> KeystreamGenerator for &T {
    fn keystream(&self, ctx: &SecurityContext, len: usize) -> Result<Keystream, CryptoError> {
        (**self).keystream(ctx, len)
    }
}

impl<T: MacGenerator + ?Sized> MacGenerator for &T {
    fn tag(&self, ctx: &SecurityContext, data: &[u8]) -> [u8; TAG_LEN] {
        (**self).tag(ctx, data)
    }
}

pub fn derive_keystream(ctx: &SecurityContext, len: usize) -> Result<Keystream, CryptoError> {
    if len == 0 {
        return Err(CryptoError::EmptyKeystream);
    }
    let s0 = scramble(ctx.key_fold());
    let s1 = scramble(s0 ^ u64::from(ctx.count));
    let s2 = scramble(s1 ^ ctx.control_word());
    let mut bytes = vec![0u8; len];
    Scrambler64::new(s2).fill_bytes(&mut bytes);
    Ok(Keystream(bytes))
}

pub fn xor_cipher(data: &[u8], ks: &Keystream) -> Result<Vec<u8>, CryptoError> {
    let mut out = data.to_vec();
    xor_in_place(&mut out, ks)?;
    Ok(out)
}

pub fn xor_in_place(data: &mut [u8], ks: &Keystream) -> Result<(), CryptoError> {
    if data.len() != ks.len() {
        return Err(CryptoError::LengthMismatch {
            data: data.len(),
            keystream: ks.len(),
        });
    }
    data.iter_mut().zip(ks.as_bytes()).for_each(|(d, k)| *d ^= k);
    Ok(())
}

pub fn compute_mac(ctx: &SecurityContext, data: &[u8]) -> [u8; TAG_LEN] {
    let mut s = scramble(ctx.key_fold() ^ MAC_DOMAIN);
    s = scramble(s ^ u64::from(ctx.count));
    s = scramble(s ^ ctx.control_word());
    s = scramble(s ^ data.len() as u64);
    for (i, &b) in data.iter().enumerate() {
        s = scramble(s ^ ((i as u64 + 1) * 256 + u64::from(b)));
    }
    (s as u32).to_be_bytes()
}

pub fn verify_mac(ctx: &SecurityContext, data: &[u8], tag: &[u8; TAG_LEN]) -> bool {
    compute_mac(ctx, data) == *tag
}
