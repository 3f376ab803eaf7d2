//! Message encoding, UDP-style datagram framing and the internet checksum.
//!
//! Bits are indexed MSB-first over a byte sequence: bit `b` lives in byte
//! `b / 8`, and `b % 8 == 0` is that byte's `0x80` bit. The checksum works on
//! 16-bit words, so two bits interact in the sum only through their column
//! `b % 16`.
//!
//! Serialized layout (big-endian):
//!
//! ```text
//! bytes 0-1  src_port      bits   0..16
//! bytes 2-3  dst_port      bits  16..32
//! bytes 4-5  length        bits  32..48
//! bytes 6-7  checksum      bits  48..64
//! bytes 8..  payload       bits  64..
//! last 4     MAC tag (optional)
//! ```

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

pub const HEADER_LEN: usize = 8;
pub const MESSAGE_LEN: usize = 12;
pub const MAC_LEN: usize = 4;
pub const WORD_BITS: usize = 16;
pub const CHECKSUM_BIT_OFFSET: usize = 48;
pub const PAYLOAD_BIT_OFFSET: usize = HEADER_LEN * 8;
pub const MAX_DATAGRAM_LEN: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("{0} is not finite")]
    NonFinite(Field),
    #[error("expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("payload must not be empty")]
    EmptyPayload,
    #[error("datagram of {0} bytes exceeds the 65535-byte limit")]
    Oversize(usize),
    #[error("buffer of {0} bytes is shorter than the framing it must hold")]
    Truncated(usize),
    #[error("length field says {field} bytes but buffer holds {buffer}")]
    LengthMismatch { field: usize, buffer: usize },
}

/// One of the three floats carried by a [`Message`], in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Position,
    Velocity,
    Acceleration,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::Position, Field::Velocity, Field::Acceleration];

    pub fn index(self) -> usize {
        match self {
            Field::Position => 0,
            Field::Velocity => 1,
            Field::Acceleration => 2,
        }
    }

    /// Absolute wire bit of float bit 0 (the sign) of this field.
    pub fn base_bit(self) -> usize {
        PAYLOAD_BIT_OFFSET + 32 * self.index()
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Position => "position",
            Field::Velocity => "velocity",
            Field::Acceleration => "acceleration",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "position" | "pos" => Ok(Field::Position),
            "velocity" | "vel" => Ok(Field::Velocity),
            "acceleration" | "acc" => Ok(Field::Acceleration),
            other => Err(format!("unknown field `{other}`")),
        }
    }
}

/// Application message: position (ft), velocity (ft/s), acceleration (ft/s²).
///
/// All three values are finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    position: f32,
    velocity: f32,
    acceleration: f32,
}

impl Message {
    pub fn new(position: f32, velocity: f32, acceleration: f32) -> Result<Self, WireError> {
        let m = Message {
            position,
            velocity,
            acceleration,
        };
        for field in Field::ALL {
            if !m.get(field).is_finite() {
                return Err(WireError::NonFinite(field));
            }
        }
        Ok(m)
    }

    pub fn position(&self) -> f32 {
        self.position
    }

    pub fn velocity(&self) -> f32 {
        self.velocity
    }

    pub fn acceleration(&self) -> f32 {
        self.acceleration
    }

    pub fn get(&self, field: Field) -> f32 {
        match field {
            Field::Position => self.position,
            Field::Velocity => self.velocity,
            Field::Acceleration => self.acceleration,
        }
    }

    pub fn values(&self) -> [f32; 3] {
        [self.position, self.velocity, self.acceleration]
    }
}

/// Result of decoding 12 payload bytes. Unlike [`Message`] this may hold
/// NaN or infinite values, which are reported through [`is_finite`].
///
/// [`is_finite`]: DecodedMessage::is_finite
#[derive(Debug, Clone, Copy)]
pub struct DecodedMessage {
    bits: [u32; 3],
}

impl DecodedMessage {
    pub fn from_bits(bits: [u32; 3]) -> Self {
        DecodedMessage { bits }
    }

    pub fn bits(&self) -> [u32; 3] {
        self.bits
    }

    pub fn values(&self) -> [f32; 3] {
        self.bits.map(f32::from_bits)
    }

    pub fn get(&self, field: Field) -> f32 {
        f32::from_bits(self.bits[field.index()])
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn non_finite_fields(&self) -> Vec<Field> {
        Field::ALL
            .into_iter()
            .filter(|f| !self.get(*f).is_finite())
            .collect()
    }

    pub fn into_message(self) -> Result<Message, WireError> {
        let [p, v, a] = self.values();
        Message::new(p, v, a)
    }

    /// Fields whose bit pattern differs from `sent`. A sign flip on zero
    /// counts as a mutation even though `0.0 == -0.0`.
    pub fn mutated_fields(&self, sent: &Message) -> Vec<Field> {
        Field::ALL
            .into_iter()
            .filter(|f| self.bits[f.index()] != sent.get(*f).to_bits())
            .collect()
    }
}

impl PartialEq for DecodedMessage {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits
    }
}

impl Eq for DecodedMessage {}

impl From<Message> for DecodedMessage {
    fn from(m: Message) -> Self {
        DecodedMessage {
            bits: m.values().map(f32::to_bits),
        }
    }
}

pub fn encode_message(m: &Message) -> [u8; MESSAGE_LEN] {
    let mut out = [0u8; MESSAGE_LEN];
    for (chunk, v) in out.chunks_exact_mut(4).zip(m.values()) {
        chunk.copy_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode_message(bytes: &[u8]) -> Result<DecodedMessage, WireError> {
    if bytes.len() != MESSAGE_LEN {
        return Err(WireError::BadLength {
            expected: MESSAGE_LEN,
            actual: bytes.len(),
        });
    }
    let mut bits = [0u32; 3];
    for (slot, chunk) in bits.iter_mut().zip(bytes.chunks_exact(4)) {
        *slot = u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
    Ok(DecodedMessage { bits })
}

/// Storage convention for the checksum field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ChecksumVariant {
    /// RFC 1071: store the one's complement of the sum.
    #[default]
    Standard,
    /// Store the raw one's-complement sum (the complement of `Standard`).
    Inverted,
}

impl fmt::Display for ChecksumVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChecksumVariant::Standard => "standard",
            ChecksumVariant::Inverted => "inverted",
        })
    }
}

impl FromStr for ChecksumVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(ChecksumVariant::Standard),
            "inverted" => Ok(ChecksumVariant::Inverted),
            other => Err(format!("unknown checksum variant `{other}`")),
        }
    }
}

/// 16-bit one's-complement sum with end-around carry. Odd input is padded
/// with a trailing zero byte.
pub fn ones_complement_sum(bytes: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    let mut words = bytes.chunks_exact(2);
    for w in &mut words {
        sum += u32::from(u16::from_be_bytes([w[0], w[1]]));
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    if let [last] = words.remainder() {
        sum += u32::from(*last) << 8;
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    sum as u16
}

pub fn internet_checksum(bytes: &[u8], variant: ChecksumVariant) -> u16 {
    let standard = !ones_complement_sum(bytes);
    match variant {
        ChecksumVariant::Standard => standard,
        ChecksumVariant::Inverted => !standard,
    }
}

#[inline]
pub fn get_bit(bytes: &[u8], bit: usize) -> bool {
    bytes[bit / 8] & (0x80 >> (bit % 8)) != 0
}

#[inline]
pub fn set_bit(bytes: &mut [u8], bit: usize, value: bool) {
    let mask = 0x80 >> (bit % 8);
    if value {
        bytes[bit / 8] |= mask;
    } else {
        bytes[bit / 8] &= !mask;
    }
}

#[inline]
pub fn flip_bit(bytes: &mut [u8], bit: usize) {
    bytes[bit / 8] ^= 0x80 >> (bit % 8);
}

#[inline]
pub fn column(bit: usize) -> usize {
    bit % WORD_BITS
}

#[inline]
pub fn aligned(p: usize, q: usize) -> bool {
    column(p) == column(q)
}

/// Shape of a serialized datagram: payload size and whether a MAC tag
/// trails it. Everything an attacker knows about the wire lives here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireLayout {
    pub payload_len: usize,
    pub has_mac: bool,
}

impl WireLayout {
    pub const MESSAGE: WireLayout = WireLayout {
        payload_len: MESSAGE_LEN,
        has_mac: false,
    };

    pub fn new(payload_len: usize, has_mac: bool) -> Self {
        WireLayout {
            payload_len,
            has_mac,
        }
    }

    pub fn mac_len(&self) -> usize {
        if self.has_mac {
            MAC_LEN
        } else {
            0
        }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload_len + self.mac_len()
    }

    pub fn wire_bits(&self) -> usize {
        self.wire_len() * 8
    }

    pub fn checksum_bits(&self) -> Range<usize> {
        CHECKSUM_BIT_OFFSET..CHECKSUM_BIT_OFFSET + WORD_BITS
    }

    pub fn payload_bits(&self) -> Range<usize> {
        PAYLOAD_BIT_OFFSET..PAYLOAD_BIT_OFFSET + self.payload_len * 8
    }

    pub fn mac_bits(&self) -> Range<usize> {
        let start = self.payload_bits().end;
        start..start + self.mac_len() * 8
    }

    /// Payload bits in a given checksum column, in increasing order.
    pub fn payload_bits_in_column(&self, col: usize) -> impl Iterator<Item = usize> {
        self.payload_bits().filter(move |b| column(*b) == col)
    }
}

/// UDP-style datagram. `length` counts header, payload and the MAC tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src_port: u16,
    pub dst_port: u16,
    pub length: u16,
    pub checksum: u16,
    pub payload: Vec<u8>,
    pub mac: Option<[u8; MAC_LEN]>,
}

impl Datagram {
    /// Assembles a datagram and fills in its checksum. The checksum covers
    /// every serialized byte (tag included) with the checksum field zeroed.
    pub fn build(
        src_port: u16,
        dst_port: u16,
        payload: &[u8],
        mac: Option<[u8; MAC_LEN]>,
        variant: ChecksumVariant,
    ) -> Result<Self, WireError> {
        if payload.is_empty() {
            return Err(WireError::EmptyPayload);
        }
        let total = HEADER_LEN + payload.len() + if mac.is_some() { MAC_LEN } else { 0 };
        if total > MAX_DATAGRAM_LEN {
            return Err(WireError::Oversize(total));
        }
        let mut d = Datagram {
            src_port,
            dst_port,
            length: total as u16,
            checksum: 0,
            payload: payload.to_vec(),
            mac,
        };
        d.checksum = d.compute_checksum(variant);
        Ok(d)
    }

    pub fn layout(&self) -> WireLayout {
        WireLayout::new(self.payload.len(), self.mac.is_some())
    }

    fn write_header(&self, out: &mut Vec<u8>, checksum: u16) {
        out.extend_from_slice(&self.src_port.to_be_bytes());
        out.extend_from_slice(&self.dst_port.to_be_bytes());
        out.extend_from_slice(&self.length.to_be_bytes());
        out.extend_from_slice(&checksum.to_be_bytes());
    }

    fn serialize_with_checksum(&self, checksum: u16) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.layout().wire_len());
        self.write_header(&mut out, checksum);
        out.extend_from_slice(&self.payload);
        if let Some(tag) = &self.mac {
            out.extend_from_slice(tag);
        }
        out
    }

    pub fn serialize(&self) -> Vec<u8> {
        self.serialize_with_checksum(self.checksum)
    }

    /// Header (checksum zeroed) followed by the payload: the bytes a MAC tag
    /// authenticates.
    pub fn mac_input(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        self.write_header(&mut out, 0);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn compute_checksum(&self, variant: ChecksumVariant) -> u16 {
        internet_checksum(&self.serialize_with_checksum(0), variant)
    }

    pub fn verify_checksum(&self, variant: ChecksumVariant) -> bool {
        self.compute_checksum(variant) == self.checksum
    }

    /// Parses framing only; the checksum is not checked. `with_mac` tells
    /// the parser whether the last four bytes are a tag.
    pub fn parse(bytes: &[u8], with_mac: bool) -> Result<Self, WireError> {
        let tail = if with_mac { MAC_LEN } else { 0 };
        if bytes.len() < HEADER_LEN + tail {
            return Err(WireError::Truncated(bytes.len()));
        }
        let be = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
        let length = be(4);
        if usize::from(length) != bytes.len() {
            return Err(WireError::LengthMismatch {
                field: length.into(),
                buffer: bytes.len(),
            });
        }
        let payload_end = bytes.len() - tail;
        let mac = with_mac.then(|| {
            let mut tag = [0u8; MAC_LEN];
            tag.copy_from_slice(&bytes[payload_end..]);
            tag
        });
        Ok(Datagram {
            src_port: be(0),
            dst_port: be(2),
            length,
            checksum: be(6),
            payload: bytes[HEADER_LEN..payload_end].to_vec(),
            mac,
        })
    }
}
