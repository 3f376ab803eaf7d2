//! Sender → man-in-the-middle → receiver.
//!
//! Sender: encode → checksum → (tag) → XOR with the packet keystream →
//! (shuffle). Receiver: (unshuffle) → XOR → parse → checksum → (tag) →
//! decode. The attacker sits between them as a plain function.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::adversary::{apply_flips, AttackError, AttackSpec};
use crate::crypto::{
    xor_in_place, CryptoError, Keystream, KeystreamGenerator, MacGenerator, ScramblerKeystream,
    ScramblerMac, SecurityContext,
};
use crate::shuffle::{
    derive_prp_seed, shuffle_bits, unshuffle_bits, PermutationTable, ProtectedRegion,
    ShuffleError,
};
use crate::wire::{
    decode_message, encode_message, ChecksumVariant, Datagram, DecodedMessage, Field, Message,
    WireError, WireLayout, HEADER_LEN, MAC_LEN,
};

pub const DEFAULT_SRC_PORT: u16 = 5000;
pub const DEFAULT_DST_PORT: u16 = 6000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Shuffle(#[from] ShuffleError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

/// Which protections both endpoints have switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DefenseMode {
    pub shuffle: bool,
    pub mac: bool,
}

impl DefenseMode {
    pub const NONE: DefenseMode = DefenseMode {
        shuffle: false,
        mac: false,
    };
    pub const SHUFFLE: DefenseMode = DefenseMode {
        shuffle: true,
        mac: false,
    };
    pub const MAC: DefenseMode = DefenseMode {
        shuffle: false,
        mac: true,
    };
    pub const SHUFFLE_MAC: DefenseMode = DefenseMode {
        shuffle: true,
        mac: true,
    };
    pub const ALL: [DefenseMode; 4] = [
        DefenseMode::NONE,
        DefenseMode::SHUFFLE,
        DefenseMode::MAC,
        DefenseMode::SHUFFLE_MAC,
    ];
}

impl fmt::Display for DefenseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match (self.shuffle, self.mac) {
            (false, false) => "none",
            (true, false) => "shuffle",
            (false, true) => "mac",
            (true, true) => "shuffle+mac",
        })
    }
}

impl FromStr for DefenseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(DefenseMode::NONE),
            "shuffle" => Ok(DefenseMode::SHUFFLE),
            "mac" => Ok(DefenseMode::MAC),
            "shuffle+mac" | "mac+shuffle" => Ok(DefenseMode::SHUFFLE_MAC),
            other => Err(format!("unknown defense `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    AcceptedMutated,
    AcceptedIntact,
    RejectedChecksum,
    RejectedMac,
    ParseError,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::AcceptedMutated,
        Verdict::AcceptedIntact,
        Verdict::RejectedChecksum,
        Verdict::RejectedMac,
        Verdict::ParseError,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::AcceptedMutated => "accepted-mutated",
            Verdict::AcceptedIntact => "accepted-intact",
            Verdict::RejectedChecksum => "rejected-checksum",
            Verdict::RejectedMac => "rejected-mac",
            Verdict::ParseError => "parse-error",
        }
    }

    pub fn is_accepted(self) -> bool {
        matches!(self, Verdict::AcceptedMutated | Verdict::AcceptedIntact)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What the receiver made of a wire, before comparing with what was sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reception {
    Accepted(Datagram),
    RejectedChecksum,
    RejectedMac,
    ParseError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub verdict: Verdict,
    pub received: Option<DecodedMessage>,
    pub mutated_fields: Vec<Field>,
}

impl TrialOutcome {
    fn rejected(verdict: Verdict) -> Self {
        TrialOutcome {
            verdict,
            received: None,
            mutated_fields: Vec::new(),
        }
    }
}

/// Intermediate byte strings of one protected packet.
#[derive(Debug, Clone)]
pub struct SenderTrace {
    pub datagram: Datagram,
    pub plaintext: Vec<u8>,
    pub keystream: Keystream,
    pub ciphertext: Vec<u8>,
    pub permutation: Option<PermutationTable>,
    pub wire: Vec<u8>,
}

/// Shared endpoint configuration plus the cipher and MAC implementations.
/// Sender and receiver use the same `Pipeline`.
#[derive(Debug, Clone)]
pub struct Pipeline<K = ScramblerKeystream, M = ScramblerMac> {
    keystream: K,
    mac: M,
    mode: DefenseMode,
    variant: ChecksumVariant,
    src_port: u16,
    dst_port: u16,
}

impl Pipeline {
    pub fn new(mode: DefenseMode, variant: ChecksumVariant) -> Self {
        Pipeline::with_generators(ScramblerKeystream, ScramblerMac, mode, variant)
    }
}

impl<K: KeystreamGenerator, M: MacGenerator> Pipeline<K, M> {
    pub fn with_generators(keystream: K, mac: M, mode: DefenseMode, variant: ChecksumVariant) -> Self {
        Pipeline {
            keystream,
            mac,
            mode,
            variant,
            src_port: DEFAULT_SRC_PORT,
            dst_port: DEFAULT_DST_PORT,
        }
    }

    pub fn with_ports(mut self, src_port: u16, dst_port: u16) -> Self {
        self.src_port = src_port;
        self.dst_port = dst_port;
        self
    }

    pub fn mode(&self) -> DefenseMode {
        self.mode
    }

    pub fn variant(&self) -> ChecksumVariant {
        self.variant
    }

    pub fn ports(&self) -> (u16, u16) {
        (self.src_port, self.dst_port)
    }

    pub fn layout(&self, payload_len: usize) -> WireLayout {
        WireLayout::new(payload_len, self.mode.mac)
    }

    fn permutation(
        &self,
        keystream: &Keystream,
        region: &ProtectedRegion,
    ) -> Result<PermutationTable, PipelineError> {
        let seed = derive_prp_seed(keystream.as_bytes())?;
        Ok(PermutationTable::build(seed, region.len())?)
    }

    pub fn trace_payload(
        &self,
        payload: &[u8],
        ctx: &SecurityContext,
    ) -> Result<SenderTrace, PipelineError> {
        let datagram = if self.mode.mac {
            let unsigned = Datagram::build(
                self.src_port,
                self.dst_port,
                payload,
                Some([0; MAC_LEN]),
                self.variant,
            )?;
            let tag = self.mac.tag(ctx, &unsigned.mac_input());
            Datagram::build(self.src_port, self.dst_port, payload, Some(tag), self.variant)?
        } else {
            Datagram::build(self.src_port, self.dst_port, payload, None, self.variant)?
        };
        let plaintext = datagram.serialize();
        let keystream = self.keystream.keystream(ctx, plaintext.len())?;
        let mut ciphertext = plaintext.clone();
        xor_in_place(&mut ciphertext, &keystream)?;
        let (wire, permutation) = if self.mode.shuffle {
            let region = ProtectedRegion::for_layout(&datagram.layout());
            let table = self.permutation(&keystream, &region)?;
            (shuffle_bits(&ciphertext, &region, &table)?, Some(table))
        } else {
            (ciphertext.clone(), None)
        };
        Ok(SenderTrace {
            datagram,
            plaintext,
            keystream,
            ciphertext,
            permutation,
            wire,
        })
    }

    pub fn protect_payload(
        &self,
        payload: &[u8],
        ctx: &SecurityContext,
    ) -> Result<Vec<u8>, PipelineError> {
        Ok(self.trace_payload(payload, ctx)?.wire)
    }

    pub fn sender_protect(&self, m: &Message, ctx: &SecurityContext) -> Result<Vec<u8>, PipelineError> {
        self.protect_payload(&encode_message(m), ctx)
    }

    /// Undoes shuffling and ciphering and checks the datagram. Never fails:
    /// malformed input becomes [`Reception::ParseError`].
    pub fn receive(&self, wire: &[u8], ctx: &SecurityContext) -> Reception {
        match self.try_receive(wire, ctx) {
            Ok(r) => r,
            Err(e) => Reception::ParseError(e.to_string()),
        }
    }

    fn try_receive(&self, wire: &[u8], ctx: &SecurityContext) -> Result<Reception, PipelineError> {
        let mac_len = if self.mode.mac { MAC_LEN } else { 0 };
        if wire.len() <= HEADER_LEN + mac_len {
            return Err(WireError::Truncated(wire.len()).into());
        }
        let keystream = self.keystream.keystream(ctx, wire.len())?;
        let mut plain = if self.mode.shuffle {
            let layout = WireLayout::new(wire.len() - HEADER_LEN - mac_len, self.mode.mac);
            let region = ProtectedRegion::for_layout(&layout);
            let table = self.permutation(&keystream, &region)?;
            unshuffle_bits(wire, &region, &table)?
        } else {
            wire.to_vec()
        };
        xor_in_place(&mut plain, &keystream)?;
        let datagram = Datagram::parse(&plain, self.mode.mac)?;
        if !datagram.verify_checksum(self.variant) {
            return Ok(Reception::RejectedChecksum);
        }
        if let Some(tag) = &datagram.mac {
            if !self.mac.verify(ctx, &datagram.mac_input(), tag) {
                return Ok(Reception::RejectedMac);
            }
        }
        Ok(Reception::Accepted(datagram))
    }

    /// Verdict for a raw payload transfer.
    pub fn receiver_process_payload(
        &self,
        wire: &[u8],
        ctx: &SecurityContext,
        sent: &[u8],
    ) -> Verdict {
        match self.receive(wire, ctx) {
            Reception::Accepted(d) if d.payload == sent => Verdict::AcceptedIntact,
            Reception::Accepted(_) => Verdict::AcceptedMutated,
            Reception::RejectedChecksum => Verdict::RejectedChecksum,
            Reception::RejectedMac => Verdict::RejectedMac,
            Reception::ParseError(_) => Verdict::ParseError,
        }
    }

    pub fn receiver_process(&self, wire: &[u8], ctx: &SecurityContext, sent: &Message) -> TrialOutcome {
        let datagram = match self.receive(wire, ctx) {
            Reception::Accepted(d) => d,
            Reception::RejectedChecksum => return TrialOutcome::rejected(Verdict::RejectedChecksum),
            Reception::RejectedMac => return TrialOutcome::rejected(Verdict::RejectedMac),
            Reception::ParseError(_) => return TrialOutcome::rejected(Verdict::ParseError),
        };
        let Ok(received) = decode_message(&datagram.payload) else {
            return TrialOutcome::rejected(Verdict::ParseError);
        };
        let mutated_fields = received.mutated_fields(sent);
        let verdict = if mutated_fields.is_empty() {
            Verdict::AcceptedIntact
        } else {
            Verdict::AcceptedMutated
        };
        TrialOutcome {
            verdict,
            received: Some(received),
            mutated_fields,
        }
    }

    /// Protect, tamper, receive.
    pub fn run_trial(
        &self,
        m: &Message,
        ctx: &SecurityContext,
        attack: &AttackSpec,
    ) -> Result<TrialOutcome, PipelineError> {
        let wire = self.sender_protect(m, ctx)?;
        let tampered = mitm_tamper(&wire, attack)?;
        Ok(self.receiver_process(&tampered, ctx, m))
    }
}

pub fn mitm_tamper(wire: &[u8], spec: &AttackSpec) -> Result<Vec<u8>, AttackError> {
    apply_flips(wire, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{plan_payload_attack, Strategy};
    use crate::crypto::{Direction, FixedKeystream};

    fn ctx(count: u32) -> SecurityContext {
        SecurityContext::new([7; 16], count, 1, Direction::Uplink).unwrap()
    }

    fn reference() -> Message {
        Message::new(300.0, 25.0, 2.0).unwrap()
    }

    #[test]
    fn untampered_round_trip_every_mode() {
        for mode in DefenseMode::ALL {
            for variant in [ChecksumVariant::Standard, ChecksumVariant::Inverted] {
                let p = Pipeline::new(mode, variant);
                let wire = p.sender_protect(&reference(), &ctx(3)).unwrap();
                assert_eq!(wire.len(), if mode.mac { 24 } else { 20 });
                let out = p.receiver_process(&wire, &ctx(3), &reference());
                assert_eq!(out.verdict, Verdict::AcceptedIntact, "{mode} {variant}");
                assert_eq!(out.received, Some(reference().into()));
            }
        }
    }

    #[test]
    fn wrong_count_is_rejected_under_mac() {
        let p = Pipeline::new(DefenseMode::MAC, ChecksumVariant::Standard);
        let wire = p.sender_protect(&reference(), &ctx(3)).unwrap();
        let out = p.receiver_process(&wire, &ctx(4), &reference());
        assert!(!out.verdict.is_accepted());
    }

    #[test]
    fn short_wire_is_a_parse_error() {
        let p = Pipeline::new(DefenseMode::SHUFFLE, ChecksumVariant::Standard);
        assert_eq!(p.receiver_process(&[0; 8], &ctx(0), &reference()).verdict, Verdict::ParseError);
        let p = Pipeline::new(DefenseMode::NONE, ChecksumVariant::Standard);
        assert_eq!(p.receiver_process(&[0; 19], &ctx(0), &reference()).verdict, Verdict::ParseError);
    }

    #[test]
    fn payload_pair_flip_with_zero_keystream() {
        let p = Pipeline::with_generators(
            FixedKeystream(vec![0; 64]),
            ScramblerMac,
            DefenseMode::NONE,
            ChecksumVariant::Standard,
        );
        let layout = p.layout(12);
        let spec = plan_payload_attack(
            &layout,
            "position.11".parse().unwrap(),
            "velocity.11".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(spec.strategy(), Strategy::PayloadPair);
        let out = p.run_trial(&reference(), &ctx(0), &spec).unwrap();
        assert_eq!(out.verdict, Verdict::AcceptedMutated);
        let got = out.received.unwrap();
        assert_eq!(got.values()[..2], [268.0, 27.0]);
        assert_eq!(out.mutated_fields, vec![Field::Position, Field::Velocity]);
    }

    #[test]
    fn defense_text_forms() {
        for mode in DefenseMode::ALL {
            assert_eq!(mode.to_string().parse::<DefenseMode>().unwrap(), mode);
        }
        assert!("both".parse::<DefenseMode>().is_err());
    }
}
