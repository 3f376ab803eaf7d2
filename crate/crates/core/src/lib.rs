//! Simulation of bit-flipping attacks against stream-ciphered UDP datagrams
//! and of a keystream-seeded bit-shuffling countermeasure.
//!
//! The crate is organised bottom-up:
//!
//! * [`wire`] – message encoding, datagram framing and the internet checksum.
//! * [`crypto`] – the SplitMix64 scrambler and the deterministic keystream /
//!   MAC stand-ins used in place of real ciphering and integrity algorithms.
//! * [`shuffle`] – keystream-seeded Fisher-Yates permutation over the
//!   checksum and payload bits.
//! * [`adversary`] – attack planning and ciphertext bit flipping.
//! * [`pipeline`] – sender → man-in-the-middle → receiver composition and
//!   outcome classification.
//! * [`harness`] – trajectory ingestion, Monte Carlo runs and decay fitting.
//! * [`cli`] – command-line parsing and command execution for the `bitflip`
//!   binary.
//!
//! The cipher and MAC are **not** cryptographically secure. They exist so
//! that every implementation produces the same bytes.
//!
//! ```
//! use bitflip_core::{AttackPlan, ChecksumVariant, DefenseMode, Direction, Message, Pipeline, SecurityContext, Verdict, WireLayout};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let pipeline = Pipeline::new(DefenseMode::NONE, ChecksumVariant::Standard);
//! let ctx = SecurityContext::new([7; 16], 42, 0, Direction::Uplink)?;
//! let msg = Message::new(300.0, 25.0, 2.0)?;
//! let plan: AttackPlan = "custom:56,136".parse()?;
//! let spec = plan.realize(&WireLayout::MESSAGE, 1)?;
//! let outcome = pipeline.run_trial(&msg, &ctx, &spec)?;
//! assert_eq!(outcome.verdict, Verdict::AcceptedMutated);
//! assert_eq!(outcome.received.unwrap().values(), [300.0, 25.0, 4.0]);
//! # Ok(())
//! # }
//! ```

pub mod adversary;
pub mod cli;
pub mod crypto;
pub mod harness;
pub mod pipeline;
pub mod shuffle;
pub mod vectors;
pub mod wire;

pub use adversary::{AttackPlan, AttackSpec, FloatBit, FloatFieldTarget, Strategy};
pub use crypto::{Direction, Keystream, Scrambler64, SecurityContext};
pub use pipeline::{DefenseMode, Pipeline, TrialOutcome, Verdict};
pub use shuffle::{PermutationTable, ProtectedRegion};
pub use wire::{ChecksumVariant, Datagram, DecodedMessage, Field, Message, WireLayout};
