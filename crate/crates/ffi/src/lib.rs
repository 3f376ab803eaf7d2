//! C ABI over `bitflip-core`.
//!
//! Every function returns a [`BitflipStatus`]. On failure a description is
//! kept per thread and can be read with [`bitflip_last_error`]. Pipelines
//! are opaque handles created with [`bitflip_pipeline_new`] and released
//! with [`bitflip_pipeline_free`].
//!
//! Outputs go to caller-owned buffers. Functions that write a variable
//! amount take a capacity and report the length needed through `out_len`
//! even when they return `BITFLIP_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use bitflip_core::adversary::{plan_checksum_attack, AttackSpec, Strategy};
use bitflip_core::crypto::{compute_mac, derive_keystream, Direction, SecurityContext};
use bitflip_core::pipeline::{DefenseMode, Pipeline, Verdict};
use bitflip_core::shuffle::PermutationTable;
use bitflip_core::wire::{internet_checksum, ChecksumVariant, Field, Message, WireLayout};

pub const BITFLIP_DEFENSE_SHUFFLE: u32 = 1;
pub const BITFLIP_DEFENSE_MAC: u32 = 2;
pub const BITFLIP_VARIANT_STANDARD: u32 = 0;
pub const BITFLIP_VARIANT_INVERTED: u32 = 1;
pub const BITFLIP_TAG_LEN: usize = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitflipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Internal = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitflipVerdict {
    AcceptedMutated = 0,
    AcceptedIntact = 1,
    RejectedChecksum = 2,
    RejectedMac = 3,
    ParseError = 4,
}

impl From<Verdict> for BitflipVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::AcceptedMutated => BitflipVerdict::AcceptedMutated,
            Verdict::AcceptedIntact => BitflipVerdict::AcceptedIntact,
            Verdict::RejectedChecksum => BitflipVerdict::RejectedChecksum,
            Verdict::RejectedMac => BitflipVerdict::RejectedMac,
            Verdict::ParseError => BitflipVerdict::ParseError,
        }
    }
}

/// Per-packet security context. `direction` is 0 for uplink, 1 for downlink;
/// `bearer` must be below 32.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BitflipContext {
    pub key: [u8; 16],
    pub count: u32,
    pub bearer: u8,
    pub direction: u8,
}

/// Telemetry message: position, velocity, acceleration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BitflipMessage {
    pub position: f32,
    pub velocity: f32,
    pub acceleration: f32,
}

/// What the receiver made of a wire. `received` is only meaningful for the
/// two accepted verdicts. Bit i of `mutated_fields` is set when field i
/// (position, velocity, acceleration) differs bitwise from what was sent.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BitflipReception {
    pub verdict: BitflipVerdict,
    pub received: BitflipMessage,
    pub mutated_fields: u32,
}

/// Opaque endpoint configuration.
pub struct BitflipPipeline {
    inner: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(BitflipStatus, String);

impl Fail {
    fn null(what: &str) -> Self {
        Fail(BitflipStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(msg: impl ToString) -> Self {
        Fail(BitflipStatus::InvalidArgument, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BitflipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BitflipStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BitflipStatus::Internal
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(what))
}

/// Copies `data` into a caller buffer, reporting the needed length.
unsafe fn emit(data: &[u8], out: *mut u8, cap: usize, out_len: *mut usize) -> Result<(), Fail> {
    if out_len.is_null() {
        return Err(Fail::null("out_len"));
    }
    *out_len = data.len();
    if cap < data.len() {
        return Err(Fail(
            BitflipStatus::BufferTooSmall,
            format!("need {} bytes, have {cap}", data.len()),
        ));
    }
    output(out, data.len(), "out")?.copy_from_slice(data);
    Ok(())
}

fn variant(v: u32) -> Result<ChecksumVariant, Fail> {
    match v {
        BITFLIP_VARIANT_STANDARD => Ok(ChecksumVariant::Standard),
        BITFLIP_VARIANT_INVERTED => Ok(ChecksumVariant::Inverted),
        _ => Err(Fail::invalid(format!("unknown checksum variant {v}"))),
    }
}

fn context(c: &BitflipContext) -> Result<SecurityContext, Fail> {
    let dir = Direction::try_from(c.direction).map_err(Fail::invalid)?;
    SecurityContext::new(c.key, c.count, c.bearer, dir).map_err(Fail::invalid)
}

fn message(m: &BitflipMessage) -> Result<Message, Fail> {
    Message::new(m.position, m.velocity, m.acceleration).map_err(Fail::invalid)
}

/// Description of the last failure on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bitflip_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bitflip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `defense` is a mask of `BITFLIP_DEFENSE_*` flags; `checksum_variant` one of the
/// `BITFLIP_VARIANT_*` values. Ports default to 5000 and 6000.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_new(
    defense: u32,
    checksum_variant: u32,
    out: *mut *mut BitflipPipeline,
) -> BitflipStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        if defense & !(BITFLIP_DEFENSE_SHUFFLE | BITFLIP_DEFENSE_MAC) != 0 {
            return Err(Fail::invalid(format!("unknown defense flags {defense:#x}")));
        }
        let mode = DefenseMode {
            shuffle: defense & BITFLIP_DEFENSE_SHUFFLE != 0,
            mac: defense & BITFLIP_DEFENSE_MAC != 0,
        };
        let inner = Pipeline::new(mode, variant(checksum_variant)?);
        *out = Box::into_raw(Box::new(BitflipPipeline { inner }));
        Ok(())
    })
}

/// # Safety
/// `pipeline` must come from [`bitflip_pipeline_new`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_free(pipeline: *mut BitflipPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// # Safety
/// `pipeline` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_set_ports(
    pipeline: *mut BitflipPipeline,
    src_port: u16,
    dst_port: u16,
) -> BitflipStatus {
    guard(|| {
        let p = pipeline.as_mut().ok_or_else(|| Fail::null("pipeline"))?;
        p.inner = p.inner.clone().with_ports(src_port, dst_port);
        Ok(())
    })
}

/// Number of wire bytes a payload of `payload_len` bytes occupies.
///
/// # Safety
/// `pipeline` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_wire_len(
    pipeline: *const BitflipPipeline,
    payload_len: usize,
    out: *mut usize,
) -> BitflipStatus {
    guard(|| {
        let p = deref(pipeline, "pipeline")?;
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        *out = p.inner.layout(payload_len).wire_len();
        Ok(())
    })
}

/// Encodes, checksums, optionally tags, ciphers and shuffles a message.
///
/// # Safety
/// Pointers must be valid; `out` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_protect(
    pipeline: *const BitflipPipeline,
    ctx: *const BitflipContext,
    msg: *const BitflipMessage,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> BitflipStatus {
    guard(|| {
        let p = deref(pipeline, "pipeline")?;
        let c = context(deref(ctx, "ctx")?)?;
        let m = message(deref(msg, "msg")?)?;
        let wire = p.inner.sender_protect(&m, &c).map_err(Fail::invalid)?;
        emit(&wire, out, cap, out_len)
    })
}

/// Same as [`bitflip_pipeline_protect`] for an arbitrary payload.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_protect_payload(
    pipeline: *const BitflipPipeline,
    ctx: *const BitflipContext,
    payload: *const u8,
    payload_len: usize,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> BitflipStatus {
    guard(|| {
        let p = deref(pipeline, "pipeline")?;
        let c = context(deref(ctx, "ctx")?)?;
        let data = input(payload, payload_len, "payload")?;
        let wire = p.inner.protect_payload(data, &c).map_err(Fail::invalid)?;
        emit(&wire, out, cap, out_len)
    })
}

/// Receiver side. Malformed wires are reported through the verdict, not the
/// status.
///
/// # Safety
/// Pointers must be valid; `wire` must hold `wire_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bitflip_pipeline_receive(
    pipeline: *const BitflipPipeline,
    ctx: *const BitflipContext,
    wire: *const u8,
    wire_len: usize,
    sent: *const BitflipMessage,
    out: *mut BitflipReception,
) -> BitflipStatus {
    guard(|| {
        let p = deref(pipeline, "pipeline")?;
        let c = context(deref(ctx, "ctx")?)?;
        let wire = input(wire, wire_len, "wire")?;
        let sent = message(deref(sent, "sent")?)?;
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        let outcome = p.inner.receiver_process(wire, &c, &sent);
        let received = outcome.received.map_or(BitflipMessage::default(), |r| BitflipMessage {
            position: r.get(Field::Position),
            velocity: r.get(Field::Velocity),
            acceleration: r.get(Field::Acceleration),
        });
        *out = BitflipReception {
            verdict: outcome.verdict.into(),
            received,
            mutated_fields: outcome
                .mutated_fields
                .iter()
                .fold(0, |mask, f| mask | 1 << f.index()),
        };
        Ok(())
    })
}

/// Flips the given MSB-first bit positions of `wire` in place. Positions
/// must be distinct and inside the checksum field or the payload.
///
/// # Safety
/// `wire` must hold `wire_len` bytes and `positions` `n` entries.
#[no_mangle]
pub unsafe extern "C" fn bitflip_apply_flips(
    pipeline: *const BitflipPipeline,
    wire: *mut u8,
    wire_len: usize,
    positions: *const usize,
    n: usize,
) -> BitflipStatus {
    guard(|| {
        let p = deref(pipeline, "pipeline")?;
        let wire = output(wire, wire_len, "wire")?;
        let positions = input(positions, n, "positions")?.to_vec();
        let mac_len = if p.inner.mode().mac { 4 } else { 0 };
        let payload_len = wire
            .len()
            .checked_sub(8 + mac_len)
            .filter(|&l| l > 0)
            .ok_or_else(|| Fail::invalid(format!("wire of {} bytes is too short", wire.len())))?;
        let layout = p.inner.layout(payload_len);
        let spec = AttackSpec::new(Strategy::Custom, positions, &layout).map_err(Fail::invalid)?;
        let flipped = bitflip_core::adversary::apply_flips(wire, &spec).map_err(Fail::invalid)?;
        wire.copy_from_slice(&flipped);
        Ok(())
    })
}

/// Draws a random checksum-pair attack of `pairs` pairs. Writes `2 * pairs`
/// positions, checksum bit first in each pair.
///
/// # Safety
/// `out` must hold `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn bitflip_plan_checksum_attack(
    payload_len: usize,
    has_mac: bool,
    seed: u64,
    pairs: usize,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> BitflipStatus {
    guard(|| {
        if payload_len == 0 {
            return Err(Fail::invalid("payload_len must be positive"));
        }
        let layout = WireLayout::new(payload_len, has_mac);
        let spec = plan_checksum_attack(&layout, seed, pairs).map_err(Fail::invalid)?;
        if out_len.is_null() {
            return Err(Fail::null("out_len"));
        }
        *out_len = spec.flips();
        if cap < spec.flips() {
            return Err(Fail(BitflipStatus::BufferTooSmall, format!("need {} entries", spec.flips())));
        }
        output(out, spec.flips(), "out")?.copy_from_slice(spec.positions());
        Ok(())
    })
}

/// # Safety
/// `data` must hold `len` bytes; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn bitflip_internet_checksum(
    data: *const u8,
    len: usize,
    checksum_variant: u32,
    out: *mut u16,
) -> BitflipStatus {
    guard(|| {
        let data = input(data, len, "data")?;
        let v = variant(checksum_variant)?;
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        *out = internet_checksum(data, v);
        Ok(())
    })
}

/// # Safety
/// `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bitflip_derive_keystream(
    ctx: *const BitflipContext,
    out: *mut u8,
    len: usize,
) -> BitflipStatus {
    guard(|| {
        let c = context(deref(ctx, "ctx")?)?;
        let ks = derive_keystream(&c, len).map_err(Fail::invalid)?;
        output(out, len, "out")?.copy_from_slice(ks.as_bytes());
        Ok(())
    })
}

/// # Safety
/// `data` must hold `len` bytes and `tag` four.
#[no_mangle]
pub unsafe extern "C" fn bitflip_compute_mac(
    ctx: *const BitflipContext,
    data: *const u8,
    len: usize,
    tag: *mut u8,
) -> BitflipStatus {
    guard(|| {
        let c = context(deref(ctx, "ctx")?)?;
        let data = input(data, len, "data")?;
        output(tag, BITFLIP_TAG_LEN, "tag")?.copy_from_slice(&compute_mac(&c, data));
        Ok(())
    })
}

/// Forward Fisher-Yates table for `seed`: bit at position i moves to
/// `out[i]`.
///
/// # Safety
/// `out` must hold `n` entries.
#[no_mangle]
pub unsafe extern "C" fn bitflip_permutation(seed: u64, n: usize, out: *mut usize) -> BitflipStatus {
    guard(|| {
        let t = PermutationTable::build(seed, n).map_err(Fail::invalid)?;
        output(out, n, "out")?.copy_from_slice(t.as_slice());
        Ok(())
    })
}
