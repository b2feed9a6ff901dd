//! C ABI over `pic-core`.
//!
//! Every fallible function returns a [`PicStatus`]; on failure a message is
//! kept per thread and read with [`pic_last_error`]. Objects cross the
//! boundary as opaque handles owned by the caller and released with the
//! matching `*_free` function. Byte outputs are returned in a [`PicBuffer`]
//! that must be released with [`pic_buffer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pic_core::amplification::{amplify_closed_form, delta_default, invert_amplify, InversionStatus};
use pic_core::envelope::{self, KeyEntropy, KeyPair, KeyRng, PublicKey, PUBLIC_KEY_LEN};
use pic_core::{DomainSpec, Error, LocalRandomizer, Mechanism, Shape, Vector};

/// Result code of every fallible call. Zero means success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Infeasible = 3,
    Decryption = 4,
    Decode = 5,
    OutsideDomain = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicMechanism {
    Minkowski = 0,
    Laplace = 1,
    PlanarLaplace = 2,
    SquareWave = 3,
    Staircase = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicShape {
    Ball = 0,
    Cube = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicInversionStatus {
    Exact = 0,
    Floor = 1,
    Ceiling = 2,
}

/// Owned bytes handed to the caller. `data` is null exactly when `len` is 0.
#[repr(C)]
#[derive(Debug)]
pub struct PicBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// Cryptographic rng used both for sampling noise and for key material.
pub struct PicRng(KeyRng);

/// A configured local randomizer.
pub struct PicRandomizer(LocalRandomizer);

/// An ephemeral key pair; the public half is `PIC_PUBLIC_KEY_LEN` bytes.
pub struct PicKeyPair(KeyPair);

/// Length of a serialized public key.
pub const PIC_PUBLIC_KEY_LEN: usize = 64;

const _: () = assert!(PIC_PUBLIC_KEY_LEN == PUBLIC_KEY_LEN);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: PicStatus,
    message: String,
}

impl Failure {
    fn new(status: PicStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidInput(_) | Error::Range(_) | Error::Config(_) | Error::Unsupported(_) => {
                PicStatus::InvalidInput
            }
            Error::InfeasibleRadius { .. } | Error::AmplificationInfeasible { .. } => PicStatus::Infeasible,
            Error::Decryption => PicStatus::Decryption,
            Error::Decode { .. } | Error::Parse { .. } => PicStatus::Decode,
            Error::OutsideDomain => PicStatus::OutsideDomain,
            _ => PicStatus::Other,
        };
        Self::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PicStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            PicStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(PicStatus::NullPointer, format!("null pointer: {what}"))
}

/// # Safety
/// When `len > 0`, `data` must point to `len` readable elements.
unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// `p` must be null or a valid, exclusive pointer for the call's duration.
unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn buffer(bytes: Vec<u8>) -> PicBuffer {
    if bytes.is_empty() {
        return PicBuffer { data: ptr::null_mut(), len: 0 };
    }
    let boxed = bytes.into_boxed_slice();
    let len = boxed.len();
    PicBuffer { data: Box::into_raw(boxed) as *mut u8, len }
}

fn write_vector(v: &Vector, dst: *mut f64, cap: usize, what: &str) -> Result<(), Failure> {
    if cap < v.dim() {
        return Err(Failure::new(PicStatus::BufferTooSmall, format!("{what} needs {} slots", v.dim())));
    }
    if dst.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `cap` writable slots at `dst`.
    unsafe { ptr::copy_nonoverlapping(v.as_slice().as_ptr(), dst, v.dim()) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pic_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a buffer returned by this library. Null data is ignored.
///
/// # Safety
/// `buf` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn pic_buffer_free(buf: PicBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}

/// Default `delta` for a group of `group_size` members.
#[no_mangle]
pub extern "C" fn pic_delta_default(group_size: u64) -> f64 {
    delta_default(group_size)
}

/// Central budget reached by `population` reports at local budget `epsilon`.
///
/// # Safety
/// `out_central` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pic_amplify(epsilon: f64, delta: f64, population: u64, out_central: *mut f64) -> PicStatus {
    guard(|| {
        let dst = out(out_central, "out_central")?;
        *dst = amplify_closed_form(epsilon, delta, population)?;
        Ok(())
    })
}

/// Local budget whose amplified value is `epsilon_central`.
///
/// # Safety
/// Both output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pic_invert_amplify(
    epsilon_central: f64,
    delta: f64,
    population: u64,
    out_local: *mut f64,
    out_status: *mut PicInversionStatus,
) -> PicStatus {
    guard(|| {
        let local = out(out_local, "out_local")?;
        let status = out(out_status, "out_status")?;
        let inv = invert_amplify(epsilon_central, delta, population)?;
        *local = inv.epsilon;
        *status = match inv.status {
            InversionStatus::Exact => PicInversionStatus::Exact,
            InversionStatus::Floor => PicInversionStatus::Floor,
            InversionStatus::Ceiling => PicInversionStatus::Ceiling,
        };
        Ok(())
    })
}

/// Creates an rng: seeded deterministically when `deterministic` is non-zero,
/// otherwise from the operating system.
///
/// # Safety
/// `out_rng` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pic_rng_new(deterministic: i32, seed: u64, out_rng: *mut *mut PicRng) -> PicStatus {
    guard(|| {
        let dst = out(out_rng, "out_rng")?;
        let entropy = if deterministic != 0 { KeyEntropy::Deterministic(seed) } else { KeyEntropy::Os };
        *dst = Box::into_raw(Box::new(PicRng(KeyRng::new(entropy))));
        Ok(())
    })
}

/// # Safety
/// `rng` must be null or a handle from [`pic_rng_new`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn pic_rng_free(rng: *mut PicRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Builds a randomizer over the ball or cube of radius `scale` in `dim` dimensions.
///
/// # Safety
/// `out_randomizer` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pic_randomizer_new(
    mechanism: PicMechanism,
    shape: PicShape,
    dim: usize,
    scale: f64,
    epsilon: f64,
    out_randomizer: *mut *mut PicRandomizer,
) -> PicStatus {
    guard(|| {
        let dst = out(out_randomizer, "out_randomizer")?;
        let mechanism = match mechanism {
            PicMechanism::Minkowski => Mechanism::Minkowski,
            PicMechanism::Laplace => Mechanism::Laplace,
            PicMechanism::PlanarLaplace => Mechanism::PlanarLaplace,
            PicMechanism::SquareWave => Mechanism::SquareWave,
            PicMechanism::Staircase => Mechanism::Staircase,
        };
        let shape = match shape {
            PicShape::Ball => Shape::Ball,
            PicShape::Cube => Shape::Cube,
        };
        let domain = DomainSpec::new(shape, dim, scale)?;
        *dst = Box::into_raw(Box::new(PicRandomizer(LocalRandomizer::build(mechanism, domain, epsilon)?)));
        Ok(())
    })
}

/// # Safety
/// `randomizer` must be null or a handle from [`pic_randomizer_new`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn pic_randomizer_free(randomizer: *mut PicRandomizer) {
    if !randomizer.is_null() {
        drop(Box::from_raw(randomizer));
    }
}

/// Input dimension of the randomizer, or 0 for a null handle.
///
/// # Safety
/// `randomizer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pic_randomizer_dim(randomizer: *const PicRandomizer) -> usize {
    randomizer.as_ref().map_or(0, |r| r.0.domain().dim)
}

/// Sanitizes `x` (length `dim`). Writes the raw report and its unbiased
/// estimate, each needing `dim` slots; `out_estimate` may be null.
///
/// # Safety
/// Handles must be live; arrays must hold `dim` elements.
#[no_mangle]
pub unsafe extern "C" fn pic_randomizer_sample(
    randomizer: *const PicRandomizer,
    rng: *mut PicRng,
    x: *const f64,
    dim: usize,
    out_raw: *mut f64,
    out_estimate: *mut f64,
) -> PicStatus {
    guard(|| {
        let r = handle(randomizer, "randomizer")?;
        let rng = out(rng, "rng")?;
        let x = Vector::new(slice(x, dim, "x")?.to_vec())?;
        let report = r.0.sample(&x, &mut rng.0)?;
        write_vector(&report.raw, out_raw, dim, "out_raw")?;
        if !out_estimate.is_null() {
            write_vector(&report.debiased, out_estimate, dim, "out_estimate")?;
        }
        Ok(())
    })
}

/// Unbiased estimate of a raw report using public parameters only.
///
/// # Safety
/// The handle must be live; arrays must hold `dim` elements.
#[no_mangle]
pub unsafe extern "C" fn pic_randomizer_debias(
    randomizer: *const PicRandomizer,
    raw: *const f64,
    dim: usize,
    out_estimate: *mut f64,
) -> PicStatus {
    guard(|| {
        let r = handle(randomizer, "randomizer")?;
        let raw = Vector::new(slice(raw, dim, "raw")?.to_vec())?;
        write_vector(&r.0.debias(&raw)?, out_estimate, dim, "out_estimate")
    })
}

/// # Safety
/// Pointers must be valid; `rng` must be live.
#[no_mangle]
pub unsafe extern "C" fn pic_keypair_generate(rng: *mut PicRng, out_keys: *mut *mut PicKeyPair) -> PicStatus {
    guard(|| {
        let rng = out(rng, "rng")?;
        let dst = out(out_keys, "out_keys")?;
        *dst = Box::into_raw(Box::new(PicKeyPair(envelope::keygen(&mut rng.0))));
        Ok(())
    })
}

/// # Safety
/// `keys` must be null or a handle from [`pic_keypair_generate`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn pic_keypair_free(keys: *mut PicKeyPair) {
    if !keys.is_null() {
        drop(Box::from_raw(keys));
    }
}

/// Copies the public key into `out_pk`, which must hold `PIC_PUBLIC_KEY_LEN` bytes.
///
/// # Safety
/// `keys` must be live and `out_pk` writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn pic_keypair_public_key(keys: *const PicKeyPair, out_pk: *mut u8, cap: usize) -> PicStatus {
    guard(|| {
        let k = handle(keys, "keys")?;
        if cap < PUBLIC_KEY_LEN {
            return Err(Failure::new(PicStatus::BufferTooSmall, format!("public key needs {PUBLIC_KEY_LEN} bytes")));
        }
        if out_pk.is_null() {
            return Err(null("out_pk"));
        }
        ptr::copy_nonoverlapping(k.0.public_key().as_bytes().as_ptr(), out_pk, PUBLIC_KEY_LEN);
        Ok(())
    })
}

/// Encrypts `plaintext` to the holder of public key `pk`.
///
/// # Safety
/// Arrays must hold the stated lengths; `rng` must be live.
#[no_mangle]
pub unsafe extern "C" fn pic_encrypt(
    pk: *const u8,
    pk_len: usize,
    plaintext: *const u8,
    plaintext_len: usize,
    rng: *mut PicRng,
    out_ciphertext: *mut PicBuffer,
) -> PicStatus {
    guard(|| {
        let pk = PublicKey::from_bytes(slice(pk, pk_len, "pk")?)?;
        let msg = slice(plaintext, plaintext_len, "plaintext")?;
        let rng = out(rng, "rng")?;
        let dst = out(out_ciphertext, "out_ciphertext")?;
        *dst = buffer(envelope::encrypt(&pk, msg, &mut rng.0)?);
        Ok(())
    })
}

/// Opens a ciphertext produced for `keys`.
///
/// # Safety
/// `keys` must be live; `ciphertext` must hold `ciphertext_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pic_decrypt(
    keys: *const PicKeyPair,
    ciphertext: *const u8,
    ciphertext_len: usize,
    out_plaintext: *mut PicBuffer,
) -> PicStatus {
    guard(|| {
        let k = handle(keys, "keys")?;
        let ct = slice(ciphertext, ciphertext_len, "ciphertext")?;
        let dst = out(out_plaintext, "out_plaintext")?;
        *dst = buffer(envelope::decrypt(&k.0, ct)?);
        Ok(())
    })
}

/// Serializes a `(public key, report)` pair in the wire format.
///
/// # Safety
/// Arrays must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pic_encode_report(
    pk: *const u8,
    pk_len: usize,
    report: *const f64,
    dim: usize,
    out_bytes: *mut PicBuffer,
) -> PicStatus {
    guard(|| {
        let pk = slice(pk, pk_len, "pk")?;
        let v = Vector::new(slice(report, dim, "report")?.to_vec())?;
        let dst = out(out_bytes, "out_bytes")?;
        *dst = buffer(envelope::encode_report(pk, &v)?);
        Ok(())
    })
}

/// Parses a wire-format report. The key goes to `out_pk`; coordinates go to
/// `out_report` (capacity `cap`) and their count to `out_dim`, which is set
/// even when the capacity is too small.
///
/// # Safety
/// `bytes` must hold `len` bytes; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pic_decode_report(
    bytes: *const u8,
    len: usize,
    out_pk: *mut PicBuffer,
    out_report: *mut f64,
    cap: usize,
    out_dim: *mut usize,
) -> PicStatus {
    guard(|| {
        let (pk, v) = envelope::decode_report(slice(bytes, len, "bytes")?)?;
        let pk_dst = out(out_pk, "out_pk")?;
        *out(out_dim, "out_dim")? = v.dim();
        write_vector(&v, out_report, cap, "out_report")?;
        *pk_dst = buffer(pk);
        Ok(())
    })
}
