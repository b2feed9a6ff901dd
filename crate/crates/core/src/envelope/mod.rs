//! Keys, hybrid encryption, signatures, wire codec and the shuffler.

mod codec;
mod crypto;
mod shuffle;

pub(crate) use codec::{put_u16_len, put_u32_len, put_vector, Reader};
pub use codec::{decode_report, encode_report, frame, unframe, FORMAT_VERSION};
pub use crypto::{
    decrypt, encrypt, keygen, sign, verify, KeyEntropy, KeyPair, KeyRng, PublicKey,
    CIPHERTEXT_OVERHEAD, MAX_PLAINTEXT, PUBLIC_KEY_LEN, SIGNATURE_LEN,
};
pub use shuffle::{shuffle, ShuffleResult};

use crate::error::Result;

/// An encrypted `(one-time public key || sanitized report)` message.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub ciphertext: Vec<u8>,
}

impl Envelope {
    /// Wire form: `0x01 || u32 length || ciphertext`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        frame(&self.ciphertext)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(Self { ciphertext: unframe(bytes)? })
    }
}
