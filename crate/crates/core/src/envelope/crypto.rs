use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use hkdf::Hkdf;
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use x25519_dalek::{PublicKey as DhPublic, StaticSecret};

use crate::error::{invalid, Error, Result};

pub const CIPHERTEXT_VERSION: u8 = 0x01;
pub const PUBLIC_KEY_LEN: usize = 64;
pub const SIGNATURE_LEN: usize = 64;
pub const MAX_PLAINTEXT: usize = 64 * 1024;
/// Version byte, ephemeral key and AEAD tag.
pub const CIPHERTEXT_OVERHEAD: usize = 1 + 32 + 16;

const KDF_INFO: &[u8] = b"pic-envelope v1";

/// Where key material comes from. Deterministic seeding is for tests and
/// reproducible traces only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyEntropy {
    Os,
    Deterministic(u64),
}

/// Cryptographic rng selected by a [`KeyEntropy`].
pub enum KeyRng {
    Os(OsRng),
    Seeded(Box<ChaCha20Rng>),
}

impl KeyRng {
    pub fn new(entropy: KeyEntropy) -> Self {
        match entropy {
            KeyEntropy::Os => KeyRng::Os(OsRng),
            KeyEntropy::Deterministic(seed) => KeyRng::Seeded(Box::new(ChaCha20Rng::seed_from_u64(seed))),
        }
    }
}

impl RngCore for KeyRng {
    fn next_u32(&mut self) -> u32 {
        match self {
            KeyRng::Os(r) => r.next_u32(),
            KeyRng::Seeded(r) => r.next_u32(),
        }
    }

    fn next_u64(&mut self) -> u64 {
        match self {
            KeyRng::Os(r) => r.next_u64(),
            KeyRng::Seeded(r) => r.next_u64(),
        }
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        match self {
            KeyRng::Os(r) => r.fill_bytes(dest),
            KeyRng::Seeded(r) => r.fill_bytes(dest),
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        match self {
            KeyRng::Os(r) => r.try_fill_bytes(dest),
            KeyRng::Seeded(r) => r.try_fill_bytes(dest),
        }
    }
}

impl CryptoRng for KeyRng {}

/// Encryption key followed by verification key; also serves as the owner's
/// pseudonym on the bulletin board.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; PUBLIC_KEY_LEN] = bytes
            .try_into()
            .map_err(|_| invalid(format!("public key must be {PUBLIC_KEY_LEN} bytes, got {}", bytes.len())))?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    fn dh(&self) -> DhPublic {
        let mut b = [0u8; 32];
        b.copy_from_slice(&self.0[..32]);
        DhPublic::from(b)
    }

    fn verifying(&self) -> Option<VerifyingKey> {
        let mut b = [0u8; 32];
        b.copy_from_slice(&self.0[32..]);
        VerifyingKey::from_bytes(&b).ok()
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey(")?;
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// X25519 decryption key plus Ed25519 signing key.
#[derive(Clone)]
pub struct KeyPair {
    dh: StaticSecret,
    signing: SigningKey,
    public: PublicKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut seed = [0u8; 64];
        rng.fill_bytes(&mut seed);
        let pair = Self::from_seed(&seed);
        seed.fill(0);
        pair
    }

    /// Deterministic key pair from 64 bytes of secret material.
    pub fn from_seed(seed: &[u8; 64]) -> Self {
        let mut dh_bytes = [0u8; 32];
        let mut sig_bytes = [0u8; 32];
        dh_bytes.copy_from_slice(&seed[..32]);
        sig_bytes.copy_from_slice(&seed[32..]);
        let dh = StaticSecret::from(dh_bytes);
        let signing = SigningKey::from_bytes(&sig_bytes);
        let mut public = [0u8; PUBLIC_KEY_LEN];
        public[..32].copy_from_slice(DhPublic::from(&dh).as_bytes());
        public[32..].copy_from_slice(signing.verifying_key().as_bytes());
        Self { dh, signing, public: PublicKey(public) }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }
}

pub fn keygen<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    KeyPair::generate(rng)
}

fn derive_key(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> Key {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 32];
    hk.expand(KDF_INFO, &mut okm).expect("32 bytes is a valid HKDF output length");
    Key::from(okm)
}

/// Hybrid encryption: ephemeral X25519, HKDF-SHA256, ChaCha20-Poly1305.
///
/// Layout: version (1) || ephemeral public key (32) || AEAD ciphertext.
/// Each message uses a fresh key, so the fixed nonce never repeats under one key.
pub fn encrypt<R: RngCore + CryptoRng>(pk: &PublicKey, plaintext: &[u8], rng: &mut R) -> Result<Vec<u8>> {
    if plaintext.len() > MAX_PLAINTEXT {
        return Err(invalid(format!("plaintext of {} bytes exceeds {MAX_PLAINTEXT}", plaintext.len())));
    }
    let eph = StaticSecret::random_from_rng(&mut *rng);
    let eph_pub = DhPublic::from(&eph);
    let recipient = pk.dh();
    let shared = eph.diffie_hellman(&recipient);
    if !shared.was_contributory() {
        return Err(invalid("recipient key is a low-order point"));
    }
    let key = derive_key(shared.as_bytes(), eph_pub.as_bytes(), recipient.as_bytes());
    let mut out = Vec::with_capacity(CIPHERTEXT_OVERHEAD + plaintext.len());
    out.push(CIPHERTEXT_VERSION);
    out.extend_from_slice(eph_pub.as_bytes());
    let body = ChaCha20Poly1305::new(&key)
        .encrypt(&Nonce::default(), Payload { msg: plaintext, aad: &out })
        .map_err(|_| invalid("encryption failed"))?;
    out.extend_from_slice(&body);
    Ok(out)
}

/// Inverse of [`encrypt`]; every failure is reported as [`Error::Decryption`].
pub fn decrypt(keys: &KeyPair, ciphertext: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < CIPHERTEXT_OVERHEAD || ciphertext[0] != CIPHERTEXT_VERSION {
        return Err(Error::Decryption);
    }
    let (header, body) = ciphertext.split_at(33);
    let mut eph = [0u8; 32];
    eph.copy_from_slice(&header[1..]);
    let eph_pub = DhPublic::from(eph);
    let shared = keys.dh.diffie_hellman(&eph_pub);
    if !shared.was_contributory() {
        return Err(Error::Decryption);
    }
    let own = DhPublic::from(&keys.dh);
    let key = derive_key(shared.as_bytes(), &eph, own.as_bytes());
    ChaCha20Poly1305::new(&key)
        .decrypt(&Nonce::default(), Payload { msg: body, aad: header })
        .map_err(|_| Error::Decryption)
}

pub fn sign(keys: &KeyPair, message: &[u8]) -> [u8; SIGNATURE_LEN] {
    keys.signing.sign(message).to_bytes()
}

/// Checks an Ed25519 signature; malformed inputs yield `false`.
pub fn verify(pk: &PublicKey, message: &[u8], signature: &[u8]) -> bool {
    let Some(vk) = pk.verifying() else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(signature) else {
        return false;
    };
    vk.verify(message, &sig).is_ok()
}
