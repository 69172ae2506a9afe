//! Hashing, node identities and signatures.
//!
//! SHA-256 digests and Ed25519 signatures. A node's address is the SHA-256
//! digest of its public key, so anyone holding the key can check which
//! address it belongs to.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::Sha256;
use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

/// Recorded in the genesis block so every node agrees on the primitives.
pub const SIGNATURE_SCHEME: &str = "ed25519";
pub const HASH_SCHEME: &str = "sha256";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed public key: {0}")]
    MalformedPublicKey(String),
    #[error("invalid hex: {0}")]
    Hex(String),
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
}

macro_rules! hex_bytes {
    ($name:ident, $len:expr) => {
        impl $name {
            pub const fn from_bytes(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
                let raw = hex::decode(s).map_err(|e| CryptoError::Hex(e.to_string()))?;
                let bytes: [u8; $len] = raw.try_into().map_err(|v: Vec<u8>| CryptoError::Length {
                    expected: $len,
                    actual: v.len(),
                })?;
                Ok(Self(bytes))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let h = self.to_hex();
                write!(f, "{}({}..)", stringify!($name), &h[..12])
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(de::Error::custom)
            }
        }

        impl Encode for $name {
            fn encode(&self, w: &mut Writer) {
                w.bytes(&self.0);
            }
        }

        impl Decode for $name {
            fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                let raw = r.bytes()?;
                let bytes: [u8; $len] = raw.try_into().map_err(|_| DecodeError::Invalid {
                    field: stringify!($name),
                    reason: format!("expected {} bytes, got {}", $len, raw.len()),
                })?;
                Ok(Self(bytes))
            }
        }
    };
}

/// Fixed-length SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest([u8; DIGEST_LEN]);
hex_bytes!(Digest, DIGEST_LEN);

/// A node address: the digest of its public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address([u8; DIGEST_LEN]);
hex_bytes!(Address, DIGEST_LEN);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);
hex_bytes!(PublicKey, PUBLIC_KEY_LEN);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature([u8; SIGNATURE_LEN]);
hex_bytes!(Signature, SIGNATURE_LEN);

impl Signature {
    /// Placeholder carried by artifacts built with signing disabled.
    pub const EMPTY: Signature = Signature([0u8; SIGNATURE_LEN]);
}

impl Address {
    pub fn of(public_key: &PublicKey) -> Address {
        Address(hash(public_key.as_bytes()).0)
    }
}

pub fn hash(content: &[u8]) -> Digest {
    use sha2::Digest as _;
    Digest(Sha256::digest(content).into())
}

/// A key pair plus the address derived from it.
#[derive(Clone)]
pub struct NodeIdentity {
    signing_key: SigningKey,
    public_key: PublicKey,
    address: Address,
}

impl fmt::Debug for NodeIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeIdentity")
            .field("address", &self.address)
            .finish_non_exhaustive()
    }
}

impl NodeIdentity {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let signing_key = SigningKey::from_bytes(&secret);
        let public_key = PublicKey(signing_key.verifying_key().to_bytes());
        Self {
            address: Address::of(&public_key),
            signing_key,
            public_key,
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public_key
    }

    pub fn address(&self) -> &Address {
        &self.address
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing_key.to_bytes()
    }
}

/// Creates a key pair and address. With a seed the result is fully
/// deterministic; without one the OS generator is used.
pub fn generate_identity(seed: Option<u64>) -> NodeIdentity {
    let mut secret = [0u8; 32];
    match seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed).fill(&mut secret),
        None => rand::rng().fill(&mut secret),
    }
    NodeIdentity::from_secret(secret)
}

pub fn sign(identity: &NodeIdentity, digest: &Digest) -> Signature {
    Signature(identity.signing_key.sign(digest.as_bytes()).to_bytes())
}

/// Checks `signature` over `digest`. Key bytes that do not decode to a valid
/// curve point are reported as an error rather than a failed verification.
pub fn verify(
    public_key: &PublicKey,
    digest: &Digest,
    signature: &Signature,
) -> Result<bool, CryptoError> {
    let key = VerifyingKey::from_bytes(public_key.as_bytes())
        .map_err(|e| CryptoError::MalformedPublicKey(e.to_string()))?;
    let sig = ed25519_dalek::Signature::from_bytes(signature.as_bytes());
    Ok(key.verify(digest.as_bytes(), &sig).is_ok())
}
