//! Identity and hashing primitives shared by the chain, the contract and the
//! resource server.
//!
//! Party identities are 20-byte addresses taken from the tail of the SHA-256
//! digest of an Ed25519 public key. Because an address alone cannot be used to
//! check an Ed25519 signature, a [`Signature`] carries the signer's public key
//! next to the 64-byte signature proper; [`verify`] binds the two together by
//! re-deriving the address.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const ADDRESS_LEN: usize = 20;
pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = PUBLIC_KEY_LEN + 64;

#[derive(Debug, Clone, thiserror::Error)]
pub enum HexError {
    #[error("invalid hex: {0}")]
    Invalid(#[from] hex::FromHexError),
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
}

fn decode_hex(s: &str) -> Result<Vec<u8>, HexError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    Ok(hex::decode(s)?)
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                <[u8; $len]>::try_from(bytes).ok().map(Self)
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = HexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let bytes = decode_hex(s)?;
                Self::from_slice(&bytes).ok_or(HexError::Length {
                    expected: $len,
                    actual: bytes.len(),
                })
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
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 20-byte party identifier derived from a public key.
    Address,
    ADDRESS_LEN
);

fixed_bytes!(
    /// SHA-256 output. Used for block hashes, data hashes, Merkle roots and
    /// access tokens.
    Digest32,
    DIGEST_LEN
);

impl Address {
    pub fn from_public_key(pk: &[u8; PUBLIC_KEY_LEN]) -> Self {
        let digest = hash(pk);
        let mut out = [0u8; ADDRESS_LEN];
        out.copy_from_slice(&digest.0[DIGEST_LEN - ADDRESS_LEN..]);
        Address(out)
    }
}

/// Public key followed by an Ed25519 signature. Stored as raw bytes so that
/// malformed input can be represented and rejected by [`verify`].
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

impl FromStr for Signature {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_hex(s).map(Signature)
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ed25519 secret seed.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SecretKey(bytes)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    fn signing_key(&self) -> SigningKey {
        SigningKey::from_bytes(&self.0)
    }

    pub fn public_key(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.signing_key().verifying_key().to_bytes()
    }

    pub fn address(&self) -> Address {
        Address::from_public_key(&self.public_key())
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl FromStr for SecretKey {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = decode_hex(s)?;
        let arr = <[u8; 32]>::try_from(bytes.as_slice()).map_err(|_| HexError::Length {
            expected: 32,
            actual: bytes.len(),
        })?;
        Ok(SecretKey(arr))
    }
}

#[derive(Clone, Debug)]
pub struct Keypair {
    pub secret: SecretKey,
    pub address: Address,
}

impl Keypair {
    pub fn sign(&self, msg: &[u8]) -> Signature {
        sign(&self.secret, msg)
    }
}

/// Deterministic key generation: the seed is used directly as the Ed25519
/// secret.
pub fn generate_keypair(seed: [u8; 32]) -> Keypair {
    let secret = SecretKey(seed);
    let address = secret.address();
    Keypair { secret, address }
}

/// Keypair from OS entropy.
pub fn random_keypair() -> Keypair {
    generate_keypair(rand::random())
}

pub fn sign(sk: &SecretKey, msg: &[u8]) -> Signature {
    let key = sk.signing_key();
    let sig = key.sign(msg);
    let mut out = Vec::with_capacity(SIGNATURE_LEN);
    out.extend_from_slice(&key.verifying_key().to_bytes());
    out.extend_from_slice(&sig.to_bytes());
    Signature(out)
}

/// True iff `sig` was produced over `msg` by the key whose address is `addr`.
/// Malformed signatures yield `false`.
pub fn verify(addr: &Address, msg: &[u8], sig: &Signature) -> bool {
    let bytes = sig.as_bytes();
    if bytes.len() != SIGNATURE_LEN {
        return false;
    }
    let (pk_bytes, sig_bytes) = bytes.split_at(PUBLIC_KEY_LEN);
    let pk: [u8; PUBLIC_KEY_LEN] = pk_bytes.try_into().expect("split length");
    if Address::from_public_key(&pk) != *addr {
        return false;
    }
    let Ok(key) = VerifyingKey::from_bytes(&pk) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(sig_bytes.try_into().expect("split length"));
    key.verify_strict(msg, &sig).is_ok()
}

pub fn hash(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

/// Hash of several parts concatenated, without building the intermediate
/// buffer.
pub fn hash_parts(parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest32(h.finalize().into())
}

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

/// Binary Merkle root. Leaves are hashed as `H(0x00 || leaf)`, interior nodes
/// as `H(0x01 || left || right)`; an odd node at any level is paired with
/// itself. The empty tree commits to `H("")`.
pub fn merkle_root(leaves: &[Digest32]) -> Digest32 {
    if leaves.is_empty() {
        return hash(&[]);
    }
    let mut level: Vec<Digest32> = leaves
        .iter()
        .map(|l| hash_parts(&[&[LEAF_PREFIX], &l.0]))
        .collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let left = &pair[0];
                let right = pair.get(1).unwrap_or(left);
                hash_parts(&[&[NODE_PREFIX], &left.0, &right.0])
            })
            .collect();
    }
    level[0]
}
