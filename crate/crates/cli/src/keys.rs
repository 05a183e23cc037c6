use permchain_core::crypto::{generate_keypair, hash, Keypair};
use serde::{Deserialize, Serialize};

/// 32 seed bytes from a string: 64 hex digits are used verbatim, anything
/// else is hashed.
pub fn seed_bytes(seed: &str) -> [u8; 32] {
    let s = seed.strip_prefix("0x").unwrap_or(seed);
    if s.len() == 64 {
        if let Ok(bytes) = hex::decode(s) {
            return bytes.try_into().expect("32 bytes");
        }
    }
    hash(seed.as_bytes()).0
}

pub fn key_from_seed(seed: &str) -> Keypair {
    generate_keypair(seed_bytes(seed))
}

/// Numeric seeds are taken as is; other strings are hashed down to 64 bits.
pub fn seed_u64(seed: &str) -> u64 {
    seed.parse().unwrap_or_else(|_| {
        u64::from_be_bytes(hash(seed.as_bytes()).0[..8].try_into().expect("8 bytes"))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyInfo {
    pub secret_key: String,
    pub public_key: String,
    pub address: String,
}

impl KeyInfo {
    pub fn new(k: &Keypair) -> Self {
        Self {
            secret_key: k.secret.to_hex(),
            public_key: hex::encode(k.secret.public_key()),
            address: k.address.to_hex(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_seed_is_verbatim() {
        let hex_seed = "07".repeat(32);
        assert_eq!(seed_bytes(&hex_seed), [7; 32]);
        assert_eq!(seed_bytes(&format!("0x{hex_seed}")), [7; 32]);
        assert_eq!(seed_bytes("alice"), hash(b"alice").0);
    }

    #[test]
    fn stable_keys() {
        assert_eq!(
            KeyInfo::new(&key_from_seed("x")),
            KeyInfo::new(&key_from_seed("x"))
        );
        assert_ne!(key_from_seed("x").address, key_from_seed("y").address);
    }

    #[test]
    fn numeric_seeds() {
        assert_eq!(seed_u64("42"), 42);
        assert_eq!(seed_u64("abc"), seed_u64("abc"));
        assert_ne!(seed_u64("abc"), seed_u64("abd"));
    }
}
