use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Decode, Decoder, Encode, Encoder};
use crate::crypto::{Address, Digest32};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {what} from {input:?}")]
pub struct FlagParseError {
    what: &'static str,
    input: String,
}

/// CRUD bitmask. Only the low four bits are meaningful.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permission(pub u8);

impl Permission {
    pub const NONE: Permission = Permission(0);
    pub const CREATE: Permission = Permission(1);
    pub const READ: Permission = Permission(2);
    pub const UPDATE: Permission = Permission(4);
    pub const DELETE: Permission = Permission(8);
    pub const ALL: Permission = Permission(0x0F);

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Uses no bits above the CRUD nibble.
    pub fn is_valid(self) -> bool {
        self.0 & !Self::ALL.0 == 0
    }

    /// True iff every bit of `op` is present in `self`.
    pub fn contains(self, op: Permission) -> bool {
        op.0 & !self.0 == 0
    }

    /// Exactly one CRUD bit set.
    pub fn is_single(self) -> bool {
        self.is_valid() && self.0.count_ones() == 1
    }

    pub fn union(self, other: Permission) -> Permission {
        Permission(self.0 | other.0)
    }
}

impl std::ops::BitOr for Permission {
    type Output = Permission;

    fn bitor(self, rhs: Permission) -> Permission {
        self.union(rhs)
    }
}

impl fmt::Debug for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permission({self})")
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("-");
        }
        for (bit, c) in [(1u8, 'C'), (2, 'R'), (4, 'U'), (8, 'D')] {
            if self.0 & bit != 0 {
                write!(f, "{c}")?;
            }
        }
        if !self.is_valid() {
            write!(f, "+{:#04x}", self.0 & !Self::ALL.0)?;
        }
        Ok(())
    }
}

/// Accepts a decimal bitmask (`"6"`) or letters from `CRUD`, optionally
/// separated by `|` (`"R|U"`, `"RU"`).
impl FromStr for Permission {
    type Err = FlagParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FlagParseError {
            what: "permission",
            input: s.to_string(),
        };
        let s = s.trim();
        if let Ok(n) = s.parse::<u8>() {
            return Ok(Permission(n));
        }
        if s.is_empty() || s == "-" {
            return Ok(Permission::NONE);
        }
        let mut bits = 0u8;
        for c in s.chars().filter(|c| *c != '|' && !c.is_whitespace()) {
            bits |= match c.to_ascii_uppercase() {
                'C' => 1,
                'R' => 2,
                'U' => 4,
                'D' => 8,
                _ => return Err(err()),
            };
        }
        Ok(Permission(bits))
    }
}

/// Party roles; non-exclusive.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Roles(pub u8);

impl Roles {
    pub const NONE: Roles = Roles(0);
    pub const DATA_OWNER: Roles = Roles(1);
    pub const SERVICE_PROVIDER: Roles = Roles(2);
    pub const THIRD_PARTY: Roles = Roles(4);

    pub fn has(self, role: Roles) -> bool {
        role.0 != 0 && self.0 & role.0 == role.0
    }

    pub fn is_valid(self) -> bool {
        self.0 & !0x07 == 0
    }
}

impl std::ops::BitOr for Roles {
    type Output = Roles;

    fn bitor(self, rhs: Roles) -> Roles {
        Roles(self.0 | rhs.0)
    }
}

impl fmt::Debug for Roles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Roles({self})")
    }
}

impl fmt::Display for Roles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(1u8, "DO"), (2, "SP"), (4, "TP")]
            .into_iter()
            .filter(|(bit, _)| self.0 & bit != 0)
            .map(|(_, n)| n)
            .collect();
        if names.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&names.join("|"))
        }
    }
}

/// `"DO|SP"`, `"TP"`, `"-"` (no role) or a decimal bitmask.
impl FromStr for Roles {
    type Err = FlagParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(n) = s.parse::<u8>() {
            return Ok(Roles(n));
        }
        if s.is_empty() || s == "-" {
            return Ok(Roles::NONE);
        }
        let mut bits = 0u8;
        for part in s.split(['|', ',']) {
            bits |= match part.trim().to_ascii_uppercase().as_str() {
                "DO" => 1,
                "SP" => 2,
                "TP" => 4,
                _ => {
                    return Err(FlagParseError {
                        what: "roles",
                        input: s.to_string(),
                    })
                }
            };
        }
        Ok(Roles(bits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyRecord {
    pub address: Address,
    pub roles: Roles,
    pub registered_at: u64,
}

/// Composite key of the access ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartyTriple {
    pub data_owner: Address,
    pub service_provider: Address,
    pub third_party: Address,
}

impl PartyTriple {
    pub fn new(data_owner: Address, service_provider: Address, third_party: Address) -> Self {
        Self {
            data_owner,
            service_provider,
            third_party,
        }
    }
}

/// Value of an access-ledger entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub data_pointer: String,
    pub data_hash: Digest32,
    pub access_token: Option<Digest32>,
    pub permission: Permission,
}

/// Value of a token-ledger entry, keyed by the access token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub parties: PartyTriple,
    pub issued_at: u64,
    pub status: bool,
    pub permissions: Permission,
    pub expires_in: u64,
    pub refresh_count: u64,
}

impl TokenRecord {
    /// Valid strictly before `issued_at + expires_in`.
    pub fn is_fresh(&self, now: u64) -> bool {
        now < self.issued_at.saturating_add(self.expires_in)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BadSignature,
    UnknownToken,
    WrongParty,
    InsufficientPermission,
    Expired,
    Revoked,
    RefreshExhausted,
}

impl RejectReason {
    fn code(self) -> u8 {
        match self {
            RejectReason::BadSignature => 1,
            RejectReason::UnknownToken => 2,
            RejectReason::WrongParty => 3,
            RejectReason::InsufficientPermission => 4,
            RejectReason::Expired => 5,
            RejectReason::Revoked => 6,
            RejectReason::RefreshExhausted => 7,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => RejectReason::BadSignature,
            2 => RejectReason::UnknownToken,
            3 => RejectReason::WrongParty,
            4 => RejectReason::InsufficientPermission,
            5 => RejectReason::Expired,
            6 => RejectReason::Revoked,
            7 => RejectReason::RefreshExhausted,
            _ => return None,
        })
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum");
        f.write_str(s.as_str().unwrap_or("rejected"))
    }
}

/// Outcome of a validation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

impl Encode for Permission {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u8(self.0);
    }
}

impl Decode for Permission {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Permission(dec.u8()?))
    }
}

impl Encode for PartyTriple {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_address(&self.data_owner)
            .put_address(&self.service_provider)
            .put_address(&self.third_party);
    }
}

impl Decode for PartyTriple {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(PartyTriple {
            data_owner: dec.address()?,
            service_provider: dec.address()?,
            third_party: dec.address()?,
        })
    }
}

impl Encode for PartyRecord {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_address(&self.address)
            .put_u8(self.roles.0)
            .put_u64(self.registered_at);
    }
}

impl Decode for PartyRecord {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(PartyRecord {
            address: dec.address()?,
            roles: Roles(dec.u8()?),
            registered_at: dec.u64()?,
        })
    }
}

impl Encode for AccessRecord {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_str(&self.data_pointer).put_digest(&self.data_hash);
        match &self.access_token {
            Some(t) => enc.put_u8(1).put_digest(t),
            None => enc.put_u8(0),
        };
        enc.put(&self.permission);
    }
}

impl Decode for AccessRecord {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let data_pointer = dec.string()?;
        let data_hash = dec.digest()?;
        let access_token = match dec.u8()? {
            0 => None,
            1 => Some(dec.digest()?),
            tag => {
                return Err(CodecError::InvalidTag {
                    what: "access_token",
                    tag,
                })
            }
        };
        Ok(AccessRecord {
            data_pointer,
            data_hash,
            access_token,
            permission: dec.get()?,
        })
    }
}

impl Encode for TokenRecord {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.parties)
            .put_u64(self.issued_at)
            .put_bool(self.status)
            .put(&self.permissions)
            .put_u64(self.expires_in)
            .put_u64(self.refresh_count);
    }
}

impl Decode for TokenRecord {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(TokenRecord {
            parties: dec.get()?,
            issued_at: dec.u64()?,
            status: dec.bool()?,
            permissions: dec.get()?,
            expires_in: dec.u64()?,
            refresh_count: dec.u64()?,
        })
    }
}

impl Encode for Verdict {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Verdict::Accepted => enc.put_u8(0),
            Verdict::Rejected(r) => enc.put_u8(r.code()),
        };
    }
}

impl Decode for Verdict {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            0 => Ok(Verdict::Accepted),
            code => {
                RejectReason::from_code(code)
                    .map(Verdict::Rejected)
                    .ok_or(CodecError::InvalidTag {
                        what: "verdict",
                        tag: code,
                    })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permission_parsing() {
        assert_eq!("R".parse::<Permission>().unwrap(), Permission::READ);
        assert_eq!("R|U".parse::<Permission>().unwrap(), Permission(6));
        assert_eq!("crud".parse::<Permission>().unwrap(), Permission::ALL);
        assert_eq!("6".parse::<Permission>().unwrap(), Permission(6));
        assert!("X".parse::<Permission>().is_err());
        assert_eq!(Permission(6).to_string(), "RU");
    }

    #[test]
    fn permission_subset() {
        let ru = Permission::READ | Permission::UPDATE;
        assert!(ru.contains(Permission::READ));
        assert!(!ru.contains(Permission::DELETE));
        assert!(ru.contains(Permission::NONE));
        assert!(!Permission(0x10).is_valid());
    }

    #[test]
    fn roles_parsing() {
        let r: Roles = "DO|SP".parse().unwrap();
        assert!(r.has(Roles::DATA_OWNER));
        assert!(r.has(Roles::SERVICE_PROVIDER));
        assert!(!r.has(Roles::THIRD_PARTY));
        assert_eq!(r.to_string(), "DO|SP");
    }

    #[test]
    fn expiry_boundary() {
        let rec = TokenRecord {
            parties: PartyTriple::new(Address::default(), Address::default(), Address::default()),
            issued_at: 100,
            status: true,
            permissions: Permission::READ,
            expires_in: 10,
            refresh_count: 0,
        };
        assert!(rec.is_fresh(109));
        assert!(!rec.is_fresh(110));
    }
}
