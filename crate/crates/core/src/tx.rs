use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Decode, Decoder, Encode, Encoder};
use crate::contract::{Permission, Roles};
use crate::crypto::{self, hash, Address, Digest32, Keypair, Signature};

/// Coarse transaction class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TxKind {
    /// Registration, grant and revocation.
    AcTran,
    DqTokenRequest,
    RsValidation,
}

impl TxKind {
    fn code(self) -> u8 {
        match self {
            TxKind::AcTran => 1,
            TxKind::DqTokenRequest => 2,
            TxKind::RsValidation => 3,
        }
    }
}

/// Parameters of a data query presented to the resource server and checked
/// on-chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationRequest {
    pub token: Digest32,
    /// Identity of the party presenting the token.
    pub pk: Address,
    /// Signature by `pk` over [`crate::contract::validation_challenge`].
    pub t: Signature,
    pub op: Permission,
    /// Per-request nonce issued by the resource server.
    pub request_nonce: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Register {
        roles: Roles,
    },
    Grant {
        service_provider: Address,
        third_party: Address,
        permission: Permission,
        data_pointer: String,
        data_hash: Digest32,
    },
    Revoke {
        service_provider: Address,
        third_party: Address,
    },
    RequestToken {
        data_owner: Address,
        service_provider: Address,
        op: Permission,
    },
    Validate(ValidationRequest),
}

impl Payload {
    pub fn kind(&self) -> TxKind {
        match self {
            Payload::Register { .. } | Payload::Grant { .. } | Payload::Revoke { .. } => {
                TxKind::AcTran
            }
            Payload::RequestToken { .. } => TxKind::DqTokenRequest,
            Payload::Validate(_) => TxKind::RsValidation,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payload::Register { .. } => "register",
            Payload::Grant { .. } => "grant",
            Payload::Revoke { .. } => "revoke",
            Payload::RequestToken { .. } => "request_token",
            Payload::Validate(_) => "validation",
        }
    }
}

impl Encode for Payload {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Payload::Register { roles } => {
                enc.put_u8(0).put_u8(roles.0);
            }
            Payload::Grant {
                service_provider,
                third_party,
                permission,
                data_pointer,
                data_hash,
            } => {
                enc.put_u8(1)
                    .put_address(service_provider)
                    .put_address(third_party)
                    .put(permission)
                    .put_str(data_pointer)
                    .put_digest(data_hash);
            }
            Payload::Revoke {
                service_provider,
                third_party,
            } => {
                enc.put_u8(2)
                    .put_address(service_provider)
                    .put_address(third_party);
            }
            Payload::RequestToken {
                data_owner,
                service_provider,
                op,
            } => {
                enc.put_u8(3)
                    .put_address(data_owner)
                    .put_address(service_provider)
                    .put(op);
            }
            Payload::Validate(v) => {
                enc.put_u8(4)
                    .put_digest(&v.token)
                    .put_address(&v.pk)
                    .put_signature(&v.t)
                    .put(&v.op)
                    .put_u64(v.request_nonce);
            }
        }
    }
}

impl Decode for Payload {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(match dec.u8()? {
            0 => Payload::Register {
                roles: Roles(dec.u8()?),
            },
            1 => Payload::Grant {
                service_provider: dec.address()?,
                third_party: dec.address()?,
                permission: dec.get()?,
                data_pointer: dec.string()?,
                data_hash: dec.digest()?,
            },
            2 => Payload::Revoke {
                service_provider: dec.address()?,
                third_party: dec.address()?,
            },
            3 => Payload::RequestToken {
                data_owner: dec.address()?,
                service_provider: dec.address()?,
                op: dec.get()?,
            },
            4 => Payload::Validate(ValidationRequest {
                token: dec.digest()?,
                pk: dec.address()?,
                t: dec.signature()?,
                op: dec.get()?,
                request_nonce: dec.u64()?,
            }),
            tag => {
                return Err(CodecError::InvalidTag {
                    what: "payload",
                    tag,
                })
            }
        })
    }
}

/// A signed proposal to invoke the contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    pub payload: Payload,
    pub signature: Signature,
}

impl Transaction {
    /// Builds and signs a proposal.
    pub fn new_signed(key: &Keypair, nonce: u64, payload: Payload) -> Self {
        let mut tx = Transaction {
            sender: key.address,
            nonce,
            payload,
            signature: Signature::default(),
        };
        tx.signature = key.sign(&tx.signing_bytes());
        tx
    }

    pub fn kind(&self) -> TxKind {
        self.payload.kind()
    }

    /// Canonical encoding of `(sender, nonce, kind, payload)`.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.put_address(&self.sender)
            .put_u64(self.nonce)
            .put_u8(self.kind().code())
            .put(&self.payload);
        enc.finish()
    }

    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.sender, &self.signing_bytes(), &self.signature)
    }

    /// Hash of the full encoding, signature included.
    pub fn digest(&self) -> Digest32 {
        hash(&self.to_bytes())
    }
}

impl Encode for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_address(&self.sender)
            .put_u64(self.nonce)
            .put_u8(self.kind().code())
            .put(&self.payload)
            .put_signature(&self.signature);
    }
}

impl Decode for Transaction {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let sender = dec.address()?;
        let nonce = dec.u64()?;
        let kind = dec.u8()?;
        let payload: Payload = dec.get()?;
        if payload.kind().code() != kind {
            return Err(CodecError::Invalid(
                "transaction kind does not match payload",
            ));
        }
        Ok(Transaction {
            sender,
            nonce,
            payload,
            signature: dec.signature()?,
        })
    }
}
