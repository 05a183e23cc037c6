//! Access-control contract executed inside every transaction.
//!
//! The contract keeps two logical ledgers in [`LedgerState`]:
//!
//! * the access ledger, keyed by the `(DO, SP, TP)` party triple, holding the
//!   data pointer, data hash, CRUD permission and the current access token;
//! * the token ledger, keyed by the access token, holding issuance metadata.
//!
//! Party registrations, per-sender nonces and validation verdicts live next to
//! them under their own key prefixes. All functions here are deterministic in
//! `(state, transaction, ExecContext)`.

mod audit;
mod types;

pub use audit::{audit_trail, AuditEntry, AuditFilter};
pub use types::{
    AccessRecord, FlagParseError, PartyRecord, PartyTriple, Permission, RejectReason, Roles,
    TokenRecord, Verdict,
};

use serde::{Deserialize, Serialize};

use crate::codec::{Decode, Encode, Encoder};
use crate::crypto::{self, hash_parts, Address, Digest32};
use crate::state::LedgerState;
use crate::tx::{Payload, Transaction, ValidationRequest};

const PARTY_PREFIX: &[u8] = b"party/";
const NONCE_PREFIX: &[u8] = b"nonce/";
const ACCESS_PREFIX: &[u8] = b"access/";
const TOKEN_PREFIX: &[u8] = b"token/";
const VERDICT_PREFIX: &[u8] = b"verdict/";

const CHALLENGE_DOMAIN: &[u8] = b"permchain/validation/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractConfig {
    /// Lifetime of an access token in simulated seconds.
    pub token_ttl: u64,
    /// Third-party acceptances allowed per token.
    pub refresh_threshold: u64,
}

impl Default for ContractConfig {
    fn default() -> Self {
        Self {
            token_ttl: 3600,
            refresh_threshold: 100,
        }
    }
}

/// Block-level inputs visible to contract execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecContext {
    pub chain_id: u64,
    /// Hash of the chain tip the containing block extends.
    pub tip_hash: Digest32,
    /// Timestamp of the containing block.
    pub timestamp: u64,
    pub config: ContractConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("address {0} is already registered")]
    AlreadyRegistered(Address),
    #[error("address {0} is not registered")]
    UnregisteredParty(Address),
    #[error("permission must not be empty")]
    EmptyPermission,
    #[error("permission {0} uses bits outside CRUD")]
    InvalidPermission(Permission),
    #[error("roles {0} use undefined bits")]
    InvalidRoles(Roles),
    #[error("sender is not a data owner")]
    NotOwner,
    #[error("sender is not a third party")]
    NotThirdParty,
    #[error("no access record for this party triple")]
    NoSuchRecord,
    #[error("requested operation is not granted")]
    PermissionDenied,
}

/// What a successfully executed transaction did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum TxEffect {
    Registered,
    Granted,
    Revoked,
    TokenIssued { token: Digest32 },
    Validated { verdict: Verdict },
}

fn key(prefix: &[u8], parts: &[&[u8]]) -> Vec<u8> {
    let mut k = prefix.to_vec();
    for p in parts {
        k.extend_from_slice(p);
    }
    k
}

fn read<T: Decode>(state: &LedgerState, key: &[u8]) -> Option<T> {
    // Entries are only ever written by this module, so a decode failure means
    // the state was corrupted outside the contract.
    state
        .get(key)
        .map(|raw| T::from_bytes(raw).expect("corrupt ledger entry"))
}

fn access_key(t: &PartyTriple) -> Vec<u8> {
    key(
        ACCESS_PREFIX,
        &[&t.data_owner.0, &t.service_provider.0, &t.third_party.0],
    )
}

pub fn party(state: &LedgerState, addr: &Address) -> Option<PartyRecord> {
    read(state, &key(PARTY_PREFIX, &[&addr.0]))
}

pub fn put_party(state: &mut LedgerState, rec: &PartyRecord) {
    state.insert(key(PARTY_PREFIX, &[&rec.address.0]), rec.to_bytes());
}

pub fn access_record(state: &LedgerState, triple: &PartyTriple) -> Option<AccessRecord> {
    read(state, &access_key(triple))
}

pub fn put_access_record(state: &mut LedgerState, triple: &PartyTriple, rec: &AccessRecord) {
    state.insert(access_key(triple), rec.to_bytes());
}

pub fn token_record(state: &LedgerState, token: &Digest32) -> Option<TokenRecord> {
    read(state, &key(TOKEN_PREFIX, &[&token.0]))
}

pub fn put_token_record(state: &mut LedgerState, token: &Digest32, rec: &TokenRecord) {
    state.insert(key(TOKEN_PREFIX, &[&token.0]), rec.to_bytes());
}

/// Highest nonce committed for `addr`; 0 when the address never transacted.
pub fn committed_nonce(state: &LedgerState, addr: &Address) -> u64 {
    state
        .get(&key(NONCE_PREFIX, &[&addr.0]))
        .map(|raw| u64::from_be_bytes(raw.try_into().expect("corrupt nonce entry")))
        .unwrap_or(0)
}

fn set_nonce(state: &mut LedgerState, addr: &Address, nonce: u64) {
    state.insert(key(NONCE_PREFIX, &[&addr.0]), nonce.to_be_bytes().to_vec());
}

/// Verdict recorded by a committed validation transaction.
pub fn verdict(state: &LedgerState, tx_digest: &Digest32) -> Option<Verdict> {
    read(state, &key(VERDICT_PREFIX, &[&tx_digest.0]))
}

/// All access-ledger entries in key order.
pub fn access_records(state: &LedgerState) -> Vec<(PartyTriple, AccessRecord)> {
    state
        .scan_prefix(ACCESS_PREFIX)
        .map(|(k, v)| {
            let triple = PartyTriple::from_bytes(&k[ACCESS_PREFIX.len()..]).expect("corrupt key");
            (
                triple,
                AccessRecord::from_bytes(v).expect("corrupt ledger entry"),
            )
        })
        .collect()
}

/// All token-ledger entries in key order.
pub fn token_records(state: &LedgerState) -> Vec<(Digest32, TokenRecord)> {
    state
        .scan_prefix(TOKEN_PREFIX)
        .map(|(k, v)| {
            let token = Digest32::from_slice(&k[TOKEN_PREFIX.len()..]).expect("corrupt key");
            (
                token,
                TokenRecord::from_bytes(v).expect("corrupt ledger entry"),
            )
        })
        .collect()
}

/// True iff an access record exists for the triple and grants every bit of
/// `op`.
pub fn check_permission(state: &LedgerState, triple: &PartyTriple, op: Permission) -> bool {
    access_record(state, triple).is_some_and(|rec| rec.permission.contains(op))
}

/// `H(DO || SP || TP || block_hash)` with every field fixed-width.
pub fn derive_access_token(triple: &PartyTriple, block_hash: &Digest32) -> Digest32 {
    hash_parts(&[
        &triple.data_owner.0,
        &triple.service_provider.0,
        &triple.third_party.0,
        &block_hash.0,
    ])
}

/// Message a party signs to present `token` for `op` at the resource server.
pub fn validation_challenge(
    token: &Digest32,
    op: Permission,
    chain_id: u64,
    request_nonce: u64,
) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.put_bytes(CHALLENGE_DOMAIN)
        .put_digest(token)
        .put(&op)
        .put_u64(chain_id)
        .put_u64(request_nonce);
    enc.finish()
}

fn require_party(state: &LedgerState, addr: &Address) -> Result<PartyRecord, ContractError> {
    party(state, addr).ok_or(ContractError::UnregisteredParty(*addr))
}

/// Contract-level precondition for `tx` against `state`. Signature and nonce
/// are checked by the chain.
pub fn precondition(
    state: &LedgerState,
    tx: &Transaction,
    _ctx: &ExecContext,
) -> Result<(), ContractError> {
    let sender = &tx.sender;
    match &tx.payload {
        Payload::Register { roles } => {
            if !roles.is_valid() {
                return Err(ContractError::InvalidRoles(*roles));
            }
            if party(state, sender).is_some() {
                return Err(ContractError::AlreadyRegistered(*sender));
            }
        }
        Payload::Grant {
            service_provider,
            third_party,
            permission,
            ..
        } => {
            let owner = require_party(state, sender)?;
            if !owner.roles.has(Roles::DATA_OWNER) {
                return Err(ContractError::NotOwner);
            }
            require_party(state, service_provider)?;
            require_party(state, third_party)?;
            if permission.is_empty() {
                return Err(ContractError::EmptyPermission);
            }
            if !permission.is_valid() {
                return Err(ContractError::InvalidPermission(*permission));
            }
        }
        Payload::Revoke {
            service_provider,
            third_party,
        } => {
            require_party(state, sender)?;
            let triple = PartyTriple::new(*sender, *service_provider, *third_party);
            if access_record(state, &triple).is_none() {
                return Err(ContractError::NoSuchRecord);
            }
        }
        Payload::RequestToken {
            data_owner,
            service_provider,
            op,
        } => {
            let requester = require_party(state, sender)?;
            if !requester.roles.has(Roles::THIRD_PARTY) {
                return Err(ContractError::NotThirdParty);
            }
            if op.is_empty() {
                return Err(ContractError::EmptyPermission);
            }
            let triple = PartyTriple::new(*data_owner, *service_provider, *sender);
            if !check_permission(state, &triple, *op) {
                return Err(ContractError::PermissionDenied);
            }
        }
        Payload::Validate(_) => {
            // Every outcome of a validation is recorded, so only the caller's
            // registration is required.
            require_party(state, sender)?;
        }
    }
    Ok(())
}

/// Checks the precondition, then applies `tx`. On error `state` is untouched.
pub fn apply(
    state: &mut LedgerState,
    tx: &Transaction,
    ctx: &ExecContext,
) -> Result<TxEffect, ContractError> {
    precondition(state, tx, ctx)?;
    set_nonce(state, &tx.sender, tx.nonce);
    let sender = tx.sender;
    let effect = match &tx.payload {
        Payload::Register { roles } => {
            put_party(
                state,
                &PartyRecord {
                    address: sender,
                    roles: *roles,
                    registered_at: ctx.timestamp,
                },
            );
            TxEffect::Registered
        }
        Payload::Grant {
            service_provider,
            third_party,
            permission,
            data_pointer,
            data_hash,
        } => {
            let triple = PartyTriple::new(sender, *service_provider, *third_party);
            let access_token = access_record(state, &triple).and_then(|r| r.access_token);
            put_access_record(
                state,
                &triple,
                &AccessRecord {
                    data_pointer: data_pointer.clone(),
                    data_hash: *data_hash,
                    access_token,
                    permission: *permission,
                },
            );
            TxEffect::Granted
        }
        Payload::Revoke {
            service_provider,
            third_party,
        } => {
            let triple = PartyTriple::new(sender, *service_provider, *third_party);
            let mut rec = access_record(state, &triple).expect("checked by precondition");
            rec.permission = Permission::NONE;
            if let Some(token) = rec.access_token {
                deactivate_token(state, &token);
            }
            put_access_record(state, &triple, &rec);
            TxEffect::Revoked
        }
        Payload::RequestToken {
            data_owner,
            service_provider,
            op,
        } => {
            let triple = PartyTriple::new(*data_owner, *service_provider, sender);
            let token = issue_token(state, &triple, *op, ctx);
            TxEffect::TokenIssued { token }
        }
        Payload::Validate(req) => {
            let verdict = validation(state, req, ctx);
            state.insert(key(VERDICT_PREFIX, &[&tx.digest().0]), verdict.to_bytes());
            TxEffect::Validated { verdict }
        }
    };
    Ok(effect)
}

fn deactivate_token(state: &mut LedgerState, token: &Digest32) {
    if let Some(mut t) = token_record(state, token) {
        t.status = false;
        put_token_record(state, token, &t);
    }
}

/// Writes (or refreshes) the token record for `triple` and points the access
/// record at it. A token superseded by a newer issuance is deactivated.
fn issue_token(
    state: &mut LedgerState,
    triple: &PartyTriple,
    op: Permission,
    ctx: &ExecContext,
) -> Digest32 {
    let token = derive_access_token(triple, &ctx.tip_hash);
    let mut access = access_record(state, triple).expect("checked by precondition");
    if let Some(old) = access.access_token.filter(|old| *old != token) {
        deactivate_token(state, &old);
    }
    put_token_record(
        state,
        &token,
        &TokenRecord {
            parties: *triple,
            issued_at: ctx.timestamp,
            status: true,
            permissions: op,
            expires_in: ctx.config.token_ttl,
            refresh_count: 0,
        },
    );
    access.access_token = Some(token);
    put_access_record(state, triple, &access);
    token
}

/// Decides a data-query validation without touching the state. Returns the
/// verdict and, on acceptance, the updated token record.
pub fn evaluate_validation(
    state: &LedgerState,
    req: &ValidationRequest,
    ctx: &ExecContext,
) -> (Verdict, Option<TokenRecord>) {
    let challenge = validation_challenge(&req.token, req.op, ctx.chain_id, req.request_nonce);
    if !crypto::verify(&req.pk, &challenge, &req.t) {
        return (Verdict::Rejected(RejectReason::BadSignature), None);
    }
    let Some(mut rec) = token_record(state, &req.token) else {
        return (Verdict::Rejected(RejectReason::UnknownToken), None);
    };
    let owner_or_provider =
        rec.parties.data_owner == req.pk || rec.parties.service_provider == req.pk;
    if !owner_or_provider {
        let failed = if rec.parties.third_party != req.pk {
            Some(RejectReason::WrongParty)
        } else if !rec.permissions.contains(req.op) {
            Some(RejectReason::InsufficientPermission)
        } else if !rec.is_fresh(ctx.timestamp) {
            Some(RejectReason::Expired)
        } else if !rec.status {
            Some(RejectReason::Revoked)
        } else if rec.refresh_count >= ctx.config.refresh_threshold {
            Some(RejectReason::RefreshExhausted)
        } else {
            None
        };
        if let Some(reason) = failed {
            return (Verdict::Rejected(reason), None);
        }
    }
    rec.refresh_count = rec.refresh_count.saturating_add(1);
    (Verdict::Accepted, Some(rec))
}

/// Validates a data query and updates the token ledger on acceptance.
///
/// Data owner and service provider named by the token record are accepted on
/// any existing token; everyone else must be the record's third party with
/// `op` within the granted permissions, an unexpired and active token, and
/// refreshes left. Acceptance increments `refresh_count`.
pub fn validation(state: &mut LedgerState, req: &ValidationRequest, ctx: &ExecContext) -> Verdict {
    let (verdict, updated) = evaluate_validation(state, req, ctx);
    if let Some(rec) = updated {
        put_token_record(state, &req.token, &rec);
    }
    verdict
}

/// Access records whose token pointer does not resolve to a token record for
/// the same party triple.
pub fn integrity_violations(state: &LedgerState) -> Vec<(PartyTriple, Digest32)> {
    access_records(state)
        .into_iter()
        .filter_map(|(triple, rec)| {
            let token = rec.access_token?;
            match token_record(state, &token) {
                Some(t) if t.parties == triple => None,
                _ => Some((triple, token)),
            }
        })
        .collect()
}
