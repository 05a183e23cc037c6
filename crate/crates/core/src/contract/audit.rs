use serde::{Deserialize, Serialize};

use super::{derive_access_token, token_record, verdict, PartyTriple, Verdict};
use crate::chain::Chain;
use crate::crypto::{Address, Digest32};
use crate::tx::{Payload, Transaction, TxKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditFilter {
    /// Transactions the party acted in: as sender, or as the identity
    /// presenting a token for validation.
    Party(Address),
    /// Any transaction naming the party, including grants and revocations
    /// that list it and validations of tokens issued to it.
    Involving(Address),
    /// Issuance and validations of one access token.
    Token(Digest32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub height: u64,
    pub block_hash: Digest32,
    pub index: usize,
    pub tx_digest: Digest32,
    pub kind: TxKind,
    pub action: String,
    pub sender: Address,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

fn issued_token(tx: &Transaction, parent: &Digest32) -> Option<Digest32> {
    match &tx.payload {
        Payload::RequestToken {
            data_owner,
            service_provider,
            ..
        } => Some(derive_access_token(
            &PartyTriple::new(*data_owner, *service_provider, tx.sender),
            parent,
        )),
        _ => None,
    }
}

fn matches(chain: &Chain, filter: &AuditFilter, tx: &Transaction, parent: &Digest32) -> bool {
    match filter {
        AuditFilter::Party(a) => {
            tx.sender == *a || matches!(&tx.payload, Payload::Validate(v) if v.pk == *a)
        }
        AuditFilter::Involving(a) => {
            if tx.sender == *a {
                return true;
            }
            match &tx.payload {
                Payload::Register { .. } => false,
                Payload::Grant {
                    service_provider,
                    third_party,
                    ..
                }
                | Payload::Revoke {
                    service_provider,
                    third_party,
                } => service_provider == a || third_party == a,
                Payload::RequestToken {
                    data_owner,
                    service_provider,
                    ..
                } => data_owner == a || service_provider == a,
                Payload::Validate(v) => {
                    v.pk == *a
                        || token_record(chain.state(), &v.token).is_some_and(|r| {
                            r.parties.data_owner == *a
                                || r.parties.service_provider == *a
                                || r.parties.third_party == *a
                        })
                }
            }
        }
        AuditFilter::Token(t) => match &tx.payload {
            Payload::Validate(v) => v.token == *t,
            _ => issued_token(tx, parent) == Some(*t),
        },
    }
}

/// Committed transactions matching `filter`, in block order.
pub fn audit_trail(chain: &Chain, filter: AuditFilter) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    for block in chain.blocks() {
        for (index, tx) in block.txs.iter().enumerate() {
            if !matches(chain, &filter, tx, &block.header.parent_hash) {
                continue;
            }
            let tx_digest = tx.digest();
            out.push(AuditEntry {
                height: block.height(),
                block_hash: block.hash,
                index,
                tx_digest,
                kind: tx.kind(),
                action: tx.payload.name().to_string(),
                sender: tx.sender,
                verdict: verdict(chain.state(), &tx_digest),
            });
        }
    }
    out
}
