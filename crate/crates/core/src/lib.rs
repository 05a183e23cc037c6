//! Proof-of-permission ledger: a minimal proof-of-work chain whose contract
//! manages data-access grants and issues access tokens that an off-chain
//! resource server validates before serving data.

pub mod block;
pub mod chain;
pub mod codec;
pub mod contract;
pub mod crypto;
pub mod state;
pub mod tx;
pub mod workload;

pub use block::{Block, BlockHeader, Difficulty};
pub use chain::{BlockError, Chain, ChainConfig, ChainError, MineParams, TxError};
pub use contract::{
    AccessRecord, ContractConfig, ContractError, ExecContext, PartyTriple, Permission,
    RejectReason, Roles, TokenRecord, TxEffect, Verdict,
};
pub use crypto::{Address, Digest32, Keypair, SecretKey, Signature};
pub use state::LedgerState;
pub use tx::{Payload, Transaction, TxKind, ValidationRequest};
