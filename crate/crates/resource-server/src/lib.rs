//! Off-chain resource server for clinical-trial documents.
//!
//! Every data query is turned into an on-chain validation of the presented
//! access token; documents are only touched after an accepted verdict.

pub mod chain_client;
pub mod config;
pub mod document;
pub mod http;
pub mod server;
pub mod store;

pub use chain_client::{ChainClient, ChainClientError, InProcessChain, Receipt, SharedChain};
pub use config::ServerConfig;
pub use document::ClinicalTrialDocument;
pub use http::{router, SharedServer};
pub use server::{
    ApiParams, ApiRequest, ApiResponse, Counters, Method, ResourceServer, ValidationMode,
    COLLECTION,
};
pub use store::{crud, replay, CrudOutcome, DocumentStore, JournalEntry, StoreError};
