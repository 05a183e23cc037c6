use std::collections::{BTreeMap, BTreeSet};

use permchain_core::crypto::{Address, Digest32, Keypair, Signature};
use permchain_core::{Payload, Permission, Roles, Transaction, ValidationRequest, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain_client::{ChainClient, ChainClientError};
use crate::document::ClinicalTrialDocument;
use crate::store::{crud, CrudOutcome, DocumentStore, StoreError};

pub const COLLECTION: &str = "/ClinicalDataManagement";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
    Put,
    Delete,
}

impl Method {
    /// The CRUD bit a method performs.
    pub fn op(self) -> Permission {
        match self {
            Method::Post => Permission::CREATE,
            Method::Get => Permission::READ,
            Method::Put => Permission::UPDATE,
            Method::Delete => Permission::DELETE,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Ok(Method::Get),
            "POST" => Ok(Method::Post),
            "PUT" => Ok(Method::Put),
            "DELETE" => Ok(Method::Delete),
            other => Err(format!("unsupported method `{other}`")),
        }
    }
}

/// Authentication parameters carried by every data query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiParams {
    pub pk: Address,
    pub t: Signature,
    pub access_token: Digest32,
    pub op: Permission,
    /// Nonce previously issued by this server and signed inside `t`.
    pub nonce: u64,
}

impl ApiParams {
    /// Parses the hex/decimal string form used on the wire. The names are
    /// `pk`, `t`, `access_token`, `op` and `nonce`.
    pub fn from_fields(fields: &BTreeMap<String, String>) -> Result<Self, String> {
        let get = |name: &str| {
            fields
                .get(name)
                .map(String::as_str)
                .ok_or_else(|| format!("missing parameter `{name}`"))
        };
        fn bad<E>(name: &str) -> impl Fn(E) -> String + '_ {
            move |_| format!("malformed parameter `{name}`")
        }
        Ok(Self {
            pk: get("pk")?.parse().map_err(bad("pk"))?,
            t: get("t")?.parse().map_err(bad("t"))?,
            access_token: get("access_token")?.parse().map_err(bad("access_token"))?,
            op: get("op")?.parse().map_err(bad("op"))?,
            nonce: get("nonce")?.parse().map_err(bad("nonce"))?,
        })
    }

    pub fn to_fields(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("pk".to_string(), self.pk.to_hex()),
            ("t".to_string(), self.t.to_hex()),
            ("access_token".to_string(), self.access_token.to_hex()),
            ("op".to_string(), self.op.0.to_string()),
            ("nonce".to_string(), self.nonce.to_string()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRequest {
    pub method: Method,
    pub endpoint: String,
    pub params: ApiParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
}

impl ApiResponse {
    pub fn error(status: u16, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Wait for the validation transaction to be committed and use the
    /// verdict recorded on-chain.
    #[default]
    Committed,
    /// Evaluate against the tip locally and queue the validation
    /// transaction for the audit trail without waiting.
    DryRun,
}

/// Instrumentation for the gatekeeping invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub requests: u64,
    pub accepted_validations: u64,
    pub rejected_validations: u64,
    pub served_responses: u64,
}

pub struct ResourceServer<C> {
    store: DocumentStore,
    chain: C,
    key: Keypair,
    mode: ValidationMode,
    next_nonce: u64,
    outstanding: BTreeSet<u64>,
    counters: Counters,
}

impl<C: ChainClient> ResourceServer<C> {
    /// Registers the server's identity on-chain if needed.
    pub fn new(
        store: DocumentStore,
        mut chain: C,
        key: Keypair,
        mode: ValidationMode,
    ) -> Result<Self, ChainClientError> {
        if !chain.is_registered(&key.address)? {
            let nonce = chain.next_nonce(&key.address)?;
            let tx = Transaction::new_signed(&key, nonce, Payload::Register { roles: Roles::NONE });
            let receipt = chain.commit(tx)?;
            if !receipt.included {
                return Err(ChainClientError::Refused(
                    "registration not included".into(),
                ));
            }
        }
        Ok(Self {
            store,
            chain,
            key,
            mode,
            next_nonce: 1,
            outstanding: BTreeSet::new(),
            counters: Counters::default(),
        })
    }

    pub fn address(&self) -> Address {
        self.key.address
    }

    pub fn store(&self) -> &DocumentStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut DocumentStore {
        &mut self.store
    }

    pub fn chain(&self) -> &C {
        &self.chain
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn mode(&self) -> ValidationMode {
        self.mode
    }

    /// Issues a single-use request nonce.
    pub fn issue_nonce(&mut self) -> u64 {
        let n = self.next_nonce;
        self.next_nonce += 1;
        self.outstanding.insert(n);
        n
    }

    pub fn handle_api_call(&mut self, req: &ApiRequest) -> ApiResponse {
        self.counters.requests += 1;
        match self.handle(req) {
            Ok(resp) | Err(resp) => resp,
        }
    }

    fn handle(&mut self, req: &ApiRequest) -> Result<ApiResponse, ApiResponse> {
        let patient_id = parse_endpoint(req.method, &req.endpoint)?;
        let p = &req.params;
        if p.op != req.method.op() {
            return Err(ApiResponse::error(
                400,
                format!("op {} does not match method {:?}", p.op, req.method),
            ));
        }
        let payload = match req.method {
            Method::Post | Method::Put => {
                let body = req
                    .body
                    .clone()
                    .ok_or_else(|| ApiResponse::error(400, "request body required"))?;
                let doc: ClinicalTrialDocument = serde_json::from_value(body)
                    .map_err(|e| ApiResponse::error(400, format!("invalid document: {e}")))?;
                Some(doc)
            }
            _ => None,
        };
        let patient_id = match (&patient_id, &payload) {
            (Some(id), _) => id.clone(),
            (None, Some(doc)) => doc.patient_id.clone(),
            (None, None) => return Err(ApiResponse::error(400, "patient id required")),
        };
        if !self.outstanding.remove(&p.nonce) {
            return Err(ApiResponse::error(400, "unknown or reused nonce"));
        }

        let (verdict, tx_digest, height) = self.validate(p)?;
        let mut meta = json!({ "validation_tx": tx_digest.to_hex() });
        if let Some(h) = height {
            meta["block_height"] = json!(h);
        }
        if let Verdict::Rejected(reason) = verdict {
            self.counters.rejected_validations += 1;
            meta["error"] = json!("validation rejected");
            meta["reason"] = json!(reason);
            return Err(ApiResponse {
                status: 403,
                body: meta,
            });
        }
        self.counters.accepted_validations += 1;

        let outcome = crud(&mut self.store, p.op, &patient_id, payload).map_err(|e| {
            let status = match e {
                StoreError::NotFound(_) => 404,
                StoreError::DuplicateId(_) => 409,
                StoreError::Io(_) => 500,
                _ => 400,
            };
            let mut body = meta.clone();
            body["error"] = json!(e.to_string());
            ApiResponse { status, body }
        })?;
        self.counters.served_responses += 1;
        meta["result"] = match outcome {
            CrudOutcome::Read(doc) => serde_json::to_value(doc).expect("document serializes"),
            CrudOutcome::Created => json!("created"),
            CrudOutcome::Updated => json!("updated"),
            CrudOutcome::Deleted => json!("deleted"),
        };
        meta["patient_id"] = json!(patient_id);
        Ok(ApiResponse {
            status: 200,
            body: meta,
        })
    }

    fn validate(&mut self, p: &ApiParams) -> Result<(Verdict, Digest32, Option<u64>), ApiResponse> {
        let unavailable = |e: ChainClientError| ApiResponse::error(503, e.to_string());
        let nonce = self
            .chain
            .next_nonce(&self.key.address)
            .map_err(unavailable)?;
        let tx = Transaction::new_signed(
            &self.key,
            nonce,
            Payload::Validate(ValidationRequest {
                token: p.access_token,
                pk: p.pk,
                t: p.t.clone(),
                op: p.op,
                request_nonce: p.nonce,
            }),
        );
        match self.mode {
            ValidationMode::Committed => {
                let receipt = self.chain.commit(tx).map_err(unavailable)?;
                let verdict = receipt
                    .verdict
                    .ok_or_else(|| ApiResponse::error(503, "validation not committed"))?;
                Ok((verdict, receipt.tx_digest, Some(receipt.height)))
            }
            ValidationMode::DryRun => {
                let Payload::Validate(req) = &tx.payload else {
                    unreachable!("built above")
                };
                let verdict = self.chain.dry_run_validation(req).map_err(unavailable)?;
                let digest = self.chain.submit(tx).map_err(unavailable)?;
                Ok((verdict, digest, None))
            }
        }
    }
}

/// Patient id named by the path, if any. POST addresses the collection,
/// the other methods a single document.
fn parse_endpoint(method: Method, endpoint: &str) -> Result<Option<String>, ApiResponse> {
    let rest = endpoint
        .strip_prefix(COLLECTION)
        .ok_or_else(|| ApiResponse::error(404, format!("no such endpoint `{endpoint}`")))?;
    let id = match rest {
        "" | "/" => None,
        r => match r.strip_prefix('/') {
            Some(id) if !id.contains('/') => Some(id.to_string()),
            _ => {
                return Err(ApiResponse::error(
                    404,
                    format!("no such endpoint `{endpoint}`"),
                ))
            }
        },
    };
    match (method, &id) {
        (Method::Post, _) | (_, Some(_)) => Ok(id),
        _ => Err(ApiResponse::error(400, "patient id required in path")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_op_mapping() {
        assert_eq!(Method::Post.op(), Permission::CREATE);
        assert_eq!(Method::Get.op(), Permission::READ);
        assert_eq!(Method::Put.op(), Permission::UPDATE);
        assert_eq!(Method::Delete.op(), Permission::DELETE);
    }

    #[test]
    fn endpoints() {
        assert_eq!(parse_endpoint(Method::Post, COLLECTION), Ok(None));
        assert_eq!(
            parse_endpoint(Method::Get, "/ClinicalDataManagement/p1"),
            Ok(Some("p1".into()))
        );
        assert_eq!(
            parse_endpoint(Method::Get, COLLECTION).unwrap_err().status,
            400
        );
        assert_eq!(
            parse_endpoint(Method::Get, "/other/p1").unwrap_err().status,
            404
        );
        assert_eq!(
            parse_endpoint(Method::Get, "/ClinicalDataManagement/a/b")
                .unwrap_err()
                .status,
            404
        );
    }

    #[test]
    fn params_roundtrip_and_missing() {
        let k = permchain_core::crypto::generate_keypair([3; 32]);
        let p = ApiParams {
            pk: k.address,
            t: k.sign(b"x"),
            access_token: Digest32([7; 32]),
            op: Permission::READ,
            nonce: 42,
        };
        let fields = p.to_fields();
        assert_eq!(ApiParams::from_fields(&fields).unwrap(), p);
        let mut partial = fields.clone();
        partial.remove("t");
        assert_eq!(
            ApiParams::from_fields(&partial).unwrap_err(),
            "missing parameter `t`"
        );
        let mut bad = fields;
        bad.insert("access_token".into(), "zz".into());
        assert!(ApiParams::from_fields(&bad).is_err());
    }
}
