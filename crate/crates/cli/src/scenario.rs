//! Scripted end-to-end runs of the clinical data-sharing flow against an
//! in-process chain and resource server.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "name": "example",
//!   "dataset": "clinical_dataset.json",
//!   "parties": [{"name": "alice", "roles": "DO", "seed": "alice"}],
//!   "steps": [
//!     {"id": "reg", "actor": "alice", "action": "register"},
//!     {"id": "read", "actor": "lab", "action": "api_call",
//!      "args": {"method": "GET", "patient_id": "P-0001", "token_from": "tok"},
//!      "expect": {"status": 200, "document_matches": true}}
//!   ]
//! }
//! ```
//!
//! Actions and their `args`:
//!
//! * `register` — optional `roles` overriding the party's declared roles.
//! * `grant` — `service_provider`, `third_party`, `permission`, `patient_id`.
//! * `revoke` — `service_provider`, `third_party`.
//! * `request_token` — `data_owner`, `service_provider`, `op`.
//! * `api_call` — `method`, `patient_id`, `token_from` (id of an earlier
//!   `request_token` step), optional `body` and `tamper_token`.
//! * `assert` — `check` is one of `audit_trail` (with `party` and
//!   `actions`), `audit_complete`, `counters`, `verdict_fidelity`, or `step`
//!   (with `step` and the same fields as `expect`).
//!
//! Chain actions expect inclusion unless `expect.included` says otherwise.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use permchain_core::contract::{self, audit_trail, validation_challenge, AuditFilter};
use permchain_core::crypto::{Address, Digest32, Keypair};
use permchain_core::{
    ChainConfig, Difficulty, PartyTriple, Payload, Permission, Roles, Transaction, Verdict,
};
use permchain_resource::{
    ApiParams, ApiRequest, ChainClient, ClinicalTrialDocument, Counters, DocumentStore,
    InProcessChain, Method, ResourceServer, SharedChain, ValidationMode, COLLECTION,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::keys::key_from_seed;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartySpec {
    pub name: String,
    /// `DO`, `SP`, `TP` joined with `|`, or `-` for none.
    pub roles: String,
    pub seed: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSpec {
    pub difficulty_bits: u32,
    pub token_ttl: u64,
    pub refresh_threshold: u64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        let c = permchain_core::ContractConfig::default();
        Self {
            difficulty_bits: 8,
            token_ttl: c.token_ttl,
            refresh_threshold: c.refresh_threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSpec {
    pub seed: String,
    pub validation_mode: ValidationMode,
}

impl Default for ServerSpec {
    fn default() -> Self {
        Self {
            seed: "resource-server".into(),
            validation_mode: ValidationMode::Committed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Register,
    Grant,
    Revoke,
    RequestToken,
    ApiCall,
    Assert,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expect {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub included: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub document_matches: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub id: String,
    #[serde(default)]
    pub actor: Option<String>,
    pub action: Action,
    #[serde(default)]
    pub args: Value,
    #[serde(default)]
    pub expect: Expect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    pub parties: Vec<PartySpec>,
    #[serde(default)]
    pub chain: ChainSpec,
    #[serde(default)]
    pub resource_server: ServerSpec,
    pub steps: Vec<Step>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterArgs {
    #[serde(default)]
    roles: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrantArgs {
    service_provider: String,
    third_party: String,
    permission: String,
    patient_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevokeArgs {
    service_provider: String,
    third_party: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenArgs {
    data_owner: String,
    service_provider: String,
    op: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApiArgs {
    method: Method,
    patient_id: String,
    token_from: String,
    #[serde(default)]
    body: Option<Value>,
    #[serde(default)]
    tamper_token: bool,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
enum AssertArgs {
    AuditTrail {
        party: String,
        actions: Vec<String>,
    },
    AuditComplete,
    Counters,
    VerdictFidelity,
    Step {
        step: String,
        #[serde(flatten)]
        expect: Expect,
    },
}

fn parse_args<T: serde::de::DeserializeOwned>(step: &Step) -> Result<T, ScenarioError> {
    let v = if step.args.is_null() {
        Value::Object(Default::default())
    } else {
        step.args.clone()
    };
    serde_json::from_value(v).map_err(|e| ScenarioError::Parse(format!("step `{}`: {e}", step.id)))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    /// Static checks: unique names and ids, declared actors, and references
    /// only to earlier steps.
    pub fn check(&self) -> Result<(), ScenarioError> {
        let err = |m: String| Err(ScenarioError::Parse(m));
        let mut names = HashSet::new();
        for p in &self.parties {
            if !names.insert(p.name.as_str()) {
                return err(format!("party `{}` declared twice", p.name));
            }
            p.roles
                .parse::<Roles>()
                .map_err(|e| ScenarioError::Parse(format!("party `{}`: {e}", p.name)))?;
        }
        let party = |step: &Step, name: &str| {
            if names.contains(name) {
                Ok(())
            } else {
                err(format!(
                    "step `{}` references undeclared party `{name}`",
                    step.id
                ))
            }
        };
        let mut earlier: BTreeMap<&str, Action> = BTreeMap::new();
        for step in &self.steps {
            if earlier.contains_key(step.id.as_str()) {
                return err(format!("step id `{}` used twice", step.id));
            }
            match (&step.actor, step.action) {
                (None, Action::Assert) => {}
                (None, _) => return err(format!("step `{}` needs an actor", step.id)),
                (Some(a), _) => party(step, a)?,
            }
            match step.action {
                Action::Register => {
                    let a: RegisterArgs = parse_args(step)?;
                    if let Some(r) = a.roles {
                        r.parse::<Roles>().map_err(|e| {
                            ScenarioError::Parse(format!("step `{}`: {e}", step.id))
                        })?;
                    }
                }
                Action::Grant => {
                    let a: GrantArgs = parse_args(step)?;
                    party(step, &a.service_provider)?;
                    party(step, &a.third_party)?;
                    parse_perm(step, &a.permission)?;
                }
                Action::Revoke => {
                    let a: RevokeArgs = parse_args(step)?;
                    party(step, &a.service_provider)?;
                    party(step, &a.third_party)?;
                }
                Action::RequestToken => {
                    let a: TokenArgs = parse_args(step)?;
                    party(step, &a.data_owner)?;
                    party(step, &a.service_provider)?;
                    parse_perm(step, &a.op)?;
                }
                Action::ApiCall => {
                    let a: ApiArgs = parse_args(step)?;
                    if earlier.get(a.token_from.as_str()) != Some(&Action::RequestToken) {
                        return err(format!(
                            "step `{}`: token_from `{}` is not an earlier request_token step",
                            step.id, a.token_from
                        ));
                    }
                }
                Action::Assert => match parse_args::<AssertArgs>(step)? {
                    AssertArgs::AuditTrail { party: p, .. } => party(step, &p)?,
                    AssertArgs::Step { step: target, .. }
                        if !earlier.contains_key(target.as_str()) =>
                    {
                        return err(format!(
                            "step `{}` asserts on `{target}`, which is not an earlier step",
                            step.id
                        ));
                    }
                    _ => {}
                },
            }
            earlier.insert(&step.id, step.action);
        }
        Ok(())
    }
}

fn parse_perm(step: &Step, s: &str) -> Result<Permission, ScenarioError> {
    s.parse()
        .map_err(|e| ScenarioError::Parse(format!("step `{}`: {e}", step.id)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    pub action: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_hash: Option<Digest32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub included: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_height: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_hash: Option<Digest32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<Digest32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub document_matches: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub failures: Vec<String>,
}

/// One committed transaction, in block order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerLine {
    pub height: u64,
    pub index: usize,
    pub tx_hash: Digest32,
    pub action: String,
    pub sender: Address,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sender_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario: String,
    pub seed: u64,
    pub parties: BTreeMap<String, Address>,
    pub resource_server: Address,
    pub dataset: Vec<(String, Digest32)>,
    pub steps: Vec<StepRecord>,
    pub ledger: Vec<LedgerLine>,
    pub counters: Counters,
    pub final_height: u64,
    pub tip_hash: Digest32,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

pub struct ScenarioRun {
    pub transcript: Transcript,
    pub chain: SharedChain,
    pub server: ResourceServer<SharedChain>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::from_json(&std::fs::read_to_string(path)?)
}

/// Loads and runs a scenario file; a relative dataset path is resolved
/// against the file's directory.
pub fn run_scenario_file(path: &Path, seed: u64) -> Result<ScenarioRun, ScenarioError> {
    let scenario = load_scenario(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_scenario(&scenario, base, seed)
}

struct Runner<'a> {
    scenario: &'a Scenario,
    chain: SharedChain,
    server: ResourceServer<SharedChain>,
    keys: BTreeMap<String, Keypair>,
    dataset: BTreeMap<String, ClinicalTrialDocument>,
    hashes: BTreeMap<String, Digest32>,
    records: Vec<StepRecord>,
}

pub fn run_scenario(
    scenario: &Scenario,
    base_dir: &Path,
    seed: u64,
) -> Result<ScenarioRun, ScenarioError> {
    scenario.check()?;
    let keys: BTreeMap<String, Keypair> = scenario
        .parties
        .iter()
        .map(|p| (p.name.clone(), key_from_seed(&p.seed)))
        .collect();
    let cfg = ChainConfig {
        difficulty: Difficulty::leading_zero_bits(scenario.chain.difficulty_bits),
        contract: permchain_core::ContractConfig {
            token_ttl: scenario.chain.token_ttl,
            refresh_threshold: scenario.chain.refresh_threshold,
        },
        ..ChainConfig::default()
    };
    let miner = key_from_seed(&format!("miner/{}", scenario.name)).address;
    let chain: SharedChain = Arc::new(Mutex::new(InProcessChain::new(cfg, miner, seed)));

    let mut store = DocumentStore::new();
    let mut dataset = BTreeMap::new();
    let mut hashes = BTreeMap::new();
    if let Some(rel) = &scenario.dataset {
        let path = base_dir.join(rel);
        for (id, h) in store
            .ingest_dataset(&path)
            .map_err(|e| ScenarioError::Setup(format!("{}: {e}", path.display())))?
        {
            hashes.insert(id.clone(), h);
            dataset.insert(id.clone(), store.get(&id).expect("just ingested").clone());
        }
    }
    let server = ResourceServer::new(
        store,
        chain.clone(),
        key_from_seed(&scenario.resource_server.seed),
        scenario.resource_server.validation_mode,
    )
    .map_err(|e| ScenarioError::Setup(e.to_string()))?;

    let mut runner = Runner {
        scenario,
        chain,
        server,
        keys,
        dataset,
        hashes,
        records: Vec::new(),
    };
    let mut first_failure = None;
    for step in &scenario.steps {
        let record = runner.step(step);
        let failed = !record.passed;
        if failed {
            first_failure = Some(format!("{}: {}", record.id, record.failures.join("; ")));
        }
        runner.records.push(record);
        if failed {
            break;
        }
    }
    Ok(runner.finish(seed, first_failure))
}

impl Runner<'_> {
    fn key(&self, name: &str) -> &Keypair {
        &self.keys[name]
    }

    fn addr(&self, name: &str) -> Address {
        self.key(name).address
    }

    fn commit(&self, actor: &str, payload: Payload, rec: &mut StepRecord) {
        let key = self.key(actor).clone();
        let mut chain = self.chain.lock().expect("chain lock");
        let result = chain
            .next_nonce(&key.address)
            .and_then(|n| chain.commit(Transaction::new_signed(&key, n, payload)));
        match result {
            Ok(r) => {
                rec.tx_hash = Some(r.tx_digest);
                rec.included = Some(r.included);
                if r.included {
                    rec.block_height = Some(r.height);
                    rec.block_hash = Some(r.block_hash);
                }
            }
            Err(e) => rec.failures.push(format!("chain error: {e}")),
        }
    }

    fn step(&mut self, step: &Step) -> StepRecord {
        let mut rec = StepRecord {
            id: step.id.clone(),
            actor: step.actor.clone(),
            action: serde_json::to_value(step.action)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            ..StepRecord::default()
        };
        let actor = step.actor.clone().unwrap_or_default();
        // Arguments were checked when the scenario was loaded.
        match step.action {
            Action::Register => {
                let a: RegisterArgs = parse_args(step).expect("checked");
                let spec = self
                    .scenario
                    .parties
                    .iter()
                    .find(|p| p.name == actor)
                    .expect("checked");
                let roles: Roles = a
                    .roles
                    .as_deref()
                    .unwrap_or(&spec.roles)
                    .parse()
                    .expect("checked");
                self.commit(&actor, Payload::Register { roles }, &mut rec);
            }
            Action::Grant => {
                let a: GrantArgs = parse_args(step).expect("checked");
                let data_hash = match self.hashes.get(&a.patient_id) {
                    Some(h) => *h,
                    None => {
                        rec.failures
                            .push(format!("patient `{}` not in dataset", a.patient_id));
                        return rec;
                    }
                };
                let payload = Payload::Grant {
                    service_provider: self.addr(&a.service_provider),
                    third_party: self.addr(&a.third_party),
                    permission: a.permission.parse().expect("checked"),
                    data_pointer: format!(
                        "{}/{}",
                        COLLECTION.trim_start_matches('/'),
                        a.patient_id
                    ),
                    data_hash,
                };
                self.commit(&actor, payload, &mut rec);
            }
            Action::Revoke => {
                let a: RevokeArgs = parse_args(step).expect("checked");
                let payload = Payload::Revoke {
                    service_provider: self.addr(&a.service_provider),
                    third_party: self.addr(&a.third_party),
                };
                self.commit(&actor, payload, &mut rec);
            }
            Action::RequestToken => {
                let a: TokenArgs = parse_args(step).expect("checked");
                let triple = PartyTriple::new(
                    self.addr(&a.data_owner),
                    self.addr(&a.service_provider),
                    self.addr(&actor),
                );
                let payload = Payload::RequestToken {
                    data_owner: triple.data_owner,
                    service_provider: triple.service_provider,
                    op: a.op.parse().expect("checked"),
                };
                self.commit(&actor, payload, &mut rec);
                if rec.included == Some(true) {
                    let chain = self.chain.lock().expect("chain lock");
                    rec.token = contract::access_record(chain.chain().state(), &triple)
                        .and_then(|r| r.access_token);
                }
            }
            Action::ApiCall => {
                let a: ApiArgs = parse_args(step).expect("checked");
                self.api_call(&actor, a, &mut rec);
            }
            Action::Assert => {
                let a: AssertArgs = parse_args(step).expect("checked");
                self.assert(a, &mut rec);
            }
        }
        if step.action != Action::Assert {
            check_expect(&step.expect, step.action, &rec.clone(), &mut rec.failures);
        }
        rec.passed = rec.failures.is_empty();
        rec
    }

    fn api_call(&mut self, actor: &str, a: ApiArgs, rec: &mut StepRecord) {
        let Some(mut token) = self
            .records
            .iter()
            .find(|r| r.id == a.token_from)
            .and_then(|r| r.token)
        else {
            rec.failures
                .push(format!("step `{}` produced no token", a.token_from));
            return;
        };
        if a.tamper_token {
            token.0[0] ^= 0x01;
        }
        let key = self.key(actor).clone();
        let op = a.method.op();
        let chain_id = self.chain.chain_id().expect("in-process chain");
        let nonce = self.server.issue_nonce();
        let t = key.sign(&validation_challenge(&token, op, chain_id, nonce));
        let endpoint = match a.method {
            Method::Post => COLLECTION.to_string(),
            _ => format!("{COLLECTION}/{}", a.patient_id),
        };
        let req = ApiRequest {
            method: a.method,
            endpoint,
            params: ApiParams {
                pk: key.address,
                t,
                access_token: token,
                op,
                nonce,
            },
            body: a.body,
        };
        let resp = self.server.handle_api_call(&req);
        rec.status = Some(resp.status);
        rec.reason = resp
            .body
            .get("reason")
            .and_then(Value::as_str)
            .map(str::to_string);
        rec.tx_hash = resp.body["validation_tx"]
            .as_str()
            .and_then(|s| s.parse().ok());
        rec.block_height = resp.body["block_height"].as_u64();
        if a.method == Method::Get {
            let served: Option<ClinicalTrialDocument> =
                serde_json::from_value(resp.body["result"].clone()).ok();
            rec.document_matches = Some(match (served, self.dataset.get(&a.patient_id)) {
                (Some(s), Some(d)) => s.canonical_json() == d.canonical_json(),
                _ => false,
            });
        }
    }

    fn ledger(&self) -> Vec<LedgerLine> {
        let names: BTreeMap<Address, String> = self
            .keys
            .iter()
            .map(|(n, k)| (k.address, n.clone()))
            .chain([(self.server.address(), "resource_server".to_string())])
            .collect();
        let chain = self.chain.lock().expect("chain lock");
        let mut out = Vec::new();
        for b in chain.chain().blocks() {
            for (index, tx) in b.txs.iter().enumerate() {
                let tx_hash = tx.digest();
                out.push(LedgerLine {
                    height: b.height(),
                    index,
                    tx_hash,
                    action: tx.payload.name().to_string(),
                    sender: tx.sender,
                    sender_name: names.get(&tx.sender).cloned(),
                    verdict: contract::verdict(chain.chain().state(), &tx_hash),
                });
            }
        }
        out
    }

    fn assert(&mut self, a: AssertArgs, rec: &mut StepRecord) {
        match a {
            AssertArgs::AuditTrail { party, actions } => {
                let chain = self.chain.lock().expect("chain lock");
                let got: Vec<String> =
                    audit_trail(chain.chain(), AuditFilter::Party(self.addr(&party)))
                        .into_iter()
                        .map(|e| e.action)
                        .collect();
                if got != actions {
                    rec.failures.push(format!(
                        "audit trail of `{party}` is {got:?}, expected {actions:?}"
                    ));
                }
            }
            AssertArgs::AuditComplete => {
                let ledger = self.ledger();
                let mut last = (0u64, 0usize);
                for r in &self.records {
                    let (Some(h), Some(height)) = (r.tx_hash, r.block_height) else {
                        continue;
                    };
                    match ledger.iter().find(|l| l.tx_hash == h) {
                        Some(l) if l.height == height && (l.height, l.index) >= last => {
                            last = (l.height, l.index);
                        }
                        Some(l) => rec.failures.push(format!(
                            "step `{}` recorded at height {height} but found at {}:{} out of order",
                            r.id, l.height, l.index
                        )),
                        None => rec
                            .failures
                            .push(format!("step `{}` transaction missing from chain", r.id)),
                    }
                }
            }
            AssertArgs::Counters => {
                let c = self.server.counters();
                if c.served_responses > c.accepted_validations {
                    rec.failures.push(format!(
                        "served {} responses on {} accepted validations",
                        c.served_responses, c.accepted_validations
                    ));
                }
            }
            AssertArgs::VerdictFidelity => {
                let chain = self.chain.lock().expect("chain lock");
                for r in self.records.iter().filter(|r| r.action == "api_call") {
                    let (Some(status), Some(h)) = (r.status, r.tx_hash) else {
                        continue;
                    };
                    let verdict = contract::verdict(chain.chain().state(), &h);
                    let consistent = match verdict {
                        Some(Verdict::Accepted) => status != 403,
                        Some(Verdict::Rejected(_)) => status == 403,
                        None => false,
                    };
                    if !consistent {
                        rec.failures.push(format!(
                            "step `{}` answered {status} but the chain recorded {verdict:?}",
                            r.id
                        ));
                    }
                }
            }
            AssertArgs::Step { step, expect } => {
                let target = self
                    .records
                    .iter()
                    .find(|r| r.id == step)
                    .cloned()
                    .expect("checked");
                let action = self
                    .scenario
                    .steps
                    .iter()
                    .find(|s| s.id == step)
                    .map(|s| s.action)
                    .expect("checked");
                check_expect(&expect, action, &target, &mut rec.failures);
            }
        }
    }

    fn finish(self, seed: u64, first_failure: Option<String>) -> ScenarioRun {
        let ledger = self.ledger();
        let (final_height, tip_hash) = {
            let c = self.chain.lock().expect("chain lock");
            (c.chain().height(), c.chain().tip().hash)
        };
        let transcript = Transcript {
            scenario: self.scenario.name.clone(),
            seed,
            parties: self
                .keys
                .iter()
                .map(|(n, k)| (n.clone(), k.address))
                .collect(),
            resource_server: self.server.address(),
            dataset: self.hashes.clone().into_iter().collect(),
            passed: first_failure.is_none() && self.records.len() == self.scenario.steps.len(),
            steps: self.records,
            ledger,
            counters: self.server.counters(),
            final_height,
            tip_hash,
            first_failure,
        };
        ScenarioRun {
            transcript,
            chain: self.chain,
            server: self.server,
        }
    }
}

fn check_expect(expect: &Expect, action: Action, rec: &StepRecord, failures: &mut Vec<String>) {
    let on_chain = matches!(
        action,
        Action::Register | Action::Grant | Action::Revoke | Action::RequestToken
    );
    let want_included = expect.included.or(on_chain.then_some(true));
    if let Some(want) = want_included {
        if rec.included.unwrap_or(false) != want {
            failures.push(format!("expected included={want}, got {:?}", rec.included));
        }
    }
    if let Some(want) = expect.status {
        if rec.status != Some(want) {
            failures.push(format!("expected status {want}, got {:?}", rec.status));
        }
    }
    if let Some(want) = &expect.reason {
        if rec.reason.as_deref() != Some(want.as_str()) {
            failures.push(format!("expected reason `{want}`, got {:?}", rec.reason));
        }
    }
    if let Some(want) = expect.document_matches {
        if rec.document_matches != Some(want) {
            failures.push(format!(
                "expected document_matches={want}, got {:?}",
                rec.document_matches
            ));
        }
    }
}
