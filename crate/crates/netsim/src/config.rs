use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    /// Every full node re-executes data queries, touching the resource server.
    #[serde(alias = "legacy")]
    Legacy,
    /// Clients query the resource server directly; the chain only records
    /// token validations.
    #[serde(alias = "proposed")]
    Proposed,
}

impl std::str::FromStr for Mode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "legacy" => Ok(Mode::Legacy),
            "proposed" => Ok(Mode::Proposed),
            other => Err(SimError::ConfigInvalid(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error(
        "unknown sweep axis `{0}` (expected n_nodes, client_rate, rs_buffer or delta_seconds)"
    )]
    UnknownAxis(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_nodes: usize,
    /// Upper bound on block and transaction propagation, seconds.
    pub delta_seconds: f64,
    /// Aggregate data queries per second across all clients.
    pub client_rate: f64,
    pub n_clients: usize,
    /// Seconds during which clients issue queries. Mining continues past
    /// this point until the network settles.
    pub duration: f64,
    pub mode: Mode,
    /// Requests that may wait behind the one in service.
    pub rs_buffer: usize,
    pub rs_service_rate: f64,
    /// Requests waiting longer than this before service are dropped.
    pub rs_timeout: f64,
    /// Leading zero bits of the proof-of-work target.
    pub difficulty: u32,
    /// Expected network-wide seconds between blocks.
    pub block_interval_target: f64,
    pub max_txs_per_block: usize,
    /// When set, a node accepts a block only once the resource server has
    /// answered (or failed) every query in it, so a slow server delays
    /// consensus and feeds back into forking and load. When clear, the
    /// queries are still issued but acceptance does not wait for them.
    pub validation_waits_for_rs: bool,
    /// When set (and validation waits), a node that cannot get an answer for
    /// some query rejects the block containing it.
    pub reject_on_rs_failure: bool,
    /// Leading fraction of `duration` excluded from rate statistics.
    pub warmup_fraction: f64,
    /// Extra simulated seconds allowed after `duration` for tips to agree.
    pub settle_limit: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 32,
            delta_seconds: 2.0,
            client_rate: 10.0,
            n_clients: 8,
            duration: 600.0,
            mode: Mode::Legacy,
            rs_buffer: 10_000,
            rs_service_rate: 1e6,
            rs_timeout: 30.0,
            difficulty: 13,
            block_interval_target: 10.0,
            max_txs_per_block: 1000,
            validation_waits_for_rs: true,
            reject_on_rs_failure: false,
            warmup_fraction: 0.1,
            settle_limit: 600.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::ConfigInvalid(what.to_string()));
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1");
        }
        if !pos(self.delta_seconds) {
            return bad("delta_seconds must be positive");
        }
        if !(self.client_rate.is_finite() && self.client_rate >= 0.0) {
            return bad("client_rate must be non-negative");
        }
        if self.n_clients == 0 {
            return bad("n_clients must be at least 1");
        }
        if !pos(self.duration) {
            return bad("duration must be positive");
        }
        if !pos(self.rs_service_rate) {
            return bad("rs_service_rate must be positive");
        }
        if self.rs_timeout.is_nan() || self.rs_timeout <= 0.0 {
            return bad("rs_timeout must be positive");
        }
        if self.difficulty > 64 {
            return bad("difficulty must be at most 64 bits");
        }
        if !pos(self.block_interval_target) {
            return bad("block_interval_target must be positive");
        }
        if self.max_txs_per_block == 0 {
            return bad("max_txs_per_block must be at least 1");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        if self.settle_limit.is_nan() || self.settle_limit < 0.0 {
            return bad("settle_limit must be non-negative");
        }
        Ok(())
    }

    /// Hash rate each node needs for the network to hit the block interval
    /// target at this difficulty.
    pub fn node_hash_rate(&self) -> f64 {
        2f64.powi(self.difficulty as i32) / (self.block_interval_target * self.n_nodes as f64)
    }

    /// Mean seconds for a single node to find a block.
    pub fn node_mean_solve_time(&self) -> f64 {
        2f64.powi(self.difficulty as i32) / self.node_hash_rate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NNodes,
    ClientRate,
    RsBuffer,
    DeltaSeconds,
}

impl std::str::FromStr for SweepAxis {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "n_nodes" | "nodes" => Ok(SweepAxis::NNodes),
            "client_rate" | "rate" => Ok(SweepAxis::ClientRate),
            "rs_buffer" | "buffer" => Ok(SweepAxis::RsBuffer),
            "delta_seconds" | "delta" => Ok(SweepAxis::DeltaSeconds),
            other => Err(SimError::UnknownAxis(other.to_string())),
        }
    }
}

impl SweepAxis {
    pub fn apply(self, cfg: &mut SimConfig, value: f64) {
        match self {
            SweepAxis::NNodes => cfg.n_nodes = value as usize,
            SweepAxis::ClientRate => cfg.client_rate = value,
            SweepAxis::RsBuffer => cfg.rs_buffer = value as usize,
            SweepAxis::DeltaSeconds => cfg.delta_seconds = value,
        }
    }
}
