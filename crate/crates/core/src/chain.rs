//! Minimal proof-of-work chain with a Merkle-committed key-value state.
//!
//! Blocks seal the state root after every transaction. A receiving node
//! re-validates and re-executes each transaction against its own state and
//! compares the resulting root with the sealed one before adopting anything.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{self, Write};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::block::{Block, BlockHeader, Difficulty};
use crate::contract::{self, ContractConfig, ContractError, ExecContext, TxEffect};
use crate::crypto::{Address, Digest32};
use crate::state::LedgerState;
use crate::tx::Transaction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub chain_id: u64,
    pub difficulty: Difficulty,
    pub contract: ContractConfig,
    /// Compare the state root after every transaction (strict) instead of
    /// only the final root.
    pub per_tx_roots: bool,
    /// Upper bound on nonce attempts per mined block.
    pub max_mining_attempts: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            chain_id: 1,
            difficulty: Difficulty::default(),
            contract: ContractConfig::default(),
            per_tx_roots: true,
            max_mining_attempts: 1 << 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TxError {
    #[error("signature does not verify against sender")]
    BadSignature,
    #[error("nonce {got} is not above committed nonce {committed}")]
    StaleNonce { committed: u64, got: u64 },
    #[error(transparent)]
    Contract(#[from] ContractError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("invalid transaction: {0}")]
    InvalidTransaction(#[from] TxError),
    #[error("no block found within {attempts} attempts")]
    MiningTimeout { attempts: u64 },
    #[error("no valid transaction to mine")]
    EmptyMempool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlockError {
    #[error("parent {0} is not the current tip")]
    UnknownParent(Digest32),
    #[error("height {got}, expected {expected}")]
    BadHeight { expected: u64, got: u64 },
    #[error("sealed hash does not match header")]
    HashMismatch,
    #[error("block hash does not meet difficulty")]
    InsufficientWork,
    #[error("timestamp precedes parent")]
    TimestampRegression,
    #[error("{roots} intermediate roots for {txs} transactions")]
    RootCountMismatch { txs: usize, roots: usize },
    #[error("transaction root mismatch")]
    TxRootMismatch,
    #[error("transaction {index} invalid: {error}")]
    InvalidTransaction { index: usize, error: TxError },
    #[error("state root after transaction {index} differs from sealed root")]
    IntermediateRootMismatch { index: usize },
    #[error("final state root differs from sealed root")]
    StateRootMismatch,
    #[error("fork does not attach to a known block")]
    DetachedFork,
}

/// Signature, nonce freshness and contract precondition.
pub fn check_transaction(
    state: &LedgerState,
    tx: &Transaction,
    ctx: &ExecContext,
) -> Result<(), TxError> {
    if !tx.verify_signature() {
        return Err(TxError::BadSignature);
    }
    let committed = contract::committed_nonce(state, &tx.sender);
    if tx.nonce <= committed {
        return Err(TxError::StaleNonce {
            committed,
            got: tx.nonce,
        });
    }
    contract::precondition(state, tx, ctx)?;
    Ok(())
}

pub fn validate_transaction(state: &LedgerState, tx: &Transaction, ctx: &ExecContext) -> bool {
    check_transaction(state, tx, ctx).is_ok()
}

/// Applies `tx` in place. On error `state` is untouched.
pub fn execute_in_place(
    state: &mut LedgerState,
    tx: &Transaction,
    ctx: &ExecContext,
) -> Result<TxEffect, TxError> {
    check_transaction(state, tx, ctx)?;
    Ok(contract::apply(state, tx, ctx)?)
}

/// Value-semantics execution: returns the successor state.
pub fn execute_transaction(
    state: &LedgerState,
    tx: &Transaction,
    ctx: &ExecContext,
) -> Result<LedgerState, ChainError> {
    let mut next = state.clone();
    execute_in_place(&mut next, tx, ctx)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MineParams {
    pub max_txs: usize,
    pub timestamp: u64,
    pub miner: Address,
    pub allow_empty: bool,
}

impl MineParams {
    pub fn new(miner: Address, timestamp: u64) -> Self {
        Self {
            max_txs: 1000,
            timestamp,
            miner,
            allow_empty: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    config: ChainConfig,
    blocks: Vec<Block>,
    index: HashMap<Digest32, usize>,
    state: LedgerState,
    mempool: VecDeque<Transaction>,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Self {
        let genesis = Self::genesis_block();
        let mut index = HashMap::new();
        index.insert(genesis.hash, 0);
        Self {
            config,
            blocks: vec![genesis],
            index,
            state: LedgerState::new(),
            mempool: VecDeque::new(),
        }
    }

    /// Height 0, all-zero parent, empty state. Exempt from proof of work.
    pub fn genesis_block() -> Block {
        let header = BlockHeader {
            height: 0,
            parent_hash: Digest32::default(),
            state_root: LedgerState::new().root(),
            tx_root: Block::compute_tx_root(&[], &[]),
            timestamp: 0,
            miner: Address::default(),
            pow_nonce: 0,
        };
        Block {
            hash: header.hash(),
            header,
            txs: Vec::new(),
            tx_state_roots: Vec::new(),
        }
    }

    /// Rebuilds a chain by validating `blocks` (genesis excluded) in order.
    pub fn replay(config: ChainConfig, blocks: &[Block]) -> Result<Chain, BlockError> {
        let mut chain = Chain::new(config);
        for b in blocks {
            chain.try_append(b)?;
        }
        Ok(chain)
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height()
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn mempool(&self) -> &VecDeque<Transaction> {
        &self.mempool
    }

    pub fn block_by_hash(&self, hash: &Digest32) -> Option<&Block> {
        self.index.get(hash).map(|&i| &self.blocks[i])
    }

    /// Locates a committed transaction: `(height, index in block)`.
    pub fn find_transaction(&self, digest: &Digest32) -> Option<(u64, usize)> {
        self.blocks.iter().find_map(|b| {
            b.txs
                .iter()
                .position(|tx| tx.digest() == *digest)
                .map(|i| (b.height(), i))
        })
    }

    /// Execution context for a block extending the current tip.
    pub fn next_context(&self, timestamp: u64) -> ExecContext {
        ExecContext {
            chain_id: self.config.chain_id,
            tip_hash: self.tip().hash,
            timestamp,
            config: self.config.contract,
        }
    }

    /// Next usable nonce for `sender`, accounting for queued proposals.
    pub fn next_nonce(&self, sender: &Address) -> u64 {
        let queued = self
            .mempool
            .iter()
            .filter(|tx| tx.sender == *sender)
            .map(|tx| tx.nonce)
            .max()
            .unwrap_or(0);
        contract::committed_nonce(&self.state, sender).max(queued) + 1
    }

    /// Queues a proposal after checking its signature. Duplicates are ignored.
    pub fn submit(&mut self, tx: Transaction) -> Result<Digest32, TxError> {
        if !tx.verify_signature() {
            return Err(TxError::BadSignature);
        }
        let digest = tx.digest();
        if !self.mempool.iter().any(|t| t.digest() == digest) {
            self.mempool.push_back(tx);
        }
        Ok(digest)
    }

    /// Assembles and seals a block on top of the tip without appending it.
    ///
    /// Proposals are taken from the mempool in FIFO order; any that fail
    /// validation against the running state are discarded. The nonce search
    /// starts at a random point drawn from `rng`.
    pub fn mine_block<R: RngCore>(
        &mut self,
        params: &MineParams,
        rng: &mut R,
    ) -> Result<Block, ChainError> {
        let timestamp = params.timestamp.max(self.tip().header.timestamp);
        let ctx = self.next_context(timestamp);
        let mut working = self.state.clone();
        let mut txs = Vec::new();
        let mut roots = Vec::new();
        while txs.len() < params.max_txs {
            let Some(tx) = self.mempool.pop_front() else {
                break;
            };
            if execute_in_place(&mut working, &tx, &ctx).is_ok() {
                roots.push(working.root());
                txs.push(tx);
            }
        }
        if txs.is_empty() && !params.allow_empty {
            return Err(ChainError::EmptyMempool);
        }
        let mut header = BlockHeader {
            height: self.height() + 1,
            parent_hash: self.tip().hash,
            state_root: working.root(),
            tx_root: Block::compute_tx_root(&txs, &roots),
            timestamp,
            miner: params.miner,
            pow_nonce: rng.next_u64(),
        };
        for _ in 0..self.config.max_mining_attempts {
            let hash = header.hash();
            if self.config.difficulty.is_met_by(&hash) {
                return Ok(Block {
                    header,
                    hash,
                    txs,
                    tx_state_roots: roots,
                });
            }
            header.pow_nonce = header.pow_nonce.wrapping_add(1);
        }
        for tx in txs.into_iter().rev() {
            self.mempool.push_front(tx);
        }
        Err(ChainError::MiningTimeout {
            attempts: self.config.max_mining_attempts,
        })
    }

    /// Full check of `b` against the tip; returns the successor state.
    pub fn check_block(&self, b: &Block) -> Result<LedgerState, BlockError> {
        let tip = self.tip();
        if b.header.parent_hash != tip.hash {
            return Err(BlockError::UnknownParent(b.header.parent_hash));
        }
        if b.header.height != tip.height() + 1 {
            return Err(BlockError::BadHeight {
                expected: tip.height() + 1,
                got: b.header.height,
            });
        }
        if b.header.hash() != b.hash {
            return Err(BlockError::HashMismatch);
        }
        if !self.config.difficulty.is_met_by(&b.hash) {
            return Err(BlockError::InsufficientWork);
        }
        if b.header.timestamp < tip.header.timestamp {
            return Err(BlockError::TimestampRegression);
        }
        if b.tx_state_roots.len() != b.txs.len() {
            return Err(BlockError::RootCountMismatch {
                txs: b.txs.len(),
                roots: b.tx_state_roots.len(),
            });
        }
        if Block::compute_tx_root(&b.txs, &b.tx_state_roots) != b.header.tx_root {
            return Err(BlockError::TxRootMismatch);
        }

        let ctx = self.next_context(b.header.timestamp);
        let mut state = self.state.clone();
        for (index, tx) in b.txs.iter().enumerate() {
            execute_in_place(&mut state, tx, &ctx)
                .map_err(|error| BlockError::InvalidTransaction { index, error })?;
            if self.config.per_tx_roots && state.root() != b.tx_state_roots[index] {
                return Err(BlockError::IntermediateRootMismatch { index });
            }
        }
        if state.root() != b.header.state_root {
            return Err(BlockError::StateRootMismatch);
        }
        Ok(state)
    }

    /// Validates `b` and, if it passes, replaces the local state and appends
    /// the block. On failure nothing changes.
    pub fn try_append(&mut self, b: &Block) -> Result<(), BlockError> {
        let state = self.check_block(b)?;
        self.commit(b.clone(), state);
        Ok(())
    }

    pub fn validate_block(&mut self, b: &Block) -> bool {
        self.try_append(b).is_ok()
    }

    fn commit(&mut self, b: Block, state: LedgerState) {
        let included: HashSet<Digest32> = b.txs.iter().map(Transaction::digest).collect();
        self.mempool.retain(|tx| !included.contains(&tx.digest()));
        self.index.insert(b.hash, self.blocks.len());
        self.blocks.push(b);
        self.state = state;
    }

    /// Longest-chain rule. `branch` must attach to a block on the local chain
    /// and end strictly higher than the current tip; ties keep the current
    /// chain. The branch is replayed from genesis and adopted only if every
    /// block validates. Transactions orphaned by the switch return to the
    /// mempool.
    pub fn resolve_fork(&mut self, branch: &[Block]) -> bool {
        self.try_resolve_fork(branch).unwrap_or(false)
    }

    pub fn try_resolve_fork(&mut self, branch: &[Block]) -> Result<bool, BlockError> {
        let Some(first) = branch.first() else {
            return Ok(false);
        };
        let fork_index = *self
            .index
            .get(&first.header.parent_hash)
            .ok_or(BlockError::DetachedFork)?;
        if (fork_index + branch.len()) as u64 <= self.height() {
            return Ok(false);
        }
        let mut rebuilt = Chain::replay(self.config, &self.blocks[1..=fork_index])?;
        for b in branch {
            rebuilt.try_append(b)?;
        }
        let adopted: HashSet<Digest32> = branch
            .iter()
            .flat_map(|b| b.txs.iter().map(Transaction::digest))
            .collect();
        let orphaned = self.blocks[fork_index + 1..]
            .iter()
            .flat_map(|b| b.txs.iter().cloned());
        let pending: Vec<Transaction> = orphaned.chain(self.mempool.drain(..)).collect();
        for tx in pending {
            if !adopted.contains(&tx.digest()) {
                let _ = rebuilt.submit(tx);
            }
        }
        *self = rebuilt;
        Ok(true)
    }

    /// Writes one JSON object per block, genesis first.
    pub fn export_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for b in &self.blocks {
            serde_json::to_writer(&mut out, b)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
