use std::sync::{Arc, Mutex};

use permchain_core::contract::{self, evaluate_validation};
use permchain_core::crypto::{Address, Digest32};
use permchain_core::{
    Block, Chain, ChainConfig, ChainError, MineParams, Transaction, ValidationRequest, Verdict,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainClientError {
    #[error("chain client unreachable")]
    Unreachable,
    #[error("transaction refused: {0}")]
    Refused(String),
    #[error("mining failed: {0}")]
    Mining(String),
}

/// Where a committed transaction ended up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_digest: Digest32,
    /// False when the transaction failed its contract precondition and the
    /// miner discarded it.
    pub included: bool,
    pub height: u64,
    pub block_hash: Digest32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

/// The resource server's view of the chain.
pub trait ChainClient {
    fn chain_id(&self) -> Result<u64, ChainClientError>;
    fn next_nonce(&self, sender: &Address) -> Result<u64, ChainClientError>;
    fn is_registered(&self, who: &Address) -> Result<bool, ChainClientError>;
    /// Submits `tx` and waits until a block containing it (or discarding it)
    /// is appended.
    fn commit(&mut self, tx: Transaction) -> Result<Receipt, ChainClientError>;
    /// Queues `tx` without waiting.
    fn submit(&mut self, tx: Transaction) -> Result<Digest32, ChainClientError>;
    /// Verdict a validation would get against the current tip.
    fn dry_run_validation(&self, req: &ValidationRequest) -> Result<Verdict, ChainClientError>;
}

/// Single-node chain living in the same process. Every commit mines a block
/// immediately; block timestamps advance one second per block unless the
/// clock is moved explicitly.
#[derive(Debug)]
pub struct InProcessChain {
    chain: Chain,
    miner: Address,
    clock: u64,
    rng: ChaCha8Rng,
    reachable: bool,
}

impl InProcessChain {
    pub fn new(config: ChainConfig, miner: Address, seed: u64) -> Self {
        Self {
            chain: Chain::new(config),
            miner,
            clock: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            reachable: true,
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn advance(&mut self, seconds: u64) {
        self.clock += seconds;
    }

    /// Simulates losing the connection to the chain.
    pub fn set_reachable(&mut self, reachable: bool) {
        self.reachable = reachable;
    }

    fn check(&self) -> Result<(), ChainClientError> {
        if self.reachable {
            Ok(())
        } else {
            Err(ChainClientError::Unreachable)
        }
    }

    /// Mines everything queued into one block.
    pub fn mine_pending(&mut self) -> Result<Option<Block>, ChainClientError> {
        self.check()?;
        self.clock += 1;
        let params = MineParams::new(self.miner, self.clock);
        match self.chain.mine_block(&params, &mut self.rng) {
            Ok(block) => {
                self.chain
                    .try_append(&block)
                    .map_err(|e| ChainClientError::Mining(e.to_string()))?;
                Ok(Some(block))
            }
            Err(ChainError::EmptyMempool) => Ok(None),
            Err(e) => Err(ChainClientError::Mining(e.to_string())),
        }
    }

    fn receipt(&self, tx_digest: Digest32) -> Receipt {
        match self.chain.find_transaction(&tx_digest) {
            Some((height, _)) => Receipt {
                tx_digest,
                included: true,
                height,
                block_hash: self.chain.blocks()[height as usize].hash,
                verdict: contract::verdict(self.chain.state(), &tx_digest),
            },
            None => Receipt {
                tx_digest,
                included: false,
                height: self.chain.height(),
                block_hash: self.chain.tip().hash,
                verdict: None,
            },
        }
    }
}

impl ChainClient for InProcessChain {
    fn chain_id(&self) -> Result<u64, ChainClientError> {
        self.check()?;
        Ok(self.chain.config().chain_id)
    }

    fn next_nonce(&self, sender: &Address) -> Result<u64, ChainClientError> {
        self.check()?;
        Ok(self.chain.next_nonce(sender))
    }

    fn is_registered(&self, who: &Address) -> Result<bool, ChainClientError> {
        self.check()?;
        Ok(contract::party(self.chain.state(), who).is_some())
    }

    fn commit(&mut self, tx: Transaction) -> Result<Receipt, ChainClientError> {
        let digest = self.submit(tx)?;
        self.mine_pending()?;
        Ok(self.receipt(digest))
    }

    fn submit(&mut self, tx: Transaction) -> Result<Digest32, ChainClientError> {
        self.check()?;
        self.chain
            .submit(tx)
            .map_err(|e| ChainClientError::Refused(e.to_string()))
    }

    fn dry_run_validation(&self, req: &ValidationRequest) -> Result<Verdict, ChainClientError> {
        self.check()?;
        let ctx = self.chain.next_context(self.clock + 1);
        Ok(evaluate_validation(self.chain.state(), req, &ctx).0)
    }
}

/// Handle shared between the resource server and other in-process actors.
pub type SharedChain = Arc<Mutex<InProcessChain>>;

impl ChainClient for SharedChain {
    fn chain_id(&self) -> Result<u64, ChainClientError> {
        self.lock().expect("chain lock").chain_id()
    }

    fn next_nonce(&self, sender: &Address) -> Result<u64, ChainClientError> {
        self.lock().expect("chain lock").next_nonce(sender)
    }

    fn is_registered(&self, who: &Address) -> Result<bool, ChainClientError> {
        self.lock().expect("chain lock").is_registered(who)
    }

    fn commit(&mut self, tx: Transaction) -> Result<Receipt, ChainClientError> {
        self.lock().expect("chain lock").commit(tx)
    }

    fn submit(&mut self, tx: Transaction) -> Result<Digest32, ChainClientError> {
        self.lock().expect("chain lock").submit(tx)
    }

    fn dry_run_validation(&self, req: &ValidationRequest) -> Result<Verdict, ChainClientError> {
        self.lock().expect("chain lock").dry_run_validation(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use permchain_core::crypto::generate_keypair;
    use permchain_core::{Difficulty, Payload, Roles};

    fn chain() -> InProcessChain {
        let cfg = ChainConfig {
            difficulty: Difficulty::ACCEPT_ALL,
            ..ChainConfig::default()
        };
        InProcessChain::new(cfg, generate_keypair([9; 32]).address, 1)
    }

    #[test]
    fn commit_mines_immediately() {
        let mut c = chain();
        let k = generate_keypair([1; 32]);
        let tx = Transaction::new_signed(
            &k,
            1,
            Payload::Register {
                roles: Roles::DATA_OWNER,
            },
        );
        let r = c.commit(tx).unwrap();
        assert!(r.included);
        assert_eq!(r.height, 1);
        assert!(c.is_registered(&k.address).unwrap());
        assert_eq!(c.chain().tip().header.timestamp, 1);
    }

    #[test]
    fn failed_precondition_is_not_included() {
        let mut c = chain();
        let k = generate_keypair([1; 32]);
        let tx = Transaction::new_signed(
            &k,
            1,
            Payload::Revoke {
                service_provider: k.address,
                third_party: k.address,
            },
        );
        let r = c.commit(tx).unwrap();
        assert!(!r.included);
        assert_eq!(c.chain().height(), 0);
    }

    #[test]
    fn unreachable_fails_every_call() {
        let mut c = chain();
        c.set_reachable(false);
        let k = generate_keypair([1; 32]);
        assert_eq!(c.chain_id(), Err(ChainClientError::Unreachable));
        let tx = Transaction::new_signed(&k, 1, Payload::Register { roles: Roles::NONE });
        assert_eq!(c.commit(tx), Err(ChainClientError::Unreachable));
    }
}
