use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Decode, Decoder, Encode, Encoder};
use crate::crypto::{hash, hash_parts, merkle_root, Address, Digest32};
use crate::tx::Transaction;

/// Proof-of-work target: a block hash read as a big-endian 256-bit integer
/// must be strictly below it.
#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Difficulty(pub Digest32);

impl Difficulty {
    /// `2^256 - 1`; every hash except the all-ones one qualifies.
    pub const ACCEPT_ALL: Difficulty = Difficulty(Digest32([0xFF; 32]));

    /// Target `2^(256 - bits)`, i.e. `bits` leading zero bits required.
    /// Expected number of attempts is `2^bits`.
    pub fn leading_zero_bits(bits: u32) -> Difficulty {
        assert!(bits <= 255, "difficulty must leave a reachable target");
        let mut target = [0u8; 32];
        let bit_index = 255 - bits as usize; // position of the single set bit, LSB = 0
        target[31 - bit_index / 8] = 1 << (bit_index % 8);
        Difficulty(Digest32(target))
    }

    pub fn is_met_by(&self, block_hash: &Digest32) -> bool {
        block_hash.0 < self.0 .0
    }
}

impl Default for Difficulty {
    /// About 8k expected attempts.
    fn default() -> Self {
        Difficulty::leading_zero_bits(13)
    }
}

impl fmt::Debug for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Difficulty({})", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub parent_hash: Digest32,
    /// Merkle root of the post-block state.
    pub state_root: Digest32,
    /// Merkle root over `H(tx_digest || intermediate_state_root)` leaves.
    pub tx_root: Digest32,
    pub timestamp: u64,
    pub miner: Address,
    pub pow_nonce: u64,
}

impl BlockHeader {
    pub fn hash(&self) -> Digest32 {
        hash(&self.to_bytes())
    }
}

impl Encode for BlockHeader {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(self.height)
            .put_digest(&self.parent_hash)
            .put_digest(&self.state_root)
            .put_digest(&self.tx_root)
            .put_u64(self.timestamp)
            .put_address(&self.miner)
            .put_u64(self.pow_nonce);
    }
}

impl Decode for BlockHeader {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(BlockHeader {
            height: dec.u64()?,
            parent_hash: dec.digest()?,
            state_root: dec.digest()?,
            tx_root: dec.digest()?,
            timestamp: dec.u64()?,
            miner: dec.address()?,
            pow_nonce: dec.u64()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    /// Sealed hash of `header`.
    pub hash: Digest32,
    pub txs: Vec<Transaction>,
    /// State root after each transaction, in order.
    pub tx_state_roots: Vec<Digest32>,
}

impl Block {
    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn parent_hash(&self) -> Digest32 {
        self.header.parent_hash
    }

    /// Commitment to the transaction list together with the intermediate
    /// roots produced by executing it.
    pub fn compute_tx_root(txs: &[Transaction], roots: &[Digest32]) -> Digest32 {
        let leaves: Vec<Digest32> = txs
            .iter()
            .zip(roots)
            .map(|(tx, root)| hash_parts(&[&tx.digest().0, &root.0]))
            .collect();
        merkle_root(&leaves)
    }
}

impl Encode for Block {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.header)
            .put_digest(&self.hash)
            .put_seq(&self.txs)
            .put_seq(&self.tx_state_roots);
    }
}

impl Decode for Block {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Block {
            header: dec.get()?,
            hash: dec.digest()?,
            txs: dec.seq()?,
            tx_state_roots: dec.seq()?,
        })
    }
}
