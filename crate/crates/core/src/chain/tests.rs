use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::contract::{Permission, Roles};
use crate::crypto::{generate_keypair, hash, Keypair};
use crate::tx::Payload;
use crate::workload::Workload;

fn easy() -> ChainConfig {
    ChainConfig {
        difficulty: Difficulty::ACCEPT_ALL,
        ..ChainConfig::default()
    }
}

fn miner() -> Address {
    generate_keypair([200; 32]).address
}

fn mine_next(chain: &mut Chain, rng: &mut ChaCha8Rng) -> Block {
    let ts = chain.tip().header.timestamp + 10;
    let params = MineParams {
        allow_empty: true,
        ..MineParams::new(miner(), ts)
    };
    let b = chain.mine_block(&params, rng).unwrap();
    assert!(chain.validate_block(&b));
    b
}

fn registered_chain(rng: &mut ChaCha8Rng) -> (Chain, Keypair, Keypair, Keypair) {
    let mut chain = Chain::new(easy());
    let owner = generate_keypair([1; 32]);
    let provider = generate_keypair([2; 32]);
    let third = generate_keypair([3; 32]);
    for (k, r) in [
        (&owner, Roles::DATA_OWNER),
        (&provider, Roles::SERVICE_PROVIDER),
        (&third, Roles::THIRD_PARTY),
    ] {
        chain
            .submit(Transaction::new_signed(
                k,
                1,
                Payload::Register { roles: r },
            ))
            .unwrap();
    }
    mine_next(&mut chain, rng);
    (chain, owner, provider, third)
}

fn grant(owner: &Keypair, provider: &Keypair, third: &Keypair, nonce: u64, p: u8) -> Transaction {
    Transaction::new_signed(
        owner,
        nonce,
        Payload::Grant {
            service_provider: provider.address,
            third_party: third.address,
            permission: Permission(p),
            data_pointer: "ClinicalDataManagement/P001".into(),
            data_hash: hash(b"doc"),
        },
    )
}

#[test]
fn genesis_layout() {
    let chain = Chain::new(easy());
    let g = chain.tip();
    assert_eq!(g.height(), 0);
    assert_eq!(g.parent_hash(), Digest32([0; 32]));
    assert_eq!(g.header.state_root, LedgerState::new().root());
    assert_eq!(Chain::genesis_block(), *g);
}

#[test]
fn accept_all_difficulty_first_nonce_wins() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut chain = Chain::new(ChainConfig {
        max_mining_attempts: 1,
        ..easy()
    });
    let b = mine_next(&mut chain, &mut rng);
    assert_eq!(b.height(), 1);
}

#[test]
fn empty_block_keeps_parent_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut chain, ..) = registered_chain(&mut rng);
    let parent_root = chain.tip().header.state_root;
    let b = mine_next(&mut chain, &mut rng);
    assert!(b.txs.is_empty());
    assert_eq!(b.header.state_root, parent_root);
}

#[test]
fn empty_mempool_without_permission() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut chain = Chain::new(easy());
    let params = MineParams::new(miner(), 1);
    assert_eq!(
        chain.mine_block(&params, &mut rng),
        Err(ChainError::EmptyMempool)
    );
}

#[test]
fn leading_zero_difficulty_is_honored() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut chain = Chain::new(ChainConfig {
        difficulty: Difficulty::leading_zero_bits(8),
        ..ChainConfig::default()
    });
    let b = mine_next(&mut chain, &mut rng);
    assert_eq!(b.hash.0[0], 0);
}

#[test]
fn mining_timeout_restores_mempool() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut chain = Chain::new(ChainConfig {
        difficulty: Difficulty::leading_zero_bits(200),
        max_mining_attempts: 16,
        ..ChainConfig::default()
    });
    let k = generate_keypair([1; 32]);
    chain
        .submit(Transaction::new_signed(
            &k,
            1,
            Payload::Register {
                roles: Roles::DATA_OWNER,
            },
        ))
        .unwrap();
    let err = chain.mine_block(&MineParams::new(miner(), 1), &mut rng);
    assert_eq!(err, Err(ChainError::MiningTimeout { attempts: 16 }));
    assert_eq!(chain.mempool().len(), 1);
}

#[test]
fn grant_then_read_after_execution() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (chain, owner, provider, third) = registered_chain(&mut rng);
    let ctx = chain.next_context(100);
    let tx = grant(&owner, &provider, &third, 2, 2);
    assert!(validate_transaction(chain.state(), &tx, &ctx));
    let before = chain.state().clone();
    let next = execute_transaction(chain.state(), &tx, &ctx).unwrap();
    assert_eq!(*chain.state(), before);
    let triple = crate::contract::PartyTriple::new(owner.address, provider.address, third.address);
    assert!(crate::contract::check_permission(
        &next,
        &triple,
        Permission::READ
    ));
    let again = execute_transaction(chain.state(), &tx, &ctx).unwrap();
    assert_eq!(next.root(), again.root());
}

#[test]
fn replayed_transaction_is_stale() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut chain, owner, provider, third) = registered_chain(&mut rng);
    let tx = grant(&owner, &provider, &third, 2, 2);
    chain.submit(tx.clone()).unwrap();
    mine_next(&mut chain, &mut rng);
    let ctx = chain.next_context(1000);
    assert!(matches!(
        check_transaction(chain.state(), &tx, &ctx),
        Err(TxError::StaleNonce {
            committed: 2,
            got: 2
        })
    ));
}

#[test]
fn mutated_signature_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (chain, owner, provider, third) = registered_chain(&mut rng);
    let ctx = chain.next_context(100);
    let tx = grant(&owner, &provider, &third, 2, 2);
    for i in 0..tx.signature.0.len() {
        let mut t = tx.clone();
        t.signature.0[i] ^= 0x80;
        assert!(!validate_transaction(chain.state(), &t, &ctx));
    }
}

#[test]
fn execute_invalid_aborts() {
    let chain = Chain::new(easy());
    let k = generate_keypair([1; 32]);
    let tx = grant(&k, &k, &k, 1, 2);
    let ctx = chain.next_context(1);
    assert!(matches!(
        execute_transaction(chain.state(), &tx, &ctx),
        Err(ChainError::InvalidTransaction(_))
    ));
}

#[test]
fn invalid_proposals_are_skipped_at_mining() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut chain, owner, provider, third) = registered_chain(&mut rng);
    // Second grant reuses the nonce of the first and becomes stale mid-block.
    chain
        .submit(grant(&owner, &provider, &third, 2, 2))
        .unwrap();
    chain
        .submit(grant(&owner, &provider, &third, 2, 6))
        .unwrap();
    chain
        .submit(grant(&owner, &provider, &third, 3, 6))
        .unwrap();
    let b = mine_next(&mut chain, &mut rng);
    assert_eq!(b.txs.len(), 2);
    assert!(chain.mempool().is_empty());
}

#[test]
fn random_sealed_root_rejected_without_side_effects() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut chain, owner, provider, third) = registered_chain(&mut rng);
    chain
        .submit(grant(&owner, &provider, &third, 2, 2))
        .unwrap();
    let params = MineParams::new(miner(), 50);
    let mut b = chain.mine_block(&params, &mut rng).unwrap();
    chain
        .submit(grant(&owner, &provider, &third, 3, 2))
        .unwrap();
    let snapshot = (
        chain.height(),
        chain.state().root(),
        chain.mempool().clone(),
    );
    b.header.state_root = hash(b"random");
    b.hash = b.header.hash();
    assert_eq!(chain.try_append(&b), Err(BlockError::StateRootMismatch));
    assert_eq!(
        snapshot,
        (
            chain.height(),
            chain.state().root(),
            chain.mempool().clone()
        )
    );
}

#[test]
fn relaxed_mode_checks_only_final_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut strict = Chain::new(easy());
    let k1 = generate_keypair([1; 32]);
    let k2 = generate_keypair([2; 32]);
    strict
        .submit(Transaction::new_signed(
            &k1,
            1,
            Payload::Register {
                roles: Roles::DATA_OWNER,
            },
        ))
        .unwrap();
    strict
        .submit(Transaction::new_signed(
            &k2,
            1,
            Payload::Register {
                roles: Roles::THIRD_PARTY,
            },
        ))
        .unwrap();
    let mut relaxed = Chain::new(ChainConfig {
        per_tx_roots: false,
        ..easy()
    });
    let mut b = strict
        .mine_block(&MineParams::new(miner(), 5), &mut rng)
        .unwrap();
    b.tx_state_roots[0] = hash(b"bogus");
    b.header.tx_root = Block::compute_tx_root(&b.txs, &b.tx_state_roots);
    b.hash = b.header.hash();
    assert_eq!(
        strict.try_append(&b),
        Err(BlockError::IntermediateRootMismatch { index: 0 })
    );
    assert!(relaxed.validate_block(&b));
}

#[test]
fn out_of_order_block_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut a = Chain::new(easy());
    let b1 = mine_next(&mut a, &mut rng);
    let b2 = mine_next(&mut a, &mut rng);
    let mut fresh = Chain::new(easy());
    assert!(matches!(
        fresh.try_append(&b2),
        Err(BlockError::UnknownParent(_))
    ));
    assert!(fresh.validate_block(&b1));
    assert!(fresh.validate_block(&b2));
}

fn run_workload(seed: u64, blocks: usize) -> Chain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut workload = Workload::new(seed, 3, 1);
    let mut chain = Chain::new(easy());
    for tx in workload.registrations() {
        chain.submit(tx).unwrap();
    }
    mine_next(&mut chain, &mut rng);
    for _ in 1..blocks {
        for tx in workload.batch(&mut rng, chain.state(), 4) {
            chain.submit(tx).unwrap();
        }
        mine_next(&mut chain, &mut rng);
    }
    chain
}

#[test]
fn mined_blocks_validate_on_fresh_replica() {
    let chain = run_workload(13, 100);
    let replica = Chain::replay(easy(), &chain.blocks()[1..]).unwrap();
    assert_eq!(replica.tip().hash, chain.tip().hash);
    assert_eq!(replica.state().root(), chain.state().root());
    assert!(crate::contract::integrity_violations(chain.state()).is_empty());
}

#[test]
fn fork_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut base = Chain::new(easy());
    mine_next(&mut base, &mut rng);

    let mut left = base.clone();
    let mut right = base.clone();
    let l2 = mine_next(&mut left, &mut rng);
    let r2 = mine_next(&mut right, &mut rng);
    let r3 = mine_next(&mut right, &mut rng);
    assert_ne!(l2.hash, r2.hash);

    // equal length: first seen wins
    assert!(!left.resolve_fork(std::slice::from_ref(&r2)));
    assert_eq!(left.tip().hash, l2.hash);

    // a longer branch with one invalid block is rejected
    let mut bad = r3.clone();
    bad.header.state_root = hash(b"x");
    bad.hash = bad.header.hash();
    assert!(!left.resolve_fork(&[r2.clone(), bad]));
    assert_eq!(left.tip().hash, l2.hash);

    // a longer valid branch is adopted, state equals replay
    assert!(left.resolve_fork(&[r2, r3]));
    assert_eq!(left.tip().hash, right.tip().hash);
    assert_eq!(left.state().root(), right.state().root());
    assert_eq!(left.height(), 3);
}

#[test]
fn fork_returns_orphaned_transactions() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut left = Chain::new(easy());
    let mut right = left.clone();
    let k = generate_keypair([1; 32]);
    left.submit(Transaction::new_signed(
        &k,
        1,
        Payload::Register {
            roles: Roles::DATA_OWNER,
        },
    ))
    .unwrap();
    mine_next(&mut left, &mut rng);
    let r1 = mine_next(&mut right, &mut rng);
    let r2 = mine_next(&mut right, &mut rng);
    assert!(left.resolve_fork(&[r1, r2]));
    assert_eq!(left.mempool().len(), 1);
}

#[test]
fn export_is_one_line_per_block() {
    let chain = run_workload(16, 5);
    let mut out = Vec::new();
    chain.export_jsonl(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 6);
    for line in text.lines() {
        let b: Block = serde_json::from_str(line).unwrap();
        assert_eq!(b.header.hash(), b.hash);
    }
}
