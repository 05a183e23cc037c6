//! Randomized transaction generator for exercising the chain.
//!
//! Proposals are drawn against the caller's view of the state so most of them
//! are valid, with a share of deliberately stale or unauthorized ones mixed in.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::contract::{self, validation_challenge, Permission, Roles};
use crate::crypto::{generate_keypair, Address, Keypair};
use crate::state::LedgerState;
use crate::tx::{Payload, Transaction, ValidationRequest};

#[derive(Debug, Clone)]
pub struct Workload {
    chain_id: u64,
    owners: Vec<Keypair>,
    providers: Vec<Keypair>,
    thirds: Vec<Keypair>,
    validator: Keypair,
    nonces: HashMap<Address, u64>,
    request_nonce: u64,
}

impl Workload {
    /// `parties_per_role` owners, providers and third parties, plus one
    /// validating client. Keys are derived from `key_seed`.
    pub fn new(key_seed: u64, parties_per_role: usize, chain_id: u64) -> Self {
        let key = |role: u8, i: usize| {
            let mut seed = [0u8; 32];
            seed[..8].copy_from_slice(&key_seed.to_be_bytes());
            seed[8] = role;
            seed[9..17].copy_from_slice(&(i as u64).to_be_bytes());
            generate_keypair(seed)
        };
        Self {
            chain_id,
            owners: (0..parties_per_role).map(|i| key(1, i)).collect(),
            providers: (0..parties_per_role).map(|i| key(2, i)).collect(),
            thirds: (0..parties_per_role).map(|i| key(3, i)).collect(),
            validator: key(4, 0),
            nonces: HashMap::new(),
            request_nonce: 0,
        }
    }

    fn sign(&mut self, key: &Keypair, payload: Payload) -> Transaction {
        let n = self.nonces.entry(key.address).or_insert(0);
        *n += 1;
        Transaction::new_signed(key, *n, payload)
    }

    /// Registration proposals for every party.
    pub fn registrations(&mut self) -> Vec<Transaction> {
        let mut parties: Vec<(Keypair, Roles)> = Vec::new();
        parties.extend(self.owners.iter().map(|k| (k.clone(), Roles::DATA_OWNER)));
        parties.extend(
            self.providers
                .iter()
                .map(|k| (k.clone(), Roles::SERVICE_PROVIDER)),
        );
        parties.extend(self.thirds.iter().map(|k| (k.clone(), Roles::THIRD_PARTY)));
        parties.push((self.validator.clone(), Roles::NONE));
        parties
            .into_iter()
            .map(|(k, roles)| self.sign(&k, Payload::Register { roles }))
            .collect()
    }

    /// `n` proposals chosen against `state`.
    pub fn batch<R: Rng>(
        &mut self,
        rng: &mut R,
        state: &LedgerState,
        n: usize,
    ) -> Vec<Transaction> {
        (0..n).map(|_| self.next(rng, state)).collect()
    }

    fn next<R: Rng>(&mut self, rng: &mut R, state: &LedgerState) -> Transaction {
        let owner = self.owners.choose(rng).expect("parties").clone();
        let provider = self.providers.choose(rng).expect("parties").clone();
        let third = self.thirds.choose(rng).expect("parties").clone();
        let roll: u32 = rng.gen_range(0..100);
        match roll {
            0..=29 => {
                let permission = Permission(rng.gen_range(1..16));
                let payload = Payload::Grant {
                    service_provider: provider.address,
                    third_party: third.address,
                    permission,
                    data_pointer: format!("ClinicalDataManagement/{}", rng.gen::<u16>()),
                    data_hash: crate::crypto::hash(&rng.gen::<[u8; 8]>()),
                };
                self.sign(&owner, payload)
            }
            30..=39 => {
                let payload = Payload::Revoke {
                    service_provider: provider.address,
                    third_party: third.address,
                };
                self.sign(&owner, payload)
            }
            40..=64 => {
                let op = Permission(1 << rng.gen_range(0..4));
                let payload = Payload::RequestToken {
                    data_owner: owner.address,
                    service_provider: provider.address,
                    op,
                };
                self.sign(&third, payload)
            }
            65..=94 => {
                let tokens = contract::token_records(state);
                let (token, rec) = match tokens.choose(rng) {
                    Some((t, r)) => (*t, Some(r.clone())),
                    None => (crate::crypto::hash(&rng.gen::<[u8; 8]>()), None),
                };
                let presenter = match (rec, rng.gen_range(0..4)) {
                    (Some(r), 0) => self.key_for(&r.parties.data_owner).unwrap_or(third),
                    (Some(r), 1 | 2) => self.key_for(&r.parties.third_party).unwrap_or(third),
                    _ => third,
                };
                let op = Permission(1 << rng.gen_range(0..4));
                self.request_nonce += 1;
                let request_nonce = self.request_nonce;
                let t = presenter.sign(&validation_challenge(
                    &token,
                    op,
                    self.chain_id,
                    request_nonce,
                ));
                let validator = self.validator.clone();
                self.sign(
                    &validator,
                    Payload::Validate(ValidationRequest {
                        token,
                        pk: presenter.address,
                        t,
                        op,
                        request_nonce,
                    }),
                )
            }
            _ => {
                // Grant from a party lacking the owner role; always invalid.
                let payload = Payload::Grant {
                    service_provider: provider.address,
                    third_party: owner.address,
                    permission: Permission::READ,
                    data_pointer: String::new(),
                    data_hash: Default::default(),
                };
                self.sign(&third, payload)
            }
        }
    }

    fn key_for(&self, addr: &Address) -> Option<Keypair> {
        self.owners
            .iter()
            .chain(&self.providers)
            .chain(&self.thirds)
            .find(|k| k.address == *addr)
            .cloned()
    }
}
