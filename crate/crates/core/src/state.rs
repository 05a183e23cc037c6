use std::collections::BTreeMap;

use crate::codec::Encoder;
use crate::crypto::{hash, merkle_root, Digest32};

/// Key-value world state. Every contract ledger lives here under its own key
/// prefix; the root commits to the whole map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerState {
    entries: BTreeMap<Vec<u8>, Vec<u8>>,
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn insert(&mut self, key: Vec<u8>, value: Vec<u8>) {
        self.entries.insert(key, value);
    }

    pub fn remove(&mut self, key: &[u8]) -> Option<Vec<u8>> {
        self.entries.remove(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.entries
            .iter()
            .map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Entries whose key starts with `prefix`, in key order.
    pub fn scan_prefix<'a>(
        &'a self,
        prefix: &'a [u8],
    ) -> impl Iterator<Item = (&'a [u8], &'a [u8])> + 'a {
        self.entries
            .range(prefix.to_vec()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Merkle root over `H(len(k) || k || len(v) || v)` leaves in key order.
    pub fn root(&self) -> Digest32 {
        let leaves: Vec<Digest32> = self
            .entries
            .iter()
            .map(|(k, v)| {
                let mut enc = Encoder::new();
                enc.put_bytes(k).put_bytes(v);
                hash(&enc.finish())
            })
            .collect();
        merkle_root(&leaves)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_root_is_empty_tree() {
        assert_eq!(LedgerState::new().root(), merkle_root(&[]));
    }

    #[test]
    fn root_ignores_insertion_order() {
        let mut a = LedgerState::new();
        a.insert(b"x".to_vec(), b"1".to_vec());
        a.insert(b"y".to_vec(), b"2".to_vec());
        let mut b = LedgerState::new();
        b.insert(b"y".to_vec(), b"2".to_vec());
        b.insert(b"x".to_vec(), b"1".to_vec());
        assert_eq!(a.root(), b.root());
    }

    #[test]
    fn key_value_boundary_is_unambiguous() {
        let mut a = LedgerState::new();
        a.insert(b"ab".to_vec(), b"c".to_vec());
        let mut b = LedgerState::new();
        b.insert(b"a".to_vec(), b"bc".to_vec());
        assert_ne!(a.root(), b.root());
    }

    #[test]
    fn prefix_scan() {
        let mut s = LedgerState::new();
        s.insert(b"a/1".to_vec(), vec![]);
        s.insert(b"a/2".to_vec(), vec![]);
        s.insert(b"b/1".to_vec(), vec![]);
        assert_eq!(s.scan_prefix(b"a/").count(), 2);
    }
}
