//! Transparent polynomial commitments: a Merkle tree over the polynomial's
//! evaluations on a subgroup domain, with per-point openings carrying
//! authentication paths.
//!
//! The leaf vector is padded with all-zero leaves to a power of two. One
//! fixed 256-bit hash is used project-wide; leaves are hashed with a 0x00
//! prefix and inner nodes with 0x01 so levels cannot be confused.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::{FieldElement, Polynomial, SubgroupDomain};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitError {
    #[error("polynomial degree {degree} too high for domain of order {order}")]
    DegreeError { degree: usize, order: u64 },
    #[error("index {index} outside domain of order {order}")]
    IndexError { index: u64, order: u64 },
    #[error("malformed commitment bytes")]
    Malformed,
}

/// Merkle root over a polynomial's evaluations, together with the domain
/// order the leaf vector was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commitment {
    root: [u8; 32],
    domain_order: u32,
}

/// An opened evaluation point: 1-based leaf index, the claimed value, and
/// the sibling digests from leaf to root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    index: u32,
    value: FieldElement,
    path: Vec<[u8; 32]>,
}

fn leaf_hash(bytes: &[u8; 8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([0x00]);
    h.update(bytes);
    h.finalize().into()
}

fn node_hash(left: &[u8; 32], right: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([0x01]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

fn padded_len(order: u64) -> u64 {
    order.max(1).next_power_of_two()
}

fn tree_levels(leaves: Vec<[u8; 32]>) -> Vec<Vec<[u8; 32]>> {
    let mut levels = vec![leaves];
    while levels.last().expect("nonempty").len() > 1 {
        let prev = levels.last().expect("nonempty");
        let next: Vec<[u8; 32]> =
            prev.chunks(2).map(|pair| node_hash(&pair[0], &pair[1])).collect();
        levels.push(next);
    }
    levels
}

fn leaf_vector(poly: &Polynomial, domain: &SubgroupDomain) -> Vec<[u8; 32]> {
    let padded = padded_len(domain.order()) as usize;
    let mut leaves = Vec::with_capacity(padded);
    for x in domain.elements() {
        leaves.push(leaf_hash(&poly.evaluate(*x).to_bytes()));
    }
    let zero = [0u8; 8];
    while leaves.len() < padded {
        leaves.push(leaf_hash(&zero));
    }
    leaves
}

/// Commits to `poly` over `domain`. Deterministic: the root depends only on
/// the evaluation vector and the domain order.
pub fn commit(poly: &Polynomial, domain: &SubgroupDomain) -> Result<Commitment, CommitError> {
    if let Some(degree) = poly.degree() {
        if degree as u64 >= domain.order() {
            return Err(CommitError::DegreeError { degree, order: domain.order() });
        }
    }
    let levels = tree_levels(leaf_vector(poly, domain));
    let root = levels.last().expect("nonempty")[0];
    Ok(Commitment { root, domain_order: domain.order() as u32 })
}

/// Opens `poly(g^j)` with the authentication path for leaf `j`.
pub fn open(
    poly: &Polynomial,
    domain: &SubgroupDomain,
    j: u64,
) -> Result<Opening, CommitError> {
    if j < 1 || j > domain.order() {
        return Err(CommitError::IndexError { index: j, order: domain.order() });
    }
    let levels = tree_levels(leaf_vector(poly, domain));
    let mut path = Vec::with_capacity(levels.len() - 1);
    let mut idx = (j - 1) as usize;
    for level in &levels[..levels.len() - 1] {
        path.push(level[idx ^ 1]);
        idx >>= 1;
    }
    Ok(Opening { index: j as u32, value: poly.evaluate(domain.element(j)), path })
}

/// Recomputes the root from an opening. Returns false on any mismatch,
/// including a path of the wrong length or an out-of-range index.
pub fn verify_opening(com: &Commitment, opening: &Opening) -> bool {
    let padded = padded_len(com.domain_order as u64);
    if opening.index < 1 || opening.index as u64 > com.domain_order as u64 {
        return false;
    }
    if opening.path.len() != padded.trailing_zeros() as usize {
        return false;
    }
    let mut acc = leaf_hash(&opening.value.to_bytes());
    let mut idx = (opening.index - 1) as usize;
    for sibling in &opening.path {
        acc = if idx & 1 == 0 { node_hash(&acc, sibling) } else { node_hash(sibling, &acc) };
        idx >>= 1;
    }
    acc == com.root
}

impl Commitment {
    pub fn root(&self) -> &[u8; 32] {
        &self.root
    }

    pub fn domain_order(&self) -> u32 {
        self.domain_order
    }

    /// Canonical encoding: 32-byte root, then the domain order as 4
    /// big-endian bytes.
    pub fn to_bytes(&self) -> [u8; 36] {
        let mut out = [0u8; 36];
        out[..32].copy_from_slice(&self.root);
        out[32..].copy_from_slice(&self.domain_order.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CommitError> {
        if bytes.len() != 36 {
            return Err(CommitError::Malformed);
        }
        let mut root = [0u8; 32];
        root.copy_from_slice(&bytes[..32]);
        let domain_order = u32::from_be_bytes(bytes[32..].try_into().expect("4 bytes"));
        Ok(Self { root, domain_order })
    }
}

impl Opening {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn value(&self) -> FieldElement {
        self.value
    }

    pub fn path(&self) -> &[[u8; 32]] {
        &self.path
    }

    /// Rebuilds an opening from parts (used by deserialization).
    pub fn from_parts(index: u32, value: FieldElement, path: Vec<[u8; 32]>) -> Self {
        Self { index, value, path }
    }

    /// Canonical encoding: index (4 bytes), value (8 bytes), path length
    /// (1 byte), then the path digests.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 32 * self.path.len());
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(&self.value.to_bytes());
        out.push(self.path.len() as u8);
        for digest in &self.path {
            out.extend_from_slice(digest);
        }
        out
    }

    /// Parses one opening from the front of `bytes`; returns the rest.
    pub fn read_from<'a>(
        bytes: &'a [u8],
        modulus: u64,
    ) -> Result<(Self, &'a [u8]), CommitError> {
        if bytes.len() < 13 {
            return Err(CommitError::Malformed);
        }
        let index = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        let value = u64::from_be_bytes(bytes[4..12].try_into().expect("8 bytes"));
        if value >= modulus {
            return Err(CommitError::Malformed);
        }
        let path_len = bytes[12] as usize;
        let end = 13 + 32 * path_len;
        if bytes.len() < end {
            return Err(CommitError::Malformed);
        }
        let path = bytes[13..end]
            .chunks(32)
            .map(|c| c.try_into().expect("32 bytes"))
            .collect();
        Ok((Self { index, value: FieldElement::new(value, modulus), path }, &bytes[end..]))
    }
}
