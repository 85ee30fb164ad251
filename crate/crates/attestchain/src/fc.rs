//! The functional-commitment scheme over constraint systems.
//!
//! Setup derives two subgroup domains from the instance: a wire domain of
//! padded order `n_hat` (generator `omega`) indexing rows and columns, and
//! an entry domain of padded order `m_hat` (generator `gamma`) indexing the
//! nonzero-entry lists. Each matrix is encoded as three polynomials over
//! the entry domain,
//!
//! ```text
//! row(gamma^j) = omega^(r_j)    col(gamma^j) = omega^(c_j)    val(gamma^j) = v_j
//! ```
//!
//! committed with the Merkle scheme. Structure proofs open every entry's
//! row/col/val triple so the verifier can compare the discrete logs:
//! strictly-lower claims need `r_j > c_j`, diagonal claims `r_j = c_j`,
//! with zero-valued (padding) entries exempt. Execution proofs commit to
//! the assignment over the wire domain, open every position the constraint
//! rows touch plus the public positions, and let the verifier replay each
//! row equation on opened values after reconstructing the matrices from
//! the verified entry openings.
//!
//! Entry lists are padded to `m_hat` with the sentinel `(n_hat, 1, 0)`:
//! strictly lower, value zero, satisfaction-neutral.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::commit::{self, Commitment, Opening};
use crate::field::{interpolate, DlogTable, FieldElement, Polynomial, SubgroupDomain};
use crate::r1cs::{is_satisfied, Assignment, MatrixEntry, R1csInstance, SparseMatrix};

/// Desk-scale cap on the constraint count accepted by setup.
pub const MAX_CONSTRAINTS: u32 = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FcError {
    #[error("instance too large: n = {n}, cap = {cap}")]
    TooLarge { n: u32, cap: u32 },
    #[error("no subgroup of order {order} available in F_{modulus}")]
    DomainUnavailable { modulus: u64, order: u64 },
    #[error("matrix has {count} entries but the entry domain holds {capacity}")]
    EntryOverflow { count: usize, capacity: u64 },
    #[error("assignment does not satisfy the instance")]
    RefuseToProve,
    #[error("malformed proof bytes: {0}")]
    Encoding(String),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error(transparent)]
    Commit(#[from] crate::commit::CommitError),
    #[error(transparent)]
    R1cs(#[from] crate::r1cs::R1csError),
}

/// Public parameters shared by prover and verifier.
#[derive(Debug, Clone)]
pub struct PublicParams {
    modulus: u64,
    lambda: u32,
    /// Order `n_hat` domain whose generator encodes wire indices.
    wire_domain: SubgroupDomain,
    /// Order `m_hat` domain indexing nonzero-entry lists.
    entry_domain: SubgroupDomain,
}

impl PublicParams {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn wire_domain(&self) -> &SubgroupDomain {
        &self.wire_domain
    }

    pub fn entry_domain(&self) -> &SubgroupDomain {
        &self.entry_domain
    }

    /// Padded wire count `n_hat`.
    pub fn n_hat(&self) -> u64 {
        self.wire_domain.order()
    }

    /// Padded entry count `m_hat`.
    pub fn m_hat(&self) -> u64 {
        self.entry_domain.order()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(36);
        out.extend_from_slice(&self.modulus.to_be_bytes());
        out.extend_from_slice(&self.lambda.to_be_bytes());
        out.extend_from_slice(&(self.n_hat() as u32).to_be_bytes());
        out.extend_from_slice(&self.wire_domain.generator().to_bytes());
        out.extend_from_slice(&(self.m_hat() as u32).to_be_bytes());
        out.extend_from_slice(&self.entry_domain.generator().to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FcError> {
        if bytes.len() != 36 {
            return Err(FcError::Encoding("public params must be 36 bytes".into()));
        }
        let modulus = u64::from_be_bytes(bytes[..8].try_into().expect("8"));
        let lambda = u32::from_be_bytes(bytes[8..12].try_into().expect("4"));
        let n_hat = u32::from_be_bytes(bytes[12..16].try_into().expect("4")) as u64;
        let omega = u64::from_be_bytes(bytes[16..24].try_into().expect("8"));
        let m_hat = u32::from_be_bytes(bytes[24..28].try_into().expect("4")) as u64;
        let gamma = u64::from_be_bytes(bytes[28..36].try_into().expect("8"));
        Ok(Self {
            modulus,
            lambda,
            wire_domain: SubgroupDomain::from_generator(
                FieldElement::new(omega, modulus),
                n_hat,
            ),
            entry_domain: SubgroupDomain::from_generator(
                FieldElement::new(gamma, modulus),
                m_hat,
            ),
        })
    }
}

/// The row/col/val polynomial triple encoding one matrix.
#[derive(Debug, Clone)]
pub struct MatrixEncoding {
    pub row: Polynomial,
    pub col: Polynomial,
    pub val: Polynomial,
}

/// Merkle commitments to one matrix's three encoding polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixCommitment {
    pub row: Commitment,
    pub col: Commitment,
    pub val: Commitment,
}

impl MatrixCommitment {
    fn to_bytes(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(108);
        out.extend_from_slice(&self.row.to_bytes());
        out.extend_from_slice(&self.col.to_bytes());
        out.extend_from_slice(&self.val.to_bytes());
        out
    }
}

#[derive(Debug, Clone)]
pub struct ProvingKey {
    pp: PublicParams,
    instance: R1csInstance,
    a: MatrixEncoding,
    b: MatrixEncoding,
    c: MatrixEncoding,
}

impl ProvingKey {
    pub fn pp(&self) -> &PublicParams {
        &self.pp
    }

    pub fn instance(&self) -> &R1csInstance {
        &self.instance
    }

    pub fn encoding(&self, which: MatrixTag) -> &MatrixEncoding {
        match which {
            MatrixTag::A => &self.a,
            MatrixTag::B => &self.b,
            MatrixTag::C => &self.c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerificationKey {
    pp: PublicParams,
    a: MatrixCommitment,
    b: MatrixCommitment,
    c: MatrixCommitment,
    digest: [u8; 32],
}

impl VerificationKey {
    pub fn pp(&self) -> &PublicParams {
        &self.pp
    }

    pub fn commitment(&self, which: MatrixTag) -> &MatrixCommitment {
        match which {
            MatrixTag::A => &self.a,
            MatrixTag::B => &self.b,
            MatrixTag::C => &self.c,
        }
    }

    /// Hash of all nine commitments in fixed order.
    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.pp.to_bytes();
        out.extend_from_slice(&self.a.to_bytes());
        out.extend_from_slice(&self.b.to_bytes());
        out.extend_from_slice(&self.c.to_bytes());
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FcError> {
        if bytes.len() != 36 + 3 * 108 + 32 {
            return Err(FcError::Encoding("bad verification key length".into()));
        }
        let pp = PublicParams::from_bytes(&bytes[..36])?;
        let mut coms = Vec::with_capacity(9);
        for k in 0..9 {
            let start = 36 + k * 36;
            coms.push(Commitment::from_bytes(&bytes[start..start + 36])?);
        }
        let a = MatrixCommitment { row: coms[0], col: coms[1], val: coms[2] };
        let b = MatrixCommitment { row: coms[3], col: coms[4], val: coms[5] };
        let c = MatrixCommitment { row: coms[6], col: coms[7], val: coms[8] };
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&bytes[36 + 324..]);
        let rebuilt = commitment_digest(&a, &b, &c);
        if rebuilt != digest {
            return Err(FcError::Encoding("verification key digest mismatch".into()));
        }
        Ok(Self { pp, a, b, c, digest })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixTag {
    A,
    B,
    C,
}

impl std::fmt::Display for MatrixTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatrixTag::A => write!(f, "A"),
            MatrixTag::B => write!(f, "B"),
            MatrixTag::C => write!(f, "C"),
        }
    }
}

/// What a structure proof claims about its matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureClaim {
    StrictlyLower,
    Diagonal,
}

/// One opened entry: the row/col/val triple at one entry-domain index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryOpening {
    pub row: Opening,
    pub col: Opening,
    pub val: Opening,
}

/// Proof that a committed matrix has the claimed shape: all `m_hat` entry
/// triples opened against the matrix commitments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureProof {
    claim: StructureClaim,
    vk_digest: [u8; 32],
    openings: Vec<EntryOpening>,
}

impl StructureProof {
    pub fn claim(&self) -> StructureClaim {
        self.claim
    }

    pub fn vk_digest(&self) -> &[u8; 32] {
        &self.vk_digest
    }

    pub fn openings(&self) -> &[EntryOpening] {
        &self.openings
    }

    pub fn openings_mut(&mut self) -> &mut Vec<EntryOpening> {
        &mut self.openings
    }
}

/// Proof that the committed circuit accepts a concrete public input/output:
/// a commitment to the assignment polynomial over the wire domain, openings
/// of every touched position, the claimed publics, and the full entry
/// openings the verifier rebuilds the matrices from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionProof {
    vk_digest: [u8; 32],
    instance_digest: [u8; 32],
    z_commitment: Commitment,
    n: u32,
    num_inputs: u32,
    output_wire: u32,
    claimed_public: Vec<FieldElement>,
    z_openings: Vec<Opening>,
    a_openings: Vec<EntryOpening>,
    b_openings: Vec<EntryOpening>,
    c_openings: Vec<EntryOpening>,
}

impl ExecutionProof {
    pub fn vk_digest(&self) -> &[u8; 32] {
        &self.vk_digest
    }

    /// The circuit identity this proof claims to attest.
    pub fn instance_digest(&self) -> &[u8; 32] {
        &self.instance_digest
    }

    /// Claimed public values: the inputs in order, then the output.
    pub fn claimed_public(&self) -> &[FieldElement] {
        &self.claimed_public
    }

    pub fn claimed_public_mut(&mut self) -> &mut Vec<FieldElement> {
        &mut self.claimed_public
    }

    pub fn claimed_output(&self) -> Option<FieldElement> {
        self.claimed_public.last().copied()
    }
}

/// Why a verification rejected. The first failing (matrix, index,
/// condition) is reported.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Reject {
    #[error("{matrix}: proof bound to a different verification key")]
    KeyBinding { matrix: MatrixTag },
    #[error("{matrix}: claim kind does not match the matrix position")]
    ClaimKind { matrix: MatrixTag },
    #[error("{matrix}: expected {expected} entry openings, got {got}")]
    OpeningCount { matrix: MatrixTag, expected: u64, got: usize },
    #[error("{matrix}, entry {j}: opening index out of order")]
    OpeningIndex { matrix: MatrixTag, j: u64 },
    #[error("{matrix}, entry {j}: {which} opening fails against the commitment")]
    OpeningInvalid { matrix: MatrixTag, j: u64, which: &'static str },
    #[error("{matrix}, entry {j}: opened value is not a wire-domain power")]
    NotInSubgroup { matrix: MatrixTag, j: u64 },
    #[error("{matrix}, entry {j}: row {row} not strictly below column {col}")]
    NotStrictlyLower { matrix: MatrixTag, j: u64, row: u64, col: u64 },
    #[error("{matrix}, entry {j}: row {row} and column {col} differ off the diagonal")]
    NotDiagonal { matrix: MatrixTag, j: u64, row: u64, col: u64 },
    #[error("{matrix}, entry {j}: decoded entry ({row}, {col}) outside the instance")]
    EntryOutOfRange { matrix: MatrixTag, j: u64, row: u64, col: u64 },
    #[error("{matrix}: decoded entries collide at ({row}, {col})")]
    DuplicateEntry { matrix: MatrixTag, row: u64, col: u64 },
    #[error("execution proof bound to a different verification key")]
    ExecKeyBinding,
    #[error("claimed wire layout is inconsistent")]
    MetaInvalid,
    #[error("assignment commitment domain does not match the parameters")]
    WrongAssignmentDomain,
    #[error("reconstructed instance digest does not match the expected circuit")]
    InstanceDigest,
    #[error("claimed public values disagree with the expected publics")]
    PublicMismatch,
    #[error("opened assignment positions differ from the required set")]
    OpenedSetMismatch,
    #[error("assignment opening at position {position} fails against the commitment")]
    AssignmentOpening { position: u64 },
    #[error("constant wire does not open to 1")]
    ConstantWire,
    #[error("claimed public value at position {position} disagrees with the opened value")]
    PublicOpening { position: u64 },
    #[error("row {row} equation does not hold on the opened values")]
    RowEquation { row: u64 },
}

/// Verification outcome; rejections carry the first failing condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(Reject),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

fn next_pow2(v: u64) -> u64 {
    v.max(1).next_power_of_two()
}

/// The padded entry list: real entries first, then `(n_hat, 1, 0)`
/// sentinels up to `m_hat`.
fn padded_entries(
    matrix: &SparseMatrix,
    n_hat: u64,
    m_hat: u64,
    modulus: u64,
) -> Vec<(u64, u64, FieldElement)> {
    let mut out: Vec<(u64, u64, FieldElement)> = matrix
        .nonzero_entries()
        .iter()
        .map(|e| (e.row as u64, e.col as u64, e.value))
        .collect();
    while (out.len() as u64) < m_hat {
        out.push((n_hat, 1, FieldElement::zero(modulus)));
    }
    out
}

/// Encodes a matrix as the row/col/val polynomial triple over the entry
/// domain of `pp`.
pub fn encode_matrix(matrix: &SparseMatrix, pp: &PublicParams) -> Result<MatrixEncoding, FcError> {
    let m_hat = pp.m_hat();
    let count = matrix.nonzero_entries().len();
    if count as u64 > m_hat {
        return Err(FcError::EntryOverflow { count, capacity: m_hat });
    }
    let omega = pp.wire_domain.generator();
    let entries = padded_entries(matrix, pp.n_hat(), m_hat, pp.modulus);
    let rows: Vec<FieldElement> = entries.iter().map(|(r, _, _)| omega.pow(*r)).collect();
    let cols: Vec<FieldElement> = entries.iter().map(|(_, c, _)| omega.pow(*c)).collect();
    let vals: Vec<FieldElement> = entries.iter().map(|(_, _, v)| *v).collect();
    Ok(MatrixEncoding {
        row: interpolate(&pp.entry_domain, &rows)?,
        col: interpolate(&pp.entry_domain, &cols)?,
        val: interpolate(&pp.entry_domain, &vals)?,
    })
}

fn commitment_digest(
    a: &MatrixCommitment,
    b: &MatrixCommitment,
    c: &MatrixCommitment,
) -> [u8; 32] {
    let mut h = Sha256::new();
    for com in [a, b, c] {
        h.update(com.to_bytes());
    }
    h.finalize().into()
}

/// Commits all nine encoding polynomials and digests them into the
/// verification key.
pub fn commit_matrices(pk: &ProvingKey) -> VerificationKey {
    let dom = &pk.pp.entry_domain;
    let com = |enc: &MatrixEncoding| MatrixCommitment {
        row: commit::commit(&enc.row, dom).expect("encoding degree bounded by domain"),
        col: commit::commit(&enc.col, dom).expect("encoding degree bounded by domain"),
        val: commit::commit(&enc.val, dom).expect("encoding degree bounded by domain"),
    };
    let a = com(&pk.a);
    let b = com(&pk.b);
    let c = com(&pk.c);
    let digest = commitment_digest(&a, &b, &c);
    VerificationKey { pp: pk.pp.clone(), a, b, c, digest }
}

/// Derives parameters and keys for an instance. Deterministic for fixed
/// inputs: domain generators are the smallest of their order.
pub fn setup(
    lambda: u32,
    instance: &R1csInstance,
) -> Result<(PublicParams, ProvingKey, VerificationKey), FcError> {
    let n = instance.n();
    if n > MAX_CONSTRAINTS {
        return Err(FcError::TooLarge { n, cap: MAX_CONSTRAINTS });
    }
    let modulus = instance.modulus();
    let n_hat = next_pow2(n.max(2) as u64);
    let m_hat = next_pow2(instance.max_nonzero() as u64);
    let map_err = |order: u64| move |_| FcError::DomainUnavailable { modulus, order };
    let wire_domain = SubgroupDomain::new(modulus, n_hat).map_err(map_err(n_hat))?;
    let entry_domain = SubgroupDomain::new(modulus, m_hat).map_err(map_err(m_hat))?;
    let pp = PublicParams { modulus, lambda, wire_domain, entry_domain };
    let pk = ProvingKey {
        a: encode_matrix(instance.a(), &pp)?,
        b: encode_matrix(instance.b(), &pp)?,
        c: encode_matrix(instance.c(), &pp)?,
        pp: pp.clone(),
        instance: instance.clone(),
    };
    let vk = commit_matrices(&pk);
    Ok((pp, pk, vk))
}

fn open_entries(
    enc: &MatrixEncoding,
    dom: &SubgroupDomain,
) -> Result<Vec<EntryOpening>, FcError> {
    (1..=dom.order())
        .map(|j| {
            Ok(EntryOpening {
                row: commit::open(&enc.row, dom, j)?,
                col: commit::open(&enc.col, dom, j)?,
                val: commit::open(&enc.val, dom, j)?,
            })
        })
        .collect()
}

/// Produces the three structure proofs: strictly-lower claims for the
/// first two matrices, a diagonal claim for the third.
pub fn prove_structure(
    pk: &ProvingKey,
) -> Result<(StructureProof, StructureProof, StructureProof), FcError> {
    let vk = commit_matrices(pk);
    let dom = &pk.pp.entry_domain;
    let build = |enc: &MatrixEncoding, claim: StructureClaim| -> Result<StructureProof, FcError> {
        Ok(StructureProof { claim, vk_digest: vk.digest, openings: open_entries(enc, dom)? })
    };
    Ok((
        build(&pk.a, StructureClaim::StrictlyLower)?,
        build(&pk.b, StructureClaim::StrictlyLower)?,
        build(&pk.c, StructureClaim::Diagonal)?,
    ))
}

fn check_structure_proof(
    vk: &VerificationKey,
    matrix: MatrixTag,
    expected_claim: StructureClaim,
    proof: &StructureProof,
    dlog: &DlogTable,
) -> Result<(), Reject> {
    if &proof.vk_digest != vk.digest() {
        return Err(Reject::KeyBinding { matrix });
    }
    if proof.claim != expected_claim {
        return Err(Reject::ClaimKind { matrix });
    }
    let m_hat = vk.pp.m_hat();
    if proof.openings.len() as u64 != m_hat {
        return Err(Reject::OpeningCount {
            matrix,
            expected: m_hat,
            got: proof.openings.len(),
        });
    }
    let com = vk.commitment(matrix);
    for (k, entry) in proof.openings.iter().enumerate() {
        let j = k as u64 + 1;
        for (which, opening, against) in [
            ("row", &entry.row, &com.row),
            ("col", &entry.col, &com.col),
            ("val", &entry.val, &com.val),
        ] {
            if opening.index() as u64 != j {
                return Err(Reject::OpeningIndex { matrix, j });
            }
            if !commit::verify_opening(against, opening) {
                return Err(Reject::OpeningInvalid { matrix, j, which });
            }
        }
        // Zero-valued entries are padding; they carry no structure.
        if entry.val.value().is_zero() {
            continue;
        }
        let row = dlog
            .lookup(entry.row.value())
            .map_err(|_| Reject::NotInSubgroup { matrix, j })?;
        let col = dlog
            .lookup(entry.col.value())
            .map_err(|_| Reject::NotInSubgroup { matrix, j })?;
        match expected_claim {
            StructureClaim::StrictlyLower if row <= col => {
                return Err(Reject::NotStrictlyLower { matrix, j, row, col });
            }
            StructureClaim::Diagonal if row != col => {
                return Err(Reject::NotDiagonal { matrix, j, row, col });
            }
            _ => {}
        }
    }
    Ok(())
}

/// Checks the three structure proofs against a verification key: every
/// opening must verify and every decoded nonzero entry must satisfy its
/// matrix's shape claim.
pub fn verify_structure(
    vk: &VerificationKey,
    pi_a: &StructureProof,
    pi_b: &StructureProof,
    pi_c: &StructureProof,
) -> Verdict {
    let dlog = DlogTable::new(vk.pp.wire_domain.generator(), vk.pp.n_hat());
    let checks = [
        (MatrixTag::A, StructureClaim::StrictlyLower, pi_a),
        (MatrixTag::B, StructureClaim::StrictlyLower, pi_b),
        (MatrixTag::C, StructureClaim::Diagonal, pi_c),
    ];
    for (matrix, claim, proof) in checks {
        if let Err(reject) = check_structure_proof(vk, matrix, claim, proof, &dlog) {
            return Verdict::Reject(reject);
        }
    }
    Verdict::Accept
}

/// The assignment positions an execution proof must open: every column any
/// constraint row touches, plus the public positions.
fn required_positions(instance: &R1csInstance) -> Vec<u32> {
    let mut set: Vec<u32> = instance.public_positions();
    for m in [instance.a(), instance.b(), instance.c()] {
        for e in m.nonzero_entries() {
            set.push(e.col);
        }
    }
    set.sort_unstable();
    set.dedup();
    set
}

/// Proves that `z` satisfies the proving key's instance. Refuses to prove
/// unsatisfying assignments.
pub fn prove_execution(pk: &ProvingKey, z: &Assignment) -> Result<ExecutionProof, FcError> {
    if !is_satisfied(&pk.instance, z)? {
        return Err(FcError::RefuseToProve);
    }
    let pp = &pk.pp;
    let n_hat = pp.n_hat();
    let mut values: Vec<FieldElement> = z.values().to_vec();
    values.resize(n_hat as usize, FieldElement::zero(pp.modulus));
    let z_poly = interpolate(&pp.wire_domain, &values)?;
    let z_commitment = commit::commit(&z_poly, &pp.wire_domain)?;

    let positions = required_positions(&pk.instance);
    let z_openings = positions
        .iter()
        .map(|pos| commit::open(&z_poly, &pp.wire_domain, *pos as u64))
        .collect::<Result<Vec<_>, _>>()?;

    let instance = &pk.instance;
    let mut claimed_public: Vec<FieldElement> =
        (2..=instance.num_inputs() + 1).map(|p| z.get(p)).collect();
    claimed_public.push(z.get(instance.output_wire()));

    let vk = commit_matrices(pk);
    Ok(ExecutionProof {
        vk_digest: vk.digest,
        instance_digest: instance.digest(),
        z_commitment,
        n: instance.n(),
        num_inputs: instance.num_inputs(),
        output_wire: instance.output_wire(),
        claimed_public,
        z_openings,
        a_openings: open_entries(&pk.a, &pp.entry_domain)?,
        b_openings: open_entries(&pk.b, &pp.entry_domain)?,
        c_openings: open_entries(&pk.c, &pp.entry_domain)?,
    })
}

/// Rebuilds one sparse matrix from verified entry openings. Zero values are
/// padding and decode to no entry.
fn reconstruct_matrix(
    vk: &VerificationKey,
    matrix: MatrixTag,
    openings: &[EntryOpening],
    dlog: &DlogTable,
    n: u32,
) -> Result<SparseMatrix, Reject> {
    let m_hat = vk.pp.m_hat();
    if openings.len() as u64 != m_hat {
        return Err(Reject::OpeningCount { matrix, expected: m_hat, got: openings.len() });
    }
    let com = vk.commitment(matrix);
    let mut entries = Vec::new();
    for (k, entry) in openings.iter().enumerate() {
        let j = k as u64 + 1;
        for (which, opening, against) in [
            ("row", &entry.row, &com.row),
            ("col", &entry.col, &com.col),
            ("val", &entry.val, &com.val),
        ] {
            if opening.index() as u64 != j {
                return Err(Reject::OpeningIndex { matrix, j });
            }
            if !commit::verify_opening(against, opening) {
                return Err(Reject::OpeningInvalid { matrix, j, which });
            }
        }
        if entry.val.value().is_zero() {
            continue;
        }
        let row = dlog
            .lookup(entry.row.value())
            .map_err(|_| Reject::NotInSubgroup { matrix, j })?;
        let col = dlog
            .lookup(entry.col.value())
            .map_err(|_| Reject::NotInSubgroup { matrix, j })?;
        if row > n as u64 || col > n as u64 {
            return Err(Reject::EntryOutOfRange { matrix, j, row, col });
        }
        entries.push(MatrixEntry {
            row: row as u32,
            col: col as u32,
            value: entry.val.value(),
        });
    }
    SparseMatrix::new(n, entries).map_err(|_| {
        // The only constructor failure left after range checks is a clash.
        Reject::DuplicateEntry { matrix, row: 0, col: 0 }
    })
}

/// Verifies an execution proof against a verification key and an expected
/// circuit digest. The matrices are reconstructed from the proof's entry
/// openings (bound by the key's commitments), the reconstruction is hashed
/// and compared with `instance_digest`, and every constraint row is
/// replayed on the opened assignment values.
pub fn verify_execution(
    vk: &VerificationKey,
    instance_digest: &[u8; 32],
    proof: &ExecutionProof,
    public: &[FieldElement],
) -> Verdict {
    match verify_execution_inner(vk, instance_digest, proof, public) {
        Ok(()) => Verdict::Accept,
        Err(reject) => Verdict::Reject(reject),
    }
}

fn verify_execution_inner(
    vk: &VerificationKey,
    instance_digest: &[u8; 32],
    proof: &ExecutionProof,
    public: &[FieldElement],
) -> Result<(), Reject> {
    if &proof.vk_digest != vk.digest() {
        return Err(Reject::ExecKeyBinding);
    }
    let pp = &vk.pp;
    let n = proof.n;
    if n as u64 > pp.n_hat()
        || n < 1
        || proof.num_inputs + 1 > n
        || proof.output_wire < 1
        || proof.output_wire > n
    {
        return Err(Reject::MetaInvalid);
    }
    if proof.z_commitment.domain_order() as u64 != pp.n_hat() {
        return Err(Reject::WrongAssignmentDomain);
    }

    let dlog = DlogTable::new(pp.wire_domain.generator(), pp.n_hat());
    let a = reconstruct_matrix(vk, MatrixTag::A, &proof.a_openings, &dlog, n)?;
    let b = reconstruct_matrix(vk, MatrixTag::B, &proof.b_openings, &dlog, n)?;
    let c = reconstruct_matrix(vk, MatrixTag::C, &proof.c_openings, &dlog, n)?;
    let instance = R1csInstance::new(
        pp.modulus,
        n,
        proof.num_inputs,
        proof.output_wire,
        a,
        b,
        c,
    )
    .map_err(|_| Reject::MetaInvalid)?;

    let rebuilt = instance.digest();
    if &rebuilt != instance_digest || rebuilt != proof.instance_digest {
        return Err(Reject::InstanceDigest);
    }

    // Publics: the inputs in order, then the output.
    if proof.claimed_public.len() != instance.num_public() as usize
        || proof.claimed_public != public
    {
        return Err(Reject::PublicMismatch);
    }

    let required = required_positions(&instance);
    let opened: Vec<u32> = proof.z_openings.iter().map(|o| o.index()).collect();
    if opened != required {
        return Err(Reject::OpenedSetMismatch);
    }
    let mut values = std::collections::BTreeMap::new();
    for opening in &proof.z_openings {
        if !commit::verify_opening(&proof.z_commitment, opening) {
            return Err(Reject::AssignmentOpening { position: opening.index() as u64 });
        }
        values.insert(opening.index(), opening.value());
    }

    if values.get(&1).map(|v| v.value()) != Some(1) {
        return Err(Reject::ConstantWire);
    }
    let mut public_positions: Vec<u32> = (2..=proof.num_inputs + 1).collect();
    public_positions.push(proof.output_wire);
    for (claimed, position) in proof.claimed_public.iter().zip(public_positions) {
        if values.get(&position) != Some(claimed) {
            return Err(Reject::PublicOpening { position: position as u64 });
        }
    }

    let zero = FieldElement::zero(pp.modulus);
    for row in 1..=n {
        let dot = |m: &SparseMatrix| {
            m.row(row).fold(zero, |acc, e| {
                acc.add(e.value.mul(values[&e.col]))
            })
        };
        let lhs = dot(instance.a()).mul(dot(instance.b()));
        if lhs != dot(instance.c()) {
            return Err(Reject::RowEquation { row: row as u64 });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Wire formats. Every byte is load-bearing; parsers consume exactly.

const KIND_SLT: u8 = 0x01;
const KIND_DIAG: u8 = 0x02;
const KIND_EXEC: u8 = 0x03;

fn put_openings(out: &mut Vec<u8>, entries: &[EntryOpening]) {
    for e in entries {
        out.extend_from_slice(&e.row.to_bytes());
        out.extend_from_slice(&e.col.to_bytes());
        out.extend_from_slice(&e.val.to_bytes());
    }
}

fn take_u32(bytes: &mut &[u8]) -> Result<u32, FcError> {
    if bytes.len() < 4 {
        return Err(FcError::Encoding("truncated integer".into()));
    }
    let v = u32::from_be_bytes(bytes[..4].try_into().expect("4"));
    *bytes = &bytes[4..];
    Ok(v)
}

fn take_digest(bytes: &mut &[u8]) -> Result<[u8; 32], FcError> {
    if bytes.len() < 32 {
        return Err(FcError::Encoding("truncated digest".into()));
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&bytes[..32]);
    *bytes = &bytes[32..];
    Ok(out)
}

fn take_opening(bytes: &mut &[u8], modulus: u64) -> Result<Opening, FcError> {
    let (opening, rest) = Opening::read_from(bytes, modulus)
        .map_err(|e| FcError::Encoding(e.to_string()))?;
    *bytes = rest;
    Ok(opening)
}

fn take_entry_openings(
    bytes: &mut &[u8],
    count: u64,
    modulus: u64,
) -> Result<Vec<EntryOpening>, FcError> {
    (0..count)
        .map(|_| {
            Ok(EntryOpening {
                row: take_opening(bytes, modulus)?,
                col: take_opening(bytes, modulus)?,
                val: take_opening(bytes, modulus)?,
            })
        })
        .collect()
}

impl StructureProof {
    /// Wire format: kind tag, verification-key digest, opening count, then
    /// the concatenated row/col/val opening triples.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(match self.claim {
            StructureClaim::StrictlyLower => KIND_SLT,
            StructureClaim::Diagonal => KIND_DIAG,
        });
        out.extend_from_slice(&self.vk_digest);
        out.extend_from_slice(&(self.openings.len() as u32).to_be_bytes());
        put_openings(&mut out, &self.openings);
        out
    }

    pub fn from_bytes(bytes: &[u8], modulus: u64) -> Result<Self, FcError> {
        let mut rest = bytes;
        let proof = Self::read_from(&mut rest, modulus)?;
        if !rest.is_empty() {
            return Err(FcError::Encoding("trailing bytes after structure proof".into()));
        }
        Ok(proof)
    }

    fn read_from(bytes: &mut &[u8], modulus: u64) -> Result<Self, FcError> {
        let kind = *bytes
            .first()
            .ok_or_else(|| FcError::Encoding("empty proof".into()))?;
        *bytes = &bytes[1..];
        let claim = match kind {
            KIND_SLT => StructureClaim::StrictlyLower,
            KIND_DIAG => StructureClaim::Diagonal,
            other => return Err(FcError::Encoding(format!("unknown proof kind {other:#x}"))),
        };
        let vk_digest = take_digest(bytes)?;
        let count = take_u32(bytes)? as u64;
        let openings = take_entry_openings(bytes, count, modulus)?
            .into_iter()
            .collect();
        Ok(Self { claim, vk_digest, openings })
    }
}

impl ExecutionProof {
    /// Wire format: kind tag, key digest, instance digest, assignment
    /// commitment, wire layout, claimed publics, assignment openings, and
    /// the three entry-opening lists.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![KIND_EXEC];
        out.extend_from_slice(&self.vk_digest);
        out.extend_from_slice(&self.instance_digest);
        out.extend_from_slice(&self.z_commitment.to_bytes());
        out.extend_from_slice(&self.n.to_be_bytes());
        out.extend_from_slice(&self.num_inputs.to_be_bytes());
        out.extend_from_slice(&self.output_wire.to_be_bytes());
        out.extend_from_slice(&(self.claimed_public.len() as u32).to_be_bytes());
        for v in &self.claimed_public {
            out.extend_from_slice(&v.to_bytes());
        }
        out.extend_from_slice(&(self.z_openings.len() as u32).to_be_bytes());
        for o in &self.z_openings {
            out.extend_from_slice(&o.to_bytes());
        }
        out.extend_from_slice(&(self.a_openings.len() as u32).to_be_bytes());
        put_openings(&mut out, &self.a_openings);
        put_openings(&mut out, &self.b_openings);
        put_openings(&mut out, &self.c_openings);
        out
    }

    pub fn from_bytes(bytes: &[u8], modulus: u64) -> Result<Self, FcError> {
        let mut rest = bytes;
        let proof = Self::read_from(&mut rest, modulus)?;
        if !rest.is_empty() {
            return Err(FcError::Encoding("trailing bytes after execution proof".into()));
        }
        Ok(proof)
    }

    fn read_from(bytes: &mut &[u8], modulus: u64) -> Result<Self, FcError> {
        match bytes.first() {
            Some(&KIND_EXEC) => *bytes = &bytes[1..],
            Some(other) => {
                return Err(FcError::Encoding(format!("unknown proof kind {other:#x}")))
            }
            None => return Err(FcError::Encoding("empty proof".into())),
        }
        let vk_digest = take_digest(bytes)?;
        let instance_digest = take_digest(bytes)?;
        if bytes.len() < 36 {
            return Err(FcError::Encoding("truncated commitment".into()));
        }
        let z_commitment = Commitment::from_bytes(&bytes[..36])
            .map_err(|e| FcError::Encoding(e.to_string()))?;
        *bytes = &bytes[36..];
        let n = take_u32(bytes)?;
        let num_inputs = take_u32(bytes)?;
        let output_wire = take_u32(bytes)?;
        let public_count = take_u32(bytes)?;
        let mut claimed_public = Vec::with_capacity(public_count as usize);
        for _ in 0..public_count {
            if bytes.len() < 8 {
                return Err(FcError::Encoding("truncated public value".into()));
            }
            let v = u64::from_be_bytes(bytes[..8].try_into().expect("8"));
            if v >= modulus {
                return Err(FcError::Encoding("public value out of field".into()));
            }
            claimed_public.push(FieldElement::new(v, modulus));
            *bytes = &bytes[8..];
        }
        let z_count = take_u32(bytes)?;
        let mut z_openings = Vec::with_capacity(z_count as usize);
        for _ in 0..z_count {
            z_openings.push(take_opening(bytes, modulus)?);
        }
        let entry_count = take_u32(bytes)? as u64;
        let a_openings = take_entry_openings(bytes, entry_count, modulus)?;
        let b_openings = take_entry_openings(bytes, entry_count, modulus)?;
        let c_openings = take_entry_openings(bytes, entry_count, modulus)?;
        Ok(Self {
            vk_digest,
            instance_digest,
            z_commitment,
            n,
            num_inputs,
            output_wire,
            claimed_public,
            z_openings,
            a_openings,
            b_openings,
            c_openings,
        })
    }
}

/// The four proofs a device ships with each output: three structure proofs
/// and one execution proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofBundle {
    pub pi_a: StructureProof,
    pub pi_b: StructureProof,
    pub pi_c: StructureProof,
    pub execution: ExecutionProof,
}

impl ProofBundle {
    /// Length-prefixed concatenation of the four proofs' wire bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for part in [
            self.pi_a.to_bytes(),
            self.pi_b.to_bytes(),
            self.pi_c.to_bytes(),
            self.execution.to_bytes(),
        ] {
            out.extend_from_slice(&(part.len() as u32).to_be_bytes());
            out.extend_from_slice(&part);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], modulus: u64) -> Result<Self, FcError> {
        let mut rest = bytes;
        let mut sections: Vec<&[u8]> = Vec::with_capacity(4);
        for _ in 0..4 {
            let len = take_u32(&mut rest)? as usize;
            if rest.len() < len {
                return Err(FcError::Encoding("truncated bundle section".into()));
            }
            sections.push(&rest[..len]);
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(FcError::Encoding("trailing bytes after proof bundle".into()));
        }
        Ok(Self {
            pi_a: StructureProof::from_bytes(sections[0], modulus)?,
            pi_b: StructureProof::from_bytes(sections[1], modulus)?,
            pi_c: StructureProof::from_bytes(sections[2], modulus)?,
            execution: ExecutionProof::from_bytes(sections[3], modulus)?,
        })
    }

    /// Digest over the whole canonical byte string.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.to_bytes());
        h.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::r1cs::{build_program, GateProgram};

    const P: u64 = 17;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v, P)
    }

    fn square_setup() -> (PublicParams, ProvingKey, VerificationKey) {
        let prog = GateProgram::parse("inputs 1\nw2 = mul w1 w1\noutput w2").unwrap();
        let compiled = build_program(&prog, P).unwrap();
        setup(128, compiled.instance()).unwrap()
    }

    fn square_assignment(x: u64) -> Assignment {
        Assignment::new(vec![fe(1), fe(x), fe(x).mul(fe(x))]).unwrap()
    }

    fn single_entry_instance(
        which: MatrixTag,
        row: u32,
        col: u32,
        value: u64,
    ) -> R1csInstance {
        let m = SparseMatrix::new(4, vec![MatrixEntry { row, col, value: fe(value) }]).unwrap();
        let empty = SparseMatrix::empty(4);
        let (a, b, c) = match which {
            MatrixTag::A => (m, empty.clone(), empty),
            MatrixTag::B => (empty.clone(), m, empty),
            MatrixTag::C => (empty.clone(), empty.clone(), m),
        };
        R1csInstance::new(P, 4, 0, 1, a, b, c).unwrap()
    }

    #[test]
    fn setup_pads_square_instance() {
        let (pp, pk, _) = square_setup();
        assert_eq!(pp.n_hat(), 4);
        assert_eq!(pp.m_hat(), 1);
        assert_eq!(pp.wire_domain().generator().value(), 4);
        assert_eq!(pp.entry_domain().generator().value(), 1);
        assert_eq!(pk.instance().n(), 3);
        assert_eq!(pp.lambda(), 128);
    }

    #[test]
    fn setup_next_pow2_entries() {
        let m = SparseMatrix::new(
            4,
            vec![
                MatrixEntry { row: 2, col: 1, value: fe(1) },
                MatrixEntry { row: 3, col: 1, value: fe(1) },
                MatrixEntry { row: 4, col: 1, value: fe(1) },
            ],
        )
        .unwrap();
        let inst = R1csInstance::new(
            P,
            4,
            0,
            1,
            m,
            SparseMatrix::empty(4),
            SparseMatrix::empty(4),
        )
        .unwrap();
        let (pp, _, _) = setup(128, &inst).unwrap();
        assert_eq!(pp.m_hat(), 4);
    }

    #[test]
    fn setup_rejects_oversized() {
        let n = MAX_CONSTRAINTS + 1;
        let inst = R1csInstance::new(
            crate::field::DEFAULT_MODULUS,
            n,
            0,
            1,
            SparseMatrix::empty(n),
            SparseMatrix::empty(n),
            SparseMatrix::empty(n),
        )
        .unwrap();
        assert_eq!(
            setup(128, &inst).unwrap_err(),
            FcError::TooLarge { n, cap: MAX_CONSTRAINTS }
        );
    }

    #[test]
    fn setup_domain_unavailable() {
        // F_17 has no subgroup of order 32.
        let n = 17;
        let inst = R1csInstance::new(
            P,
            n,
            0,
            1,
            SparseMatrix::empty(n),
            SparseMatrix::empty(n),
            SparseMatrix::empty(n),
        )
        .unwrap();
        assert_eq!(
            setup(128, &inst).unwrap_err(),
            FcError::DomainUnavailable { modulus: P, order: 32 }
        );
    }

    #[test]
    fn encode_matrix_example() {
        // With omega = 2 (order 8) and one entry (3, 2, 1): row = 2^3 = 8,
        // col = 2^2 = 4, val = 1, all constant over the order-1 entry domain.
        let pp = PublicParams {
            modulus: P,
            lambda: 128,
            wire_domain: SubgroupDomain::new(P, 8).unwrap(),
            entry_domain: SubgroupDomain::new(P, 1).unwrap(),
        };
        let m = SparseMatrix::new(4, vec![MatrixEntry { row: 3, col: 2, value: fe(1) }]).unwrap();
        let enc = encode_matrix(&m, &pp).unwrap();
        assert_eq!(enc.row, Polynomial::constant(fe(8)));
        assert_eq!(enc.col, Polynomial::constant(fe(4)));
        assert_eq!(enc.val, Polynomial::constant(fe(1)));
    }

    #[test]
    fn encode_empty_matrix_is_sentinel() {
        // Sentinel (n_hat, 1, 0): row = omega^n_hat = 1, col = omega, val = 0.
        let pp = PublicParams {
            modulus: P,
            lambda: 128,
            wire_domain: SubgroupDomain::new(P, 8).unwrap(),
            entry_domain: SubgroupDomain::new(P, 1).unwrap(),
        };
        let enc = encode_matrix(&SparseMatrix::empty(4), &pp).unwrap();
        assert_eq!(enc.row, Polynomial::constant(fe(1)));
        assert_eq!(enc.col, Polynomial::constant(fe(2)));
        assert_eq!(enc.val, Polynomial::zero());
    }

    #[test]
    fn encode_diagonal_rows_equal_cols() {
        let pp = PublicParams {
            modulus: P,
            lambda: 128,
            wire_domain: SubgroupDomain::new(P, 8).unwrap(),
            entry_domain: SubgroupDomain::new(P, 1).unwrap(),
        };
        let m = SparseMatrix::new(4, vec![MatrixEntry { row: 3, col: 3, value: fe(1) }]).unwrap();
        let enc = encode_matrix(&m, &pp).unwrap();
        assert_eq!(enc.row, enc.col);
        assert_eq!(enc.row, Polynomial::constant(fe(8)));
    }

    #[test]
    fn commit_matrices_deterministic() {
        let (_, pk, vk) = square_setup();
        assert_eq!(commit_matrices(&pk).digest(), vk.digest());
        let again = setup(128, pk.instance()).unwrap().2;
        assert_eq!(again.digest(), vk.digest());
    }

    #[test]
    fn different_value_changes_digest() {
        let one = single_entry_instance(MatrixTag::A, 3, 2, 1);
        let two = single_entry_instance(MatrixTag::A, 3, 2, 2);
        let vk1 = setup(128, &one).unwrap().2;
        let vk2 = setup(128, &two).unwrap().2;
        assert_ne!(vk1.digest(), vk2.digest());
    }

    #[test]
    fn structure_round_trip_square() {
        let (pp, pk, vk) = square_setup();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        // omega = 4 of order 4: entry (3,2) opens to (4^3, 4^2) = (13, 16).
        assert_eq!(pp.wire_domain().generator().value(), 4);
        assert_eq!(pi_a.openings()[0].row.value(), fe(13));
        assert_eq!(pi_a.openings()[0].col.value(), fe(16));
        assert_eq!(pi_a.openings()[0].val.value(), fe(1));
        // C entry (3,3) opens to equal dlogs.
        assert_eq!(pi_c.openings()[0].row.value(), pi_c.openings()[0].col.value());
        assert_eq!(verify_structure(&vk, &pi_a, &pi_b, &pi_c), Verdict::Accept);
    }

    #[test]
    fn empty_matrix_proof_is_sentinel_pair() {
        // All-empty B in the single-entry instance: its one opening is the
        // padding sentinel (omega^n_hat, omega^1) = (1, omega), exempt via
        // val = 0.
        let inst = single_entry_instance(MatrixTag::A, 3, 2, 1);
        let (pp, pk, vk) = setup(128, &inst).unwrap();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        let omega = pp.wire_domain().generator();
        assert_eq!(pi_b.openings()[0].row.value().value(), 1);
        assert_eq!(pi_b.openings()[0].col.value(), omega);
        assert!(pi_b.openings()[0].val.value().is_zero());
        assert_eq!(verify_structure(&vk, &pi_a, &pi_b, &pi_c), Verdict::Accept);
    }

    #[test]
    fn structure_rejects_upper_entry() {
        let inst = single_entry_instance(MatrixTag::A, 2, 3, 1);
        let (_, pk, vk) = setup(128, &inst).unwrap();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        assert_eq!(
            verify_structure(&vk, &pi_a, &pi_b, &pi_c),
            Verdict::Reject(Reject::NotStrictlyLower {
                matrix: MatrixTag::A,
                j: 1,
                row: 2,
                col: 3
            })
        );
    }

    #[test]
    fn structure_rejects_off_diagonal_c() {
        let inst = single_entry_instance(MatrixTag::C, 3, 2, 1);
        let (_, pk, vk) = setup(128, &inst).unwrap();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        assert_eq!(
            verify_structure(&vk, &pi_a, &pi_b, &pi_c),
            Verdict::Reject(Reject::NotDiagonal {
                matrix: MatrixTag::C,
                j: 1,
                row: 3,
                col: 2
            })
        );
    }

    #[test]
    fn structure_rejects_foreign_key() {
        let (_, pk, _) = square_setup();
        let other = setup(128, &single_entry_instance(MatrixTag::A, 3, 2, 5)).unwrap().2;
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        assert_eq!(
            verify_structure(&other, &pi_a, &pi_b, &pi_c),
            Verdict::Reject(Reject::KeyBinding { matrix: MatrixTag::A })
        );
    }

    #[test]
    fn execution_round_trip() {
        let (_, pk, vk) = square_setup();
        let proof = prove_execution(&pk, &square_assignment(3)).unwrap();
        // openings at the columns the rows touch plus the publics: {1,2,3}
        let opened: Vec<u32> = proof.z_openings.iter().map(|o| o.index()).collect();
        assert_eq!(opened, vec![1, 2, 3]);
        let verdict = verify_execution(
            &vk,
            &pk.instance().digest(),
            &proof,
            &[fe(3), fe(9)],
        );
        assert_eq!(verdict, Verdict::Accept);
    }

    #[test]
    fn execution_refuses_unsatisfied() {
        let (_, pk, _) = square_setup();
        let bad = Assignment::new(vec![fe(1), fe(3), fe(10)]).unwrap();
        assert_eq!(prove_execution(&pk, &bad).unwrap_err(), FcError::RefuseToProve);
    }

    #[test]
    fn execution_rejects_wrong_public() {
        let (_, pk, vk) = square_setup();
        let proof = prove_execution(&pk, &square_assignment(3)).unwrap();
        let verdict = verify_execution(
            &vk,
            &pk.instance().digest(),
            &proof,
            &[fe(3), fe(10)],
        );
        assert_eq!(verdict, Verdict::Reject(Reject::PublicMismatch));
    }

    #[test]
    fn execution_rejects_forged_claim() {
        let (_, pk, vk) = square_setup();
        let mut proof = prove_execution(&pk, &square_assignment(3)).unwrap();
        proof.claimed_public_mut()[1] = fe(10);
        let verdict = verify_execution(
            &vk,
            &pk.instance().digest(),
            &proof,
            &[fe(3), fe(10)],
        );
        assert_eq!(verdict, Verdict::Reject(Reject::PublicOpening { position: 3 }));
    }

    #[test]
    fn execution_rejects_tampered_opening() {
        let (_, pk, vk) = square_setup();
        let mut proof = prove_execution(&pk, &square_assignment(3)).unwrap();
        let honest = &proof.z_openings[1];
        proof.z_openings[1] = Opening::from_parts(
            honest.index(),
            honest.value().add(fe(1)),
            honest.path().to_vec(),
        );
        let verdict = verify_execution(
            &vk,
            &pk.instance().digest(),
            &proof,
            &[fe(3), fe(9)],
        );
        assert_eq!(
            verdict,
            Verdict::Reject(Reject::AssignmentOpening { position: 2 })
        );
    }

    #[test]
    fn execution_empty_instance_opens_publics_only() {
        let prog = GateProgram::parse("inputs 1\noutput w1").unwrap();
        let compiled = build_program(&prog, P).unwrap();
        let (_, pk, vk) = setup(128, compiled.instance()).unwrap();
        let (_, z) = compiled.assignment(&[fe(7)]).unwrap();
        let proof = prove_execution(&pk, &z).unwrap();
        let opened: Vec<u32> = proof.z_openings.iter().map(|o| o.index()).collect();
        assert_eq!(opened, vec![1, 2]);
        let verdict = verify_execution(
            &vk,
            &pk.instance().digest(),
            &proof,
            &[fe(7), fe(7)],
        );
        assert_eq!(verdict, Verdict::Accept);
    }

    #[test]
    fn execution_rejects_wrong_instance_digest() {
        let (_, pk, vk) = square_setup();
        let proof = prove_execution(&pk, &square_assignment(3)).unwrap();
        let mut wrong = pk.instance().digest();
        wrong[0] ^= 1;
        let verdict = verify_execution(&vk, &wrong, &proof, &[fe(3), fe(9)]);
        assert_eq!(verdict, Verdict::Reject(Reject::InstanceDigest));
    }

    #[test]
    fn proof_bundle_round_trip() {
        let (_, pk, _) = square_setup();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        let execution = prove_execution(&pk, &square_assignment(5)).unwrap();
        let bundle = ProofBundle { pi_a, pi_b, pi_c, execution };
        let bytes = bundle.to_bytes();
        let back = ProofBundle::from_bytes(&bytes, P).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(back.digest(), bundle.digest());
    }

    #[test]
    fn keys_serialize_round_trip() {
        let (pp, _, vk) = square_setup();
        let pp_back = PublicParams::from_bytes(&pp.to_bytes()).unwrap();
        assert_eq!(pp_back.n_hat(), pp.n_hat());
        assert_eq!(pp_back.m_hat(), pp.m_hat());
        assert_eq!(
            pp_back.wire_domain().generator(),
            pp.wire_domain().generator()
        );
        let vk_back = VerificationKey::from_bytes(&vk.to_bytes()).unwrap();
        assert_eq!(vk_back.digest(), vk.digest());
        assert_eq!(vk_back.commitment(MatrixTag::B), vk.commitment(MatrixTag::B));
    }
}
