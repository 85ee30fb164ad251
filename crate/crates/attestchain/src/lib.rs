//! Verifiable firmware-execution attestation for simulated IoT device
//! networks.
//!
//! The crate builds up, layer by layer:
//!
//! - [`field`] — prime-field arithmetic, subgroup domains, interpolation.
//! - [`r1cs`] — sparse constraint systems in a triangular normal form and a
//!   gate-program compiler for straight-line firmware arithmetic.
//! - [`commit`] — transparent Merkle commitments to polynomial evaluations.
//! - [`fc`] — the functional-commitment scheme: keys, matrix encodings,
//!   structure proofs, and execution proofs.
//! - [`chain`] — multi-device proof chains linking each step's output into
//!   the next step's input.
//! - [`device`] — simulated devices that execute firmware and emit
//!   attestation bundles.
//! - [`contract`] — declarative service contracts: proof checks, compliance,
//!   guards, and field forwarding.
//! - [`ledger`] — a simulated blockchain node with replicated hot storage,
//!   node-local cold storage, and a token escrow.
//! - [`protocol`] — the 11-step escrowed data-exchange protocol as an
//!   explicit state machine, a deterministic event loop, and an exhaustive
//!   state-space explorer.
//! - [`scenario`] — scenario files that wire devices, contracts, nodes, and
//!   sessions into reproducible end-to-end runs.
//! - [`cli`] — the `attestchain` command-line front end.
//!
//! Every major capability has a runnable example under `examples/`; start
//! with `field_arithmetic` and work down the list in the README.

pub mod chain;
pub mod cli;
pub mod commit;
pub mod contract;
pub mod device;
pub mod fc;
pub mod field;
pub mod ledger;
pub mod protocol;
pub mod r1cs;
pub mod scenario;

pub use chain::{ChainProof, ChainStep};
pub use commit::{Commitment, Opening};
pub use contract::{ComplianceRegistry, ContractSpec, Decision};
pub use device::{DataBundle, Device, SensorReading};
pub use fc::{ExecutionProof, ProvingKey, PublicParams, StructureProof, VerificationKey};
pub use field::{FieldElement, Polynomial, SubgroupDomain};
pub use ledger::{EscrowAccount, Ledger};
pub use protocol::{ProtocolMessage, Session, SessionState};
pub use r1cs::{Assignment, GateProgram, R1csInstance, SparseMatrix};
