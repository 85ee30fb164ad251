//! Declarative service contracts: the interaction logic between devices.
//!
//! Evaluation is a fixed pipeline — proof verification first, then device
//! compliance, then the guards in declaration order, and only then the
//! forward of the mapped fields to the next hop. A bundle whose proofs
//! fail never reaches a guard, and forwarded values are byte-identical
//! copies of the bundle's metadata fields.

use std::collections::{BTreeMap, BTreeSet};

use crate::device::{metadata_field, DataBundle};
use crate::fc::{verify_execution, verify_structure, Verdict, VerificationKey};

/// Inclusive bounding box in micro-degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeoBox {
    pub lat_min: i64,
    pub lat_max: i64,
    pub lon_min: i64,
    pub lon_max: i64,
}

impl GeoBox {
    pub fn contains(&self, lat: i64, lon: i64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardPredicate {
    /// The metadata field must equal the constant byte for byte.
    Equals,
    /// The metadata field is a "lat,lon" pair that must fall inside the
    /// named geo-table box.
    InBbox,
}

/// One conjunctive guard. `name` is what a rejection reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub name: String,
    pub field: String,
    pub predicate: GuardPredicate,
    pub value: String,
}

/// The declarative contract: required device type, guards, forward map,
/// and the geo table backing `in-bbox` guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractSpec {
    pub id: String,
    pub required_device_type: String,
    pub guards: Vec<Guard>,
    /// `(bundle metadata field, output field)` pairs, forwarded verbatim.
    pub forward: Vec<(String, String)>,
    pub next_hop: String,
    /// City name -> box, searched in declaration order.
    pub geo: Vec<(String, GeoBox)>,
}

/// Which verification keys are authorized per device type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComplianceRegistry {
    authorized: BTreeMap<String, BTreeSet<[u8; 32]>>,
}

impl ComplianceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn authorize(&mut self, device_type: impl Into<String>, vk_digest: [u8; 32]) {
        self.authorized.entry(device_type.into()).or_default().insert(vk_digest);
    }

    pub fn is_authorized(&self, device_type: &str, vk_digest: &[u8; 32]) -> bool {
        self.authorized.get(device_type).is_some_and(|set| set.contains(vk_digest))
    }

    pub fn knows_type(&self, device_type: &str) -> bool {
        self.authorized.contains_key(device_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComplianceFailure {
    UnknownType(String),
    UnregisteredKey,
    TypeMismatch { claimed: String, metadata: String },
    BindingMismatch,
}

impl std::fmt::Display for ComplianceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ComplianceFailure::UnknownType(t) => write!(f, "unknown-type:{t}"),
            ComplianceFailure::UnregisteredKey => write!(f, "unregistered"),
            ComplianceFailure::TypeMismatch { claimed, metadata } => {
                write!(f, "type-mismatch:{metadata}!={claimed}")
            }
            ComplianceFailure::BindingMismatch => write!(f, "metadata-binding"),
        }
    }
}

/// Why the contract refused a bundle. Ordering matters: a proof failure is
/// reported even when every guard would also have failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Proof(String),
    Compliance(ComplianceFailure),
    Guard(String),
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::Proof(detail) => write!(f, "proof:{detail}"),
            RejectReason::Compliance(c) => write!(f, "compliance:{c}"),
            RejectReason::Guard(name) => write!(f, "guard:{name}"),
        }
    }
}

/// The contract's decision for one bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Forward { outputs: Vec<(String, String)>, next_hop: String },
    Reject(RejectReason),
}

impl Decision {
    pub fn is_forward(&self) -> bool {
        matches!(self, Decision::Forward { .. })
    }
}

/// Checks that the bundle's key is authorized for the claimed type, that
/// the bundle's own metadata agrees, and that the metadata hash matches
/// the proof-bound public input.
pub fn compliance_check(
    registry: &ComplianceRegistry,
    bundle: &DataBundle,
    claimed_type: &str,
) -> Result<(), ComplianceFailure> {
    if !registry.knows_type(claimed_type) {
        return Err(ComplianceFailure::UnknownType(claimed_type.to_string()));
    }
    if !registry.is_authorized(claimed_type, &bundle.vk_digest) {
        return Err(ComplianceFailure::UnregisteredKey);
    }
    let metadata_type = bundle.metadata.get("device_type").cloned().unwrap_or_default();
    if metadata_type != claimed_type {
        return Err(ComplianceFailure::TypeMismatch {
            claimed: claimed_type.to_string(),
            metadata: metadata_type,
        });
    }
    let modulus = bundle.output.modulus();
    let bound = bundle.inputs.last().copied();
    if bound != Some(metadata_field(&bundle.metadata, modulus)) {
        return Err(ComplianceFailure::BindingMismatch);
    }
    Ok(())
}

/// First declared box containing the point, bounds inclusive.
pub fn city_lookup<'a>(geo: &'a [(String, GeoBox)], lat: i64, lon: i64) -> Option<&'a str> {
    geo.iter().find(|(_, b)| b.contains(lat, lon)).map(|(name, _)| name.as_str())
}

fn parse_lat_lon(text: &str) -> Option<(i64, i64)> {
    let (lat, lon) = text.split_once(',')?;
    Some((lat.trim().parse().ok()?, lon.trim().parse().ok()?))
}

fn check_guard(spec: &ContractSpec, guard: &Guard, bundle: &DataBundle) -> bool {
    let Some(actual) = bundle.metadata.get(&guard.field) else {
        return false;
    };
    match guard.predicate {
        GuardPredicate::Equals => actual == &guard.value,
        GuardPredicate::InBbox => match parse_lat_lon(actual) {
            Some((lat, lon)) => city_lookup(&spec.geo, lat, lon) == Some(guard.value.as_str()),
            None => false,
        },
    }
}

/// The full pipeline: proofs, compliance, guards, forward.
pub fn evaluate_contract(
    spec: &ContractSpec,
    registry: &ComplianceRegistry,
    bundle: &DataBundle,
    vk: &VerificationKey,
) -> Decision {
    if let Verdict::Reject(reason) =
        verify_structure(vk, &bundle.proofs.pi_a, &bundle.proofs.pi_b, &bundle.proofs.pi_c)
    {
        return Decision::Reject(RejectReason::Proof(reason.to_string()));
    }
    if let Verdict::Reject(reason) = verify_execution(
        vk,
        &bundle.instance_digest,
        &bundle.proofs.execution,
        &bundle.public_values(),
    ) {
        return Decision::Reject(RejectReason::Proof(reason.to_string()));
    }

    if let Err(failure) = compliance_check(registry, bundle, &spec.required_device_type) {
        return Decision::Reject(RejectReason::Compliance(failure));
    }

    for guard in &spec.guards {
        if !check_guard(spec, guard, bundle) {
            return Decision::Reject(RejectReason::Guard(guard.name.clone()));
        }
    }

    let mut outputs = Vec::with_capacity(spec.forward.len());
    for (from, to) in &spec.forward {
        match bundle.metadata.get(from) {
            Some(value) => outputs.push((to.clone(), value.clone())),
            None => return Decision::Reject(RejectReason::Guard(format!("missing:{from}"))),
        }
    }
    Decision::Forward { outputs, next_hop: spec.next_hop.clone() }
}
