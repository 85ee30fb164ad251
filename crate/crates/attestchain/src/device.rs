//! Simulated devices at the digital boundary: scripted sensor fixtures in,
//! firmware execution, and attestation bundles out.
//!
//! A device owns its firmware (a gate program), the keys derived from it,
//! and an optional tamper directive used by test scenarios to model
//! compromised hardware. Metadata that downstream contract guards read
//! (device type, position, timestamp, collision flag) is hashed into the
//! firmware's last public input so the execution proof binds it; guards
//! never act on unauthenticated data.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fc::{
    prove_execution, prove_structure, setup, FcError, ProofBundle, ProvingKey, PublicParams,
    VerificationKey,
};
use crate::field::FieldElement;
use crate::r1cs::{build_program, Assignment, CompiledProgram, GateProgram, R1csError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("reading {channel}: scaled value does not fit the field")]
    RangeError { channel: String },
    #[error(transparent)]
    R1cs(#[from] R1csError),
    #[error(transparent)]
    Fc(#[from] FcError),
}

/// A digital sensor sample: already through the converter, fixed-point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorReading {
    pub channel: String,
    pub raw: i64,
    pub timestamp: u64,
}

impl SensorReading {
    pub fn new(channel: impl Into<String>, raw: i64, timestamp: u64) -> Self {
        Self { channel: channel.into(), raw, timestamp }
    }
}

/// Fixed-point embedding of a reading into the field: `raw * scale mod p`,
/// rejected when the magnitude leaves the field.
pub fn encode_reading(
    reading: &SensorReading,
    scale: u64,
    modulus: u64,
) -> Result<FieldElement, DeviceError> {
    let scaled = reading.raw as i128 * scale as i128;
    if scaled.unsigned_abs() >= modulus as u128 {
        return Err(DeviceError::RangeError { channel: reading.channel.clone() });
    }
    Ok(FieldElement::from_i64(scaled as i64, modulus))
}

/// Hashes a metadata map into one field element: the value bound into the
/// firmware's reserved public input.
pub fn metadata_field(metadata: &BTreeMap<String, String>, modulus: u64) -> FieldElement {
    let mut h = Sha256::new();
    for (k, v) in metadata {
        h.update(k.as_bytes());
        h.update([b'=']);
        h.update(v.as_bytes());
        h.update([b'\n']);
    }
    let digest: [u8; 32] = h.finalize().into();
    let v = u64::from_be_bytes(digest[..8].try_into().expect("8"));
    FieldElement::new(v, modulus)
}

/// What identifies a device to the rest of the system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceIdentity {
    pub id: String,
    pub device_type: String,
    pub vk_digest: [u8; 32],
    pub firmware: GateProgram,
}

/// Scenario-injected misbehavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TamperMode {
    #[default]
    None,
    /// Claim a different output than the firmware produced.
    ForgeOutput,
    /// Ship a proof with a flipped digest byte.
    CorruptProof,
}

/// A simulated device: identity, compiled firmware, keys, and the tamper
/// directive applied to emitted bundles.
pub struct Device {
    identity: DeviceIdentity,
    compiled: CompiledProgram,
    pp: PublicParams,
    pk: ProvingKey,
    vk: VerificationKey,
    /// Whether the last firmware input is reserved for the metadata hash.
    bind_metadata: bool,
    tamper: TamperMode,
}

/// The unit a device transmits: claimed publics, guard metadata, and the
/// proofs, all tied to the device's key and circuit digests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBundle {
    pub producer: String,
    pub inputs: Vec<FieldElement>,
    pub output: FieldElement,
    pub metadata: BTreeMap<String, String>,
    pub vk_digest: [u8; 32],
    pub instance_digest: [u8; 32],
    pub proofs: ProofBundle,
}

impl DataBundle {
    /// The publics in verification order: inputs, then output.
    pub fn public_values(&self) -> Vec<FieldElement> {
        let mut out = self.inputs.clone();
        out.push(self.output);
        out
    }
}

impl Device {
    pub fn new(
        id: impl Into<String>,
        device_type: impl Into<String>,
        firmware: GateProgram,
        modulus: u64,
        lambda: u32,
        bind_metadata: bool,
    ) -> Result<Self, DeviceError> {
        let compiled = build_program(&firmware, modulus)?;
        let (pp, pk, vk) = setup(lambda, compiled.instance())?;
        Ok(Self {
            identity: DeviceIdentity {
                id: id.into(),
                device_type: device_type.into(),
                vk_digest: *vk.digest(),
                firmware,
            },
            compiled,
            pp,
            pk,
            vk,
            bind_metadata,
            tamper: TamperMode::None,
        })
    }

    pub fn with_tamper(mut self, tamper: TamperMode) -> Self {
        self.tamper = tamper;
        self
    }

    pub fn identity(&self) -> &DeviceIdentity {
        &self.identity
    }

    pub fn id(&self) -> &str {
        &self.identity.id
    }

    pub fn device_type(&self) -> &str {
        &self.identity.device_type
    }

    pub fn vk(&self) -> &VerificationKey {
        &self.vk
    }

    pub fn vk_digest(&self) -> [u8; 32] {
        self.identity.vk_digest
    }

    pub fn instance_digest(&self) -> [u8; 32] {
        self.compiled.instance().digest()
    }

    pub fn pp(&self) -> &PublicParams {
        &self.pp
    }

    pub fn modulus(&self) -> u64 {
        self.pp.modulus()
    }

    /// Input arity the caller must supply; the metadata slot, when bound,
    /// is filled by [`Device::emit_bundle`].
    pub fn payload_arity(&self) -> usize {
        let declared = self.identity.firmware.num_inputs() as usize;
        if self.bind_metadata {
            declared - 1
        } else {
            declared
        }
    }

    /// Forward-executes the firmware. The returned assignment satisfies the
    /// device's instance by construction.
    pub fn execute_firmware(
        &self,
        inputs: &[FieldElement],
    ) -> Result<(FieldElement, Assignment), DeviceError> {
        Ok(self.compiled.assignment(inputs)?)
    }

    /// Runs the firmware on the payload inputs (plus the bound metadata
    /// hash when enabled), proves the execution, and packages the bundle.
    /// Tamper directives corrupt the result the way a compromised device
    /// would.
    pub fn emit_bundle(
        &self,
        payload: &[FieldElement],
        metadata: BTreeMap<String, String>,
    ) -> Result<DataBundle, DeviceError> {
        let mut inputs = payload.to_vec();
        if self.bind_metadata {
            inputs.push(metadata_field(&metadata, self.modulus()));
        }
        let (y, z) = self.execute_firmware(&inputs)?;
        let (pi_a, pi_b, pi_c) = prove_structure(&self.pk)?;
        let execution = prove_execution(&self.pk, &z)?;
        let mut proofs = ProofBundle { pi_a, pi_b, pi_c, execution };
        let mut output = y;

        match self.tamper {
            TamperMode::None => {}
            TamperMode::ForgeOutput => {
                let forged = y.add(FieldElement::one(self.modulus()));
                output = forged;
                if let Some(last) = proofs.execution.claimed_public_mut().last_mut() {
                    *last = forged;
                }
            }
            TamperMode::CorruptProof => {
                // Shift the first structure opening's value off its leaf.
                if let Some(first) = proofs.pi_a.openings_mut().first_mut() {
                    first.row = crate::commit::Opening::from_parts(
                        first.row.index(),
                        first.row.value().add(FieldElement::one(self.modulus())),
                        first.row.path().to_vec(),
                    );
                }
            }
        }

        Ok(DataBundle {
            producer: self.identity.id.clone(),
            inputs,
            output,
            metadata,
            vk_digest: self.identity.vk_digest,
            instance_digest: self.instance_digest(),
            proofs,
        })
    }
}
