//! Proof chains across devices: each step carries its own structure and
//! execution proofs, and declares where its output must reappear in the
//! next step's inputs. Verifying a chain checks every step against its
//! verification key and folds the linkage equalities left to right.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fc::{
    verify_execution, verify_structure, ExecutionProof, FcError, StructureProof, Verdict,
    VerificationKey,
};
use crate::field::FieldElement;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("expected step index {expected}, got {got}")]
    SequenceError { expected: u32, got: u32 },
    #[error("input {position} of step {step} does not carry the previous output")]
    LinkError { step: u32, position: u32 },
    #[error("link position {position} outside the step's {arity} inputs")]
    LinkOutOfRange { position: u32, arity: usize },
    #[error("no verification key registered for digest {0}")]
    UnknownKey(String),
    #[error("malformed chain bytes: {0}")]
    Encoding(String),
    #[error(transparent)]
    Fc(#[from] FcError),
}

/// One device execution in a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainStep {
    /// 1-based position in the chain.
    pub index: u32,
    pub vk_digest: [u8; 32],
    /// Public inputs of this step, in firmware order.
    pub inputs: Vec<FieldElement>,
    pub output: FieldElement,
    pub pi_a: StructureProof,
    pub pi_b: StructureProof,
    pub pi_c: StructureProof,
    pub execution: ExecutionProof,
    /// 1-based input position of the *next* step that must equal this
    /// step's output.
    pub link_position: u32,
}

/// A whole chain plus the claimed final output.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChainProof {
    steps: Vec<ChainStep>,
    final_claim: Option<FieldElement>,
}

/// Why a chain was rejected, and at which step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainReject {
    Structure { step: u32, reason: crate::fc::Reject },
    Execution { step: u32, reason: crate::fc::Reject },
    Link { step: u32, position: u32 },
    IndexGap { step: u32 },
    FinalClaim,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainVerdict {
    Accept,
    Reject(ChainReject),
}

impl ChainVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, ChainVerdict::Accept)
    }
}

/// Canonical field decoding: values at or above the modulus are malformed,
/// never silently reduced.
fn take_field(rest: &mut &[u8], modulus: u64) -> Result<FieldElement, ChainError> {
    if rest.len() < 8 {
        return Err(ChainError::Encoding("truncated field element".into()));
    }
    let v = u64::from_be_bytes(rest[..8].try_into().expect("8"));
    if v >= modulus {
        return Err(ChainError::Encoding("field element out of range".into()));
    }
    *rest = &rest[8..];
    Ok(FieldElement::new(v, modulus))
}

impl ChainProof {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[ChainStep] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut Vec<ChainStep> {
        &mut self.steps
    }

    pub fn final_claim(&self) -> Option<FieldElement> {
        self.final_claim
    }

    /// Appends a step after checking the index sequence and that the new
    /// step's declared link input equals the previous output. No proof
    /// verification happens here.
    pub fn extend(&mut self, step: ChainStep) -> Result<(), ChainError> {
        let expected = self.len() + 1;
        if step.index != expected {
            return Err(ChainError::SequenceError { expected, got: step.index });
        }
        if let Some(prev) = self.steps.last() {
            let pos = prev.link_position;
            if pos < 1 || pos as usize > step.inputs.len() {
                return Err(ChainError::LinkOutOfRange {
                    position: pos,
                    arity: step.inputs.len(),
                });
            }
            if step.inputs[(pos - 1) as usize] != prev.output {
                return Err(ChainError::LinkError { step: step.index, position: pos });
            }
        }
        self.final_claim = Some(step.output);
        self.steps.push(step);
        Ok(())
    }

    /// Verifies every step's proofs against the registered keys and every
    /// link equality, then the final claim. Unknown keys are an error, not
    /// a rejection.
    pub fn verify(
        &self,
        registry: &BTreeMap<[u8; 32], VerificationKey>,
    ) -> Result<ChainVerdict, ChainError> {
        let mut prev: Option<&ChainStep> = None;
        for (k, step) in self.steps.iter().enumerate() {
            if step.index != k as u32 + 1 {
                return Ok(ChainVerdict::Reject(ChainReject::IndexGap { step: step.index }));
            }
            let vk = registry
                .get(&step.vk_digest)
                .ok_or_else(|| ChainError::UnknownKey(hex::encode(step.vk_digest)))?;
            if let Verdict::Reject(reason) =
                verify_structure(vk, &step.pi_a, &step.pi_b, &step.pi_c)
            {
                return Ok(ChainVerdict::Reject(ChainReject::Structure {
                    step: step.index,
                    reason,
                }));
            }
            let mut public = step.inputs.clone();
            public.push(step.output);
            if let Verdict::Reject(reason) = verify_execution(
                vk,
                step.execution.instance_digest(),
                &step.execution,
                &public,
            ) {
                return Ok(ChainVerdict::Reject(ChainReject::Execution {
                    step: step.index,
                    reason,
                }));
            }
            if let Some(prev) = prev {
                let pos = prev.link_position;
                let linked = pos >= 1
                    && (pos as usize) <= step.inputs.len()
                    && step.inputs[(pos - 1) as usize] == prev.output;
                if !linked {
                    return Ok(ChainVerdict::Reject(ChainReject::Link {
                        step: step.index,
                        position: pos,
                    }));
                }
            }
            prev = Some(step);
        }
        match (prev, self.final_claim) {
            (Some(last), Some(claim)) if last.output == claim => Ok(ChainVerdict::Accept),
            (None, None) => Ok(ChainVerdict::Accept),
            _ => Ok(ChainVerdict::Reject(ChainReject::FinalClaim)),
        }
    }

    /// Chain file format: step count, length-prefixed canonical step
    /// encodings, then the final claim.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.len().to_be_bytes());
        for step in &self.steps {
            let bytes = step.to_bytes();
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
        if let Some(claim) = self.final_claim {
            out.push(1);
            out.extend_from_slice(&claim.to_bytes());
        } else {
            out.push(0);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], modulus: u64) -> Result<Self, ChainError> {
        let err = |msg: &str| ChainError::Encoding(msg.into());
        if bytes.len() < 4 {
            return Err(err("truncated chain"));
        }
        let count = u32::from_be_bytes(bytes[..4].try_into().expect("4"));
        let mut rest = &bytes[4..];
        let mut steps = Vec::with_capacity(count as usize);
        for _ in 0..count {
            if rest.len() < 4 {
                return Err(err("truncated step length"));
            }
            let len = u32::from_be_bytes(rest[..4].try_into().expect("4")) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(err("truncated step"));
            }
            steps.push(ChainStep::from_bytes(&rest[..len], modulus)?);
            rest = &rest[len..];
        }
        let final_claim = match rest.first() {
            Some(0) if rest.len() == 1 => None,
            Some(1) if rest.len() == 9 => {
                let mut tail = &rest[1..];
                Some(take_field(&mut tail, modulus)?)
            }
            _ => return Err(err("bad final claim")),
        };
        Ok(Self { steps, final_claim })
    }

    /// Stable digest over the whole serialized chain.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.to_bytes());
        h.finalize().into()
    }
}

impl ChainStep {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(&self.vk_digest);
        out.extend_from_slice(&(self.inputs.len() as u32).to_be_bytes());
        for v in &self.inputs {
            out.extend_from_slice(&v.to_bytes());
        }
        out.extend_from_slice(&self.output.to_bytes());
        out.extend_from_slice(&self.link_position.to_be_bytes());
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

    pub fn from_bytes(bytes: &[u8], modulus: u64) -> Result<Self, ChainError> {
        let err = |msg: &str| ChainError::Encoding(msg.into());
        let mut rest = bytes;
        let u32_at = |rest: &mut &[u8]| -> Result<u32, ChainError> {
            if rest.len() < 4 {
                return Err(err("truncated integer"));
            }
            let v = u32::from_be_bytes(rest[..4].try_into().expect("4"));
            *rest = &rest[4..];
            Ok(v)
        };
        let index = u32_at(&mut rest)?;
        if rest.len() < 32 {
            return Err(err("truncated key digest"));
        }
        let mut vk_digest = [0u8; 32];
        vk_digest.copy_from_slice(&rest[..32]);
        rest = &rest[32..];
        let arity = u32_at(&mut rest)?;
        let mut inputs = Vec::with_capacity(arity as usize);
        for _ in 0..arity {
            inputs.push(take_field(&mut rest, modulus)?);
        }
        let output = take_field(&mut rest, modulus)?;
        let link_position = u32_at(&mut rest)?;
        let mut sections: Vec<&[u8]> = Vec::with_capacity(4);
        for _ in 0..4 {
            let len = u32_at(&mut rest)? as usize;
            if rest.len() < len {
                return Err(err("truncated proof section"));
            }
            sections.push(&rest[..len]);
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(err("trailing bytes after step"));
        }
        Ok(Self {
            index,
            vk_digest,
            inputs,
            output,
            pi_a: StructureProof::from_bytes(sections[0], modulus)?,
            pi_b: StructureProof::from_bytes(sections[1], modulus)?,
            pi_c: StructureProof::from_bytes(sections[2], modulus)?,
            execution: ExecutionProof::from_bytes(sections[3], modulus)?,
            link_position,
        })
    }
}
