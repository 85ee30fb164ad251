//! Simulated devices: sensor readings in, attestation bundles out, with
//! tamper directives modeling compromised firmware.
//!
//! ```bash
//! cargo run -p attestchain --example device_bundles
//! ```

use std::collections::BTreeMap;

use attestchain::device::{encode_reading, Device, SensorReading, TamperMode};
use attestchain::fc::{verify_execution, verify_structure};
use attestchain::r1cs::GateProgram;

fn check(bundle: &attestchain::device::DataBundle, device: &Device) -> (bool, bool) {
    let s = verify_structure(
        device.vk(),
        &bundle.proofs.pi_a,
        &bundle.proofs.pi_b,
        &bundle.proofs.pi_c,
    )
    .is_accept();
    let e = verify_execution(
        device.vk(),
        &bundle.instance_digest,
        &bundle.proofs.execution,
        &bundle.public_values(),
    )
    .is_accept();
    (s, e)
}

fn main() {
    let p = attestchain::field::DEFAULT_MODULUS;
    // firmware input 1: collision flag; input 2: bound metadata digest
    let firmware = GateProgram::parse(
        "inputs 2\nw3 = mul w1 w1\noutput w3",
    )
    .unwrap();

    let reading = SensorReading::new("collision", 1, 1_712_000_000);
    let payload = vec![encode_reading(&reading, 1, p).unwrap()];
    let mut metadata = BTreeMap::new();
    metadata.insert("device_type".to_string(), "Tesla".to_string());
    metadata.insert("gps".to_string(), "47610000,-122330000".to_string());
    metadata.insert("timestamp".to_string(), "1712000000".to_string());
    metadata.insert("collision".to_string(), "1".to_string());

    let honest = Device::new("car-a", "Tesla", firmware.clone(), p, 128, true).unwrap();
    let bundle = honest.emit_bundle(&payload, metadata.clone()).unwrap();
    let (s, e) = check(&bundle, &honest);
    println!(
        "honest device: output {}, structure {}, execution {}",
        bundle.output, s, e
    );
    println!("  vk digest {}", hex::encode(bundle.vk_digest));
    println!("  metadata bound into input {}", bundle.inputs.last().unwrap());

    let forger = Device::new("car-a", "Tesla", firmware.clone(), p, 128, true)
        .unwrap()
        .with_tamper(TamperMode::ForgeOutput);
    let forged = forger.emit_bundle(&payload, metadata.clone()).unwrap();
    let (s, e) = check(&forged, &forger);
    println!(
        "forged output:  output {}, structure {}, execution {}",
        forged.output, s, e
    );

    let corruptor = Device::new("car-a", "Tesla", firmware, p, 128, true)
        .unwrap()
        .with_tamper(TamperMode::CorruptProof);
    let corrupted = corruptor.emit_bundle(&payload, metadata).unwrap();
    let (s, e) = check(&corrupted, &corruptor);
    println!(
        "corrupt proof:  output {}, structure {}, execution {}",
        corrupted.output, s, e
    );
}
