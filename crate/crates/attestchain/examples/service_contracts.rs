//! A declarative service contract: verify the proof, check compliance,
//! evaluate the guards, forward the mapped fields.
//!
//! ```bash
//! cargo run -p attestchain --example service_contracts
//! ```

use std::collections::BTreeMap;

use attestchain::contract::{
    city_lookup, evaluate_contract, ComplianceRegistry, ContractSpec, GeoBox, Guard,
    GuardPredicate,
};
use attestchain::device::Device;
use attestchain::field::FieldElement;
use attestchain::r1cs::GateProgram;

fn main() {
    let p = 17;
    let geo = vec![
        (
            "Seattle".to_string(),
            GeoBox {
                lat_min: 47_400_000,
                lat_max: 47_800_000,
                lon_min: -122_500_000,
                lon_max: -122_100_000,
            },
        ),
        (
            "Portland".to_string(),
            GeoBox {
                lat_min: 45_300_000,
                lat_max: 45_700_000,
                lon_min: -122_900_000,
                lon_max: -122_400_000,
            },
        ),
    ];
    println!(
        "city_lookup(47.61, -122.33) = {:?}",
        city_lookup(&geo, 47_610_000, -122_330_000)
    );

    let contract = ContractSpec {
        id: "road-conditions".into(),
        required_device_type: "Tesla".into(),
        guards: vec![
            Guard {
                name: "city".into(),
                field: "gps".into(),
                predicate: GuardPredicate::InBbox,
                value: "Seattle".into(),
            },
            Guard {
                name: "type".into(),
                field: "device_type".into(),
                predicate: GuardPredicate::Equals,
                value: "Tesla".into(),
            },
        ],
        forward: vec![
            ("timestamp".into(), "T_o".into()),
            ("collision".into(), "C_o".into()),
        ],
        next_hop: "node-y".into(),
        geo,
    };

    let firmware = GateProgram::parse("inputs 2\nw3 = mul w1 w1\noutput w3").unwrap();
    let device = Device::new("car-a", "Tesla", firmware, p, 128, true).unwrap();
    let mut registry = ComplianceRegistry::new();
    registry.authorize("Tesla", device.vk_digest());

    let metadata = |gps: &str| {
        let mut m = BTreeMap::new();
        m.insert("device_type".to_string(), "Tesla".to_string());
        m.insert("gps".to_string(), gps.to_string());
        m.insert("timestamp".to_string(), "1712000000".to_string());
        m.insert("collision".to_string(), "1".to_string());
        m
    };

    let seattle = device
        .emit_bundle(&[FieldElement::one(p)], metadata("47610000,-122330000"))
        .unwrap();
    println!(
        "\nSeattle bundle: {:?}",
        evaluate_contract(&contract, &registry, &seattle, device.vk())
    );

    let portland = device
        .emit_bundle(&[FieldElement::one(p)], metadata("45500000,-122600000"))
        .unwrap();
    println!(
        "Portland bundle: {:?}",
        evaluate_contract(&contract, &registry, &portland, device.vk())
    );

    // edited metadata breaks the proof-bound hash: compliance rejects
    let mut replayed = seattle.clone();
    replayed.metadata.insert("collision".into(), "0".into());
    println!(
        "replayed with edited metadata: {:?}",
        evaluate_contract(&contract, &registry, &replayed, device.vk())
    );
}
