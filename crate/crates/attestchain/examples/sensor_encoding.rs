//! Fixed-point sensor readings at the digital boundary, embedded into the
//! field with range checking.
//!
//! ```bash
//! cargo run -p attestchain --example sensor_encoding
//! ```

use attestchain::device::{encode_reading, metadata_field, SensorReading};
use attestchain::field::DEFAULT_MODULUS;
use std::collections::BTreeMap;

fn main() {
    let p = DEFAULT_MODULUS;

    // 21.50 degrees arrives post-converter as the integer 2150
    let temperature = SensorReading::new("temperature", 2150, 1_712_000_000);
    println!(
        "temperature 2150 (x100 fixed point) -> field {}",
        encode_reading(&temperature, 1, p).unwrap()
    );

    // negative readings wrap into the field
    let offset = SensorReading::new("offset", -40, 1_712_000_000);
    println!("offset -40 -> field {}", encode_reading(&offset, 1, p).unwrap());

    // scales that overflow the field are refused, not wrapped silently
    let huge = SensorReading::new("counter", i64::MAX, 0);
    println!("i64::MAX at scale 4 -> {:?}", encode_reading(&huge, 4, p).unwrap_err());

    // guard-relevant metadata hashes into a single bound input
    let mut metadata = BTreeMap::new();
    metadata.insert("device_type".to_string(), "Tesla".to_string());
    metadata.insert("gps".to_string(), "47610000,-122330000".to_string());
    metadata.insert("timestamp".to_string(), "1712000000".to_string());
    metadata.insert("collision".to_string(), "1".to_string());
    println!("metadata digest input: {}", metadata_field(&metadata, p));

    let mut edited = metadata.clone();
    edited.insert("collision".to_string(), "0".to_string());
    println!("edited metadata digest: {}", metadata_field(&edited, p));
}
