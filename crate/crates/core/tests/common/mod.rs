#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use gkmnc::dataset::{Class, DataTable, Record, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn synthetic_schema() -> Arc<Schema> {
    Arc::new(
        Schema::parse(
            "region = nominal\n\
             id = identifier\n\
             x1 = numeric\n\
             x2 = numeric\n\
             tier = nominal\n\
             label = target\n\
             positive_label = yes\n",
        )
        .unwrap(),
    )
}

/// Two regions with two blobs each; the class depends on a blob-specific
/// linear rule plus a little label noise. North rows are mostly positive.
pub fn synthetic_table(rows: usize, seed: u64) -> DataTable {
    let schema = synthetic_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..rows)
        .map(|i| {
            let region = if rng.gen_bool(0.6) { "north" } else { "south" };
            let blob = rng.gen_bool(0.5);
            let offset = match (region, blob) {
                ("north", false) => (-4.0, -4.0),
                ("north", true) => (4.0, 4.0),
                (_, false) => (-4.0, 4.0),
                (_, true) => (4.0, -4.0),
            };
            let x1 = offset.0 + rng.gen_range(-1.5..1.5);
            let x2 = offset.1 + rng.gen_range(-1.5..1.5);
            let cut = if region == "north" { -0.8 } else { 0.8 };
            let rule = if blob { x1 - offset.0 > cut } else { x2 - offset.1 > cut };
            let noisy = rng.gen_bool(0.05);
            Record {
                nominal: vec![region.to_string(), if rng.gen_bool(0.5) { "a" } else { "b" }.to_string()],
                numeric: vec![x1, x2],
                identifiers: vec![format!("r{i}")],
                target: Some(if rule != noisy { Class::Positive } else { Class::Negative }),
            }
        })
        .collect();
    DataTable::new(schema, records).unwrap()
}

pub fn load(name: &str, schema: &str) -> DataTable {
    let dir = data_dir();
    let schema = Arc::new(Schema::from_file(dir.join(schema)).unwrap());
    DataTable::load(dir.join(name), schema).unwrap()
}
