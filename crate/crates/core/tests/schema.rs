//! The shipped CSV schema file matches the tables experiments write.

use std::path::Path;

use dirac_lab::config::parse_config;
use dirac_lab::experiments::{run_experiment, EXPERIMENTS};

fn schema() -> toml::Table {
    let path = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../csv-schema.toml"));
    std::fs::read_to_string(path).unwrap().parse().unwrap()
}

fn columns(schema: &toml::Table, experiment: &str, table: &str) -> Vec<String> {
    schema[experiment][table]["columns"]
        .as_array()
        .unwrap_or_else(|| panic!("{experiment}.{table} missing from schema"))
        .iter()
        .map(|c| c.as_str().unwrap().to_string())
        .collect()
}

#[test]
fn every_experiment_has_a_schema_section() {
    let s = schema();
    for e in EXPERIMENTS {
        assert!(s.contains_key(e.name), "{} missing from schema", e.name);
    }
    for key in s.keys() {
        assert!(EXPERIMENTS.iter().any(|e| e.name == key), "schema lists unknown experiment {key}");
    }
}

#[test]
fn fast_experiments_match_schema() {
    let s = schema();
    let configs = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"));
    for name in ["clifford-axioms", "fractional-roundtrip", "wave-engine", "kannai", "chirality-extension", "connection-recovery"] {
        let text = std::fs::read_to_string(configs.join(format!("{name}.toml"))).unwrap();
        let cfg = parse_config(&text, true).unwrap().config;
        let out = run_experiment(name, &cfg).unwrap();
        let listed = s[name].as_table().unwrap();
        let written = out.tables.len() + out.files.len();
        assert_eq!(written, listed.len(), "{name}: table count");
        for t in &out.tables {
            assert_eq!(t.columns, columns(&s, name, &t.name), "{name}.{}", t.name);
        }
        for (file, bytes) in &out.files {
            let stem = file.trim_end_matches(".csv");
            let header = String::from_utf8_lossy(bytes).lines().next().unwrap().to_string();
            assert_eq!(header, columns(&s, name, stem).join(","), "{name}.{stem}");
        }
    }
}
