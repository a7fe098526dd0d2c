//! Replays the checked-in fuzz corpus through the same entry points as the
//! fuzz targets, so the seeds stay meaningful without a nightly toolchain.

use std::fs;
use std::path::PathBuf;

use lpembed::federated::{aggregate_summaries, SiteSummary, SummaryLevel};
use lpembed::neural::{parse_weights, weights_to_json};
use lpembed_cli::config::parse_config;
use lpembed_cli::{ExperimentConfig, ExperimentKind};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

#[test]
fn weights_seeds() {
    let mut accepted = 0;
    for (name, bytes) in corpus("weights_json") {
        let text = String::from_utf8(bytes).unwrap();
        if let Ok(pair) = parse_weights(&text) {
            assert_eq!(parse_weights(&weights_to_json(&pair)).unwrap().flat(), pair.flat(), "{name}");
            accepted += 1;
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn config_seeds() {
    let mut resolved = 0;
    for (name, bytes) in corpus("config_toml") {
        let Ok(table) = parse_config(std::str::from_utf8(&bytes).unwrap()) else { continue };
        let ok = ExperimentKind::ALL
            .iter()
            .filter(|&&k| ExperimentConfig::resolve(k, 0, table.clone(), None, Some("out".into())).is_ok())
            .count();
        assert!(ok <= 2, "{name} resolved for {ok} experiments");
        resolved += usize::from(ok > 0);
    }
    assert_eq!(resolved, 4);
}

#[test]
fn site_summary_seeds() {
    let mut valid = Vec::new();
    for (name, bytes) in corpus("site_summary") {
        let (&tag, rest) = bytes.split_first().unwrap();
        let level = [SummaryLevel::Full16, SummaryLevel::Mid12, SummaryLevel::Treat8][tag as usize % 3];
        let payload = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if let Ok(s) = SiteSummary::from_payload(level, payload) {
            aggregate_summaries(&[s.clone(), s]).unwrap();
            valid.push(name);
        }
    }
    assert_eq!(valid, ["full16_valid", "mid12_valid", "treat8_valid"]);
}
