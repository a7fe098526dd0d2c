#![no_main]

use libfuzzer_sys::fuzz_target;
use lpembed_cli::config::parse_config;
use lpembed_cli::{ExperimentConfig, ExperimentKind};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = parse_config(text) else { return };
    for kind in ExperimentKind::ALL {
        let _ = ExperimentConfig::resolve(kind, 0, table.clone(), None, Some("out".into()));
    }
});
