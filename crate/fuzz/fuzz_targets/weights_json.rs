#![no_main]

use libfuzzer_sys::fuzz_target;
use lpembed::neural::{parse_weights, weights_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pair) = parse_weights(text) {
        // anything accepted must survive a round trip unchanged
        let again = parse_weights(&weights_to_json(&pair)).expect("re-parse of serialized weights");
        assert_eq!(pair.flat(), again.flat());
    }
});
