#![no_main]

use libfuzzer_sys::fuzz_target;
use lpembed::federated::{aggregate_summaries, compressed_inference, summary_inference, SiteSummary, SummaryLevel};

fuzz_target!(|data: &[u8]| {
    let Some((&tag, rest)) = data.split_first() else { return };
    let level = match tag % 3 {
        0 => SummaryLevel::Full16,
        1 => SummaryLevel::Mid12,
        _ => SummaryLevel::Treat8,
    };
    let payload: Vec<f64> = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let Ok(summary) = SiteSummary::from_payload(level, payload) else { return };
    // decoded summaries must be usable downstream without panicking
    let Ok(agg) = aggregate_summaries(&[summary.clone(), summary]) else { return };
    let _ = match level {
        SummaryLevel::Full16 => summary_inference(&agg),
        _ => compressed_inference(&agg),
    };
});
