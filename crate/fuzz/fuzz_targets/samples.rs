#![no_main]

use addfunc::io::{parse_data, parse_samples};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(counts) = parse_samples(text, None) {
        assert!(counts.iter().any(|&c| c > 0));
    }
    let _ = parse_data(text, Some(64));
});
