#![no_main]

use addfunc::io::{parse_histogram_csv, write_histogram_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(counts) = parse_histogram_csv(text, None) {
        // Anything accepted must survive a write/parse round trip.
        let again = parse_histogram_csv(&write_histogram_csv(&counts), None).expect("own output parses");
        assert_eq!(again, counts);
    }
});
