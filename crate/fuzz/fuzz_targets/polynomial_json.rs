#![no_main]

use addfunc::Polynomial;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = Polynomial::from_json(text) {
        let [lo, hi] = p.interval;
        let _ = p.eval(0.5 * (lo + hi));
    }
});
