#![no_main]

use addfunc_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let _ = cfg.spec();
        let again = RunConfig::from_json(&cfg.to_json()).expect("own output parses");
        assert_eq!(again.to_json(), cfg.to_json());
    }
});
