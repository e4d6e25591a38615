#![no_main]

use libfuzzer_sys::fuzz_target;
use minsup::cli::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // anything accepted must survive its own serialisation
        let again = parse_config(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
});
