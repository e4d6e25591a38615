#![no_main]

use libfuzzer_sys::fuzz_target;
use minsup::convexlab::GridFunction;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = GridFunction::read_csv(data) {
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values().len(), f.values().len());
    }
});
