#![no_main]

use libfuzzer_sys::fuzz_target;
use normderiv::parse_norm;

fuzz_target!(|text: &str| {
    for dim in 2..5 {
        if let Err(e) = parse_norm(text, dim) {
            assert!(e.offset() <= text.len());
        }
    }
});
