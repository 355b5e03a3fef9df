#![no_main]

use libfuzzer_sys::fuzz_target;
use normderiv::explorer::parse_matrix;

fuzz_target!(|text: &str| {
    match parse_matrix(text) {
        Ok(m) => assert_eq!(parse_matrix(&m.to_string()).unwrap(), m),
        Err(e) => assert!(e.offset() <= text.len()),
    }
});
