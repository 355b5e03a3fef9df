#![no_main]

use libfuzzer_sys::fuzz_target;
use normderiv::parse_vector;

fuzz_target!(|text: &str| {
    match parse_vector(text) {
        Ok(v) => {
            assert!(v.as_slice().iter().all(|x| x.is_finite()));
            assert_eq!(parse_vector(&v.to_string()).unwrap(), v);
        }
        Err(e) => assert!(e.offset() <= text.len()),
    }
});
