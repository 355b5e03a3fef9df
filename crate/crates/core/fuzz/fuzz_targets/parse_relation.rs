#![no_main]

use libfuzzer_sys::fuzz_target;
use normderiv::{AlphaBeta, Lambda, Relation};

fuzz_target!(|text: &str| {
    let ab = AlphaBeta::new(0.3, 0.4).ok();
    let lambda = Lambda::new(0.5).ok();
    match Relation::parse(text, ab, lambda) {
        Ok(rel) => assert_eq!(Relation::parse(&rel.to_string(), None, None).unwrap(), rel),
        Err(e) => assert!(e.offset() <= text.len()),
    }
});
