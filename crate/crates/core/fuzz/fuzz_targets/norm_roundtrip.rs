#![no_main]

use libfuzzer_sys::fuzz_target;
use normderiv::{parse_norm, print_norm, Vector};

// Anything that parses must print to text that parses back to the same tree
// and evaluates to the same norm.
fuzz_target!(|text: &str| {
    let Ok(ast) = parse_norm(text, 3) else {
        return;
    };
    let printed = print_norm(&ast);
    let back = parse_norm(&printed, 3).unwrap();
    assert_eq!(back, ast);
    assert_eq!(print_norm(&back), printed);
    let x = Vector::from_slice(&[0.5, -2.0, 1.25]);
    assert_eq!(ast.norm(&x).to_bits(), back.norm(&x).to_bits());
});
