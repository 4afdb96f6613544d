#![no_main]

use libfuzzer_sys::fuzz_target;
use lfdlcq::io::{parse_basis, write_basis};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(b) = parse_basis(text) {
        let mut buf = Vec::new();
        write_basis(&mut buf, &b).unwrap();
        let back = parse_basis(std::str::from_utf8(&buf).unwrap()).expect("written basis must parse");
        assert_eq!(back.states(), b.states());
    }
});
