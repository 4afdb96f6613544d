#![no_main]

use libfuzzer_sys::fuzz_target;
use lfdlcq::io::{parse_matrix, write_matrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((h, m)) = parse_matrix(text) {
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m, h.max_element).unwrap();
        let (_, back) = parse_matrix(std::str::from_utf8(&buf).unwrap()).expect("written matrix must parse");
        assert_eq!(back, m);
    }
});
