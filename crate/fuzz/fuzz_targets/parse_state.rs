#![no_main]

use libfuzzer_sys::fuzz_target;
use lfdlcq::FockState;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = text.parse::<FockState>() {
        let again: FockState = s.to_string().parse().expect("display output must parse");
        assert_eq!(again, s);
    }
});
