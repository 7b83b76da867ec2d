#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::execution::junit::parse_junit;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_junit(s);
    }
});
