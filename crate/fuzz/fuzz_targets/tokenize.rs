#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::fuzzing::{detokenize, tokenize};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let tokens = tokenize(line);
    assert_eq!(tokenize(&detokenize(&tokens)), tokens);
});
