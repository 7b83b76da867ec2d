#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::grammar::{load_grammar, serialize_grammar};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = load_grammar(text) {
        let printed = serialize_grammar(&g);
        let again = load_grammar(&printed).expect("serialized grammar reloads");
        assert_eq!(serialize_grammar(&again), printed);
    }
});
