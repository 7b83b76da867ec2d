#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::grammar::{load_grammar, parse_input};

// grammar text, a NUL byte, then the input to parse
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Some((grammar, input)) = text.split_once('\0') else { return };
    if grammar.len() > 512 || input.len() > 256 {
        return;
    }
    let Ok(g) = load_grammar(grammar) else { return };
    if let Ok(tree) = parse_input(&g, input) {
        assert_eq!(tree.frontier(), input);
    }
});
