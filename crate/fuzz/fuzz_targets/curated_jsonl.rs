#![no_main]
use std::path::Path;

use libfuzzer_sys::fuzz_target;
use t4p_core::grammar::load_grammar;
use t4p_core::registry::{load_curated, write_curated};

const GRAMMAR: &str = "<start> ::= <w> | <w> \" \" <start>\n<w> ::= \"a\" | \"b\" | \"c\" | \"--x\"\n";

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let g = load_grammar(GRAMMAR).unwrap();
    let path = Path::new("curated.jsonl");
    if let Ok(records) = load_curated(text, path, &g) {
        let again = load_curated(&write_curated(&records), path, &g).expect("written records reload");
        assert_eq!(again, records);
    }
});
