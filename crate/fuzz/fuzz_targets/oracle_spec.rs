#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::oracle::{load_oracle_spec, serialize_oracle_spec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = load_oracle_spec(text) {
        let again = load_oracle_spec(&serialize_oracle_spec(&spec)).expect("serialized spec reloads");
        assert_eq!(again, spec);
    }
});
