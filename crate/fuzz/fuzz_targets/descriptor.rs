#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::registry::BugEntry;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entry) = BugEntry::from_descriptor(text) {
        let again = BugEntry::from_descriptor(&entry.to_descriptor()).expect("descriptor reloads");
        assert_eq!(again, entry);
    }
});
