#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::oracle::Pattern;

// pattern, a NUL byte, then the subject text
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (pattern, subject) = text.split_once('\0').unwrap_or((text, ""));
    if let Ok(p) = Pattern::new(pattern) {
        let _ = p.is_match(subject);
    }
});
