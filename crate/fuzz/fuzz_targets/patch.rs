#![no_main]
use libfuzzer_sys::fuzz_target;
use t4p_core::execution::patch::{apply_file_patch, parse_patch};

// original file, a NUL byte, then a unified diff
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (original, diff) = text.split_once('\0').unwrap_or(("", text));
    if let Ok(patch) = parse_patch(diff) {
        for file in &patch.files {
            let _ = apply_file_patch(file, original);
        }
    }
});
