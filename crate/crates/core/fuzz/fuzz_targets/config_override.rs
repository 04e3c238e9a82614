#![no_main]
use libfuzzer_sys::fuzz_target;
use magcomb::config::{apply_override, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut doc = RunConfig::default().to_value();
    for line in text.lines() {
        if apply_override(&mut doc, line).is_err() {
            return;
        }
    }
    let _ = RunConfig::from_value(&doc);
});
