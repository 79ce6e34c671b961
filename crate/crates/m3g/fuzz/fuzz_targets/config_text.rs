#![no_main]

use libfuzzer_sys::fuzz_target;

// One corpus exercises all three key-value schemas plus the raw
// tokenizer; they share the line syntax but reject different keys.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = m3g::io::parse_kv(text);
        let _ = m3g::io::synth_config_from_text(text);
        let _ = m3g::io::train_config_from_text(text);
        let _ = m3g::io::eval_settings_from_text(text);
    }
});
