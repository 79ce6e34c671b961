#![no_main]

use libfuzzer_sys::fuzz_target;

// Covers both the located (coordinate-endpoint) and resolved (id-endpoint)
// header forms; the parser dispatches on the header itself.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = m3g::io::parse_relations_csv(text);
    }
});
