#![no_main]

use libfuzzer_sys::fuzz_target;

// Accepted manifests must survive a render/reparse cycle losslessly;
// the second render pins the canonical form.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(manifest) = m3g::io::Manifest::parse(text) {
            let rendered = manifest.to_json_string();
            let reparsed = m3g::io::Manifest::parse(&rendered)
                .expect("rendered manifests must reparse");
            assert_eq!(rendered, reparsed.to_json_string());
        }
    }
});
