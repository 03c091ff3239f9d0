#![no_main]

use hjdenoise::io::Sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(sidecar) = Sidecar::parse(text) {
            let again = Sidecar::parse(&sidecar.to_text()).expect("re-parse");
            assert_eq!(again, sidecar);
        }
    }
});
