#![no_main]

use hjdenoise::io::{decode_float_text, encode_float_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = decode_float_text(data) {
        let text = encode_float_text(&image);
        let again = decode_float_text(text.as_bytes()).expect("re-decode");
        let same = image
            .as_slice()
            .iter()
            .zip(again.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        assert!(same && image.shape() == again.shape());
    }
});
