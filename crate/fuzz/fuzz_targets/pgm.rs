#![no_main]

use hjdenoise::io::{decode_pgm, encode_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(pgm) = decode_pgm(data) {
        // Decoded samples are integers in [0, maxval], so re-encoding is lossless.
        for binary in [false, true] {
            let bytes = encode_pgm(&pgm.image, pgm.maxval, binary).expect("encode");
            let again = decode_pgm(&bytes).expect("re-decode");
            assert_eq!(again.maxval, pgm.maxval);
            assert_eq!(again.image, pgm.image);
        }
    }
});
