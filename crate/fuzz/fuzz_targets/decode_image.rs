#![no_main]

use hjdenoise::io::decode_image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((image, _)) = decode_image(data) {
        assert_eq!(image.as_slice().len(), image.rows() * image.cols());
    }
});
