//! Replays the fuzz seed corpus through the decoders and their round trips.

use std::fs;
use std::path::PathBuf;

use hjdenoise::io::{decode_float_text, decode_image, decode_pgm, encode_float_text, encode_pgm, Sidecar};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| fs::read(entry.unwrap().path()).unwrap())
        .collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

#[test]
fn pgm_seeds() {
    let mut decoded = 0;
    for data in seeds("pgm") {
        if let Ok(pgm) = decode_pgm(&data) {
            decoded += 1;
            for binary in [false, true] {
                let again = decode_pgm(&encode_pgm(&pgm.image, pgm.maxval, binary).unwrap()).unwrap();
                assert_eq!(again.image, pgm.image);
            }
        }
    }
    assert!(decoded >= 2);
}

#[test]
fn float_text_seeds() {
    for data in seeds("float_text") {
        if let Ok(image) = decode_float_text(&data) {
            assert_eq!(decode_float_text(encode_float_text(&image).as_bytes()).unwrap(), image);
        }
    }
}

#[test]
fn sidecar_seeds() {
    for data in seeds("sidecar") {
        if let Ok(sidecar) = Sidecar::parse(std::str::from_utf8(&data).unwrap()) {
            assert_eq!(Sidecar::parse(&sidecar.to_text()).unwrap(), sidecar);
        }
    }
}

#[test]
fn decode_image_seeds() {
    for data in seeds("decode_image") {
        let (image, _) = decode_image(&data).unwrap();
        assert_eq!(image.as_slice().len(), image.rows() * image.cols());
    }
}
