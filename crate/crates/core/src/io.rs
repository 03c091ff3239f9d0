//! Image and metadata files.
//!
//! * PGM, plain (`P2`) and binary (`P5`), 8-bit (`maxval ≤ 255`). Reads
//!   return the raw sample values; writes clamp to `[0, maxval]` and round
//!   half to even.
//! * Float text: a `rows cols` header line, then `rows` lines of
//!   space-separated decimals. Values are written in shortest round-trip form,
//!   so a write/read cycle is bit-exact.
//! * Sidecar: `key=value` lines; `#` starts a comment line.
//!
//! Parse errors carry the byte offset where decoding stopped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    PgmPlain,
    PgmBinary,
    FloatText,
}

impl ImageFormat {
    /// By extension: `.pgm` is binary PGM, anything else float text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pgm") => ImageFormat::PgmBinary,
            _ => ImageFormat::FloatText,
        }
    }
}

/// A decoded PGM: raw samples and the declared maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub image: Image,
    pub maxval: u16,
}

/// Byte cursor over a header of whitespace-separated tokens with `#` comments.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn skip_space(&mut self) {
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    /// Next token; `comments` enables `#` comments before it.
    fn token(&mut self, what: &str, comments: bool) -> Result<(usize, &'a str)> {
        if comments {
            self.skip_space_and_comments();
        } else {
            self.skip_space();
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}, found end of input")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::parse(start, format!("{what} is not valid text")))?;
        Ok((start, text))
    }

    fn unsigned(&mut self, what: &str, comments: bool) -> Result<(usize, u64)> {
        let (at, text) = self.token(what, comments)?;
        if !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::parse(at, format!("{what} must be a nonnegative integer, got {text:?}")));
        }
        let value = text
            .parse()
            .map_err(|_| Error::parse(at, format!("{what} is out of range: {text}")))?;
        Ok((at, value))
    }

    fn remaining(&self) -> usize {
        self.bytes.len().saturating_sub(self.pos)
    }
}

fn shape(rows: u64, cols: u64, at: usize) -> Result<(usize, usize, usize)> {
    if rows == 0 || cols == 0 {
        return Err(Error::parse(at, format!("image shape must be positive, got {rows}x{cols}")));
    }
    let n = rows
        .checked_mul(cols)
        .filter(|&n| n <= usize::MAX as u64)
        .ok_or_else(|| Error::parse(at, format!("image shape {rows}x{cols} overflows")))?;
    Ok((rows as usize, cols as usize, n as usize))
}

/// Decodes a `P2` or `P5` PGM.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut cur = Cursor::new(bytes);
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(Error::parse(0, "missing PGM magic (P2 or P5)")),
    };
    cur.pos = 2;
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::parse(2, "expected whitespace after PGM magic"));
    }
    let (_, cols) = cur.unsigned("width", true)?;
    let (at, rows) = cur.unsigned("height", true)?;
    let (rows, cols, n) = shape(rows, cols, at)?;
    let (at, maxval) = cur.unsigned("maxval", true)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse(at, format!("maxval must be in 1..=255, got {maxval}")));
    }

    let data = if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if !cur.bytes.get(cur.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            return Err(Error::parse(cur.pos, "expected a single whitespace byte before binary data"));
        }
        cur.pos += 1;
        if cur.remaining() < n {
            return Err(Error::parse(
                cur.bytes.len(),
                format!("truncated payload: expected {n} bytes, found {}", cur.remaining()),
            ));
        }
        let payload = &bytes[cur.pos..cur.pos + n];
        if let Some(k) = payload.iter().position(|&b| u64::from(b) > maxval) {
            return Err(Error::parse(cur.pos + k, format!("sample {} exceeds maxval {maxval}", payload[k])));
        }
        payload.iter().map(|&b| f64::from(b)).collect()
    } else {
        // Every sample takes at least two bytes (digit + separator) but the last.
        if n > cur.remaining().div_ceil(2) {
            return Err(Error::parse(
                cur.bytes.len(),
                format!("truncated payload: {n} samples cannot fit in {} bytes", cur.remaining()),
            ));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let (at, v) = cur.unsigned("sample", false)?;
            if v > maxval {
                return Err(Error::parse(at, format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
        data
    };
    let image = Image::new(rows, cols, data).map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(Pgm { image, maxval: maxval as u16 })
}

/// Encodes samples as PGM, clamping to `[0, maxval]` and rounding half to
/// even.
pub fn encode_pgm(image: &Image, maxval: u16, binary: bool) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 255 {
        return Err(Error::Config(format!("maxval must be in 1..=255, got {maxval}")));
    }
    let samples = image
        .as_slice()
        .iter()
        .map(|v| v.clamp(0.0, f64::from(maxval)).round_ties_even() as u8);
    let mut out = format!("{}\n{} {}\n{}\n", if binary { "P5" } else { "P2" }, image.cols(), image.rows(), maxval).into_bytes();
    if binary {
        out.extend(samples);
    } else {
        let mut text = String::new();
        for (k, s) in samples.enumerate() {
            let sep = if (k + 1) % image.cols() == 0 { '\n' } else { ' ' };
            let _ = write!(text, "{s}{sep}");
        }
        out.extend(text.into_bytes());
    }
    Ok(out)
}

/// Decodes the float text format.
pub fn decode_float_text(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor::new(bytes);
    let (_, rows) = cur.unsigned("row count", false)?;
    let (at, cols) = cur.unsigned("column count", false)?;
    let (rows, cols, n) = shape(rows, cols, at)?;
    if n > cur.remaining() / 2 {
        return Err(Error::parse(
            cur.bytes.len(),
            format!("truncated payload: {n} values cannot fit in {} bytes", cur.remaining()),
        ));
    }
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let (at, text) = cur.token("value", false)?;
        let v: f64 = text
            .parse()
            .map_err(|_| Error::parse(at, format!("not a number: {text:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(at, format!("value must be finite, got {text}")));
        }
        data.push(v);
    }
    cur.skip_space();
    if cur.pos != bytes.len() {
        return Err(Error::parse(cur.pos, "trailing data after the last value"));
    }
    Image::new(rows, cols, data).map_err(|e| Error::parse(0, e.to_string()))
}

pub fn encode_float_text(image: &Image) -> String {
    let mut out = format!("{} {}\n", image.rows(), image.cols());
    for row in image.as_slice().chunks(image.cols()) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

/// Decodes an image, choosing the format from the leading bytes. PGM samples
/// are returned raw alongside the format.
pub fn decode_image(bytes: &[u8]) -> Result<(Image, ImageFormat)> {
    match bytes.get(..2) {
        Some(b"P2") => Ok((decode_pgm(bytes)?.image, ImageFormat::PgmPlain)),
        Some(b"P5") => Ok((decode_pgm(bytes)?.image, ImageFormat::PgmBinary)),
        _ => Ok((decode_float_text(bytes)?, ImageFormat::FloatText)),
    }
}

/// Reads an image file. PGM samples are divided by `maxval`, so both formats
/// yield intensities on a common scale.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path)?;
    match bytes.get(..2) {
        Some(b"P2") | Some(b"P5") => {
            let pgm = decode_pgm(&bytes)?;
            Ok(pgm.image.scale(1.0 / f64::from(pgm.maxval)))
        }
        _ => decode_float_text(&bytes),
    }
}

/// Writes an image; PGM output maps `[0, 1]` to `[0, 255]`.
pub fn write_image(path: &Path, image: &Image, format: ImageFormat) -> Result<()> {
    let bytes = match format {
        ImageFormat::FloatText => encode_float_text(image).into_bytes(),
        ImageFormat::PgmPlain => encode_pgm(&image.scale(255.0), 255, false)?,
        ImageFormat::PgmBinary => encode_pgm(&image.scale(255.0), 255, true)?,
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Ordered `key=value` metadata.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sidecar {
    entries: BTreeMap<String, String>,
}

impl Sidecar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("sidecar is missing {key:?}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("sidecar {key}={raw:?} is not a number")))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("sidecar {key}={raw:?} is not an unsigned integer")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let body = line.trim_end_matches(['\n', '\r']);
            let trimmed = body.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                let eq = body
                    .find('=')
                    .ok_or_else(|| Error::parse(offset, "expected key=value"))?;
                let key = body[..eq].trim();
                if key.is_empty() || key.contains(char::is_whitespace) {
                    return Err(Error::parse(offset, format!("invalid key {key:?}")));
                }
                if entries.insert(key.to_string(), body[eq + 1..].trim().to_string()).is_some() {
                    return Err(Error::parse(offset, format!("duplicate key {key:?}")));
                }
            }
            offset += line.len();
        }
        Ok(Sidecar { entries })
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_pgm_example() {
        let pgm = decode_pgm(b"P2\n2 2\n255\n0 128 255 64").unwrap();
        assert_eq!(pgm.image, Image::from_rows(&[&[0.0, 128.0], &[255.0, 64.0]]).unwrap());
        assert_eq!(pgm.maxval, 255);
    }

    #[test]
    fn pgm_comments_and_binary() {
        let pgm = decode_pgm(b"P5 # comment\n3 1\n# another\n200\n\x00\x10\xc8").unwrap();
        assert_eq!(pgm.image.as_slice(), &[0.0, 16.0, 200.0]);
        assert_eq!(pgm.maxval, 200);
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let err = decode_pgm(b"P5\n2 2\n255\n\x01\x02").unwrap_err();
        match err {
            Error::Parse { offset, message } => {
                assert_eq!(offset, 13);
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        for (bytes, offset) in [
            (&b"P3\n1 1\n255\n0"[..], 0),
            (b"P2\n1 x\n255\n0", 5),
            (b"P2\n0 1\n255\n", 5),
            (b"P2\n1 1\n256\n0", 7),
            (b"P2\n1 1\n255\n300", 11),
            (b"P2\n1 1\n", 7),
        ] {
            match decode_pgm(bytes) {
                Err(Error::Parse { offset: got, .. }) => assert_eq!(got, offset, "{:?}", String::from_utf8_lossy(bytes)),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn pgm_write_rounds_half_to_even_and_clamps() {
        let img = Image::row(&[0.5, 1.5, 2.5, -3.0, 300.0, 127.49]).unwrap();
        let bytes = encode_pgm(&img, 255, true).unwrap();
        let back = decode_pgm(&bytes).unwrap().image;
        assert_eq!(back.as_slice(), &[0.0, 2.0, 2.0, 0.0, 255.0, 127.0]);
        let plain = encode_pgm(&img, 255, false).unwrap();
        assert_eq!(decode_pgm(&plain).unwrap().image, back);
    }

    #[test]
    fn float_text_rejects_garbage() {
        assert!(matches!(decode_float_text(b"1 2\n0.5 abc\n"), Err(Error::Parse { offset: 8, .. })));
        assert!(matches!(decode_float_text(b"1 2\n0.5 1 7\n"), Err(Error::Parse { offset: 10, .. })));
        assert!(matches!(decode_float_text(b"1 1\nNaN\n"), Err(Error::Parse { offset: 4, .. })));
        assert!(matches!(decode_float_text(b"4000000000 4000000000\n1"), Err(Error::Parse { .. })));
    }

    #[test]
    fn sidecar_round_trip() {
        let mut s = Sidecar::new();
        s.set("t", 20.0).set("seed", 42).set("model", "poisson-logtv");
        let back = Sidecar::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get_f64("t").unwrap(), 20.0);
        assert_eq!(back.get_u64("seed").unwrap(), 42);
        assert!(back.get_f64("alpha").is_err());
        assert!(matches!(Sidecar::parse("a=1\n\nnovalue\n"), Err(Error::Parse { offset: 5, .. })));
        assert!(matches!(Sidecar::parse("a=1\na=2\n"), Err(Error::Parse { offset: 4, .. })));
        assert_eq!(Sidecar::parse("# note\n k = v \n").unwrap().get("k"), Some("v"));
    }

    #[test]
    fn sniffing() {
        assert_eq!(decode_image(b"P2 1 1 9 3").unwrap().1, ImageFormat::PgmPlain);
        assert_eq!(decode_image(b"1 1\n3.5\n").unwrap().1, ImageFormat::FloatText);
    }

    proptest! {
        #[test]
        fn float_text_round_trip_is_exact(rows in 1usize..5, cols in 1usize..5, seed in prop::collection::vec(any::<f64>(), 25)) {
            let data: Vec<f64> = seed.into_iter().take(rows * cols).map(|v| if v.is_finite() { v } else { 0.0 }).collect();
            prop_assume!(data.len() == rows * cols);
            let img = Image::new(rows, cols, data).unwrap();
            let back = decode_float_text(encode_float_text(&img).as_bytes()).unwrap();
            prop_assert_eq!(back.shape(), img.shape());
            for (a, b) in back.as_slice().iter().zip(img.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn pgm_round_trip(rows in 1usize..6, cols in 1usize..6, vals in prop::collection::vec(0u8..=255, 36), binary in any::<bool>()) {
            let data: Vec<f64> = vals.iter().take(rows * cols).map(|&v| f64::from(v)).collect();
            let img = Image::new(rows, cols, data).unwrap();
            let back = decode_pgm(&encode_pgm(&img, 255, binary).unwrap()).unwrap();
            prop_assert_eq!(back.image, img);
        }

        #[test]
        fn decoders_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_image(&bytes);
            let _ = Sidecar::parse(&String::from_utf8_lossy(&bytes));
        }
    }
}
