//! Binary PPM (`P6`, maxval 255).

use std::io::{self, Read, Write};

use ttc_core::Image;

#[derive(Debug, thiserror::Error)]
pub enum PpmError {
    #[error("not a binary PPM (expected magic P6)")]
    BadMagic,
    #[error("malformed PPM header: {0}")]
    Header(&'static str),
    #[error("only maxval 255 is supported, found {0}")]
    MaxVal(u32),
    #[error("PPM pixel data has {have} bytes, expected {want}")]
    Truncated { have: usize, want: usize },
    #[error("image dimensions {0}x{1} are out of range")]
    Dimensions(u32, u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_ppm(image: &Image, mut out: impl Write) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", image.width(), image.height())?;
    out.write_all(&image.to_rgb_bytes())?;
    out.flush()
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.pixels().len() * 3 + 16);
    write_ppm(image, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn read_ppm(mut input: impl Read) -> Result<Image, PpmError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_ppm(&bytes)
}

/// Parses a `P6` file. Header fields may be separated by any whitespace and
/// interleaved with `#` comments; exactly one whitespace byte precedes the
/// pixel data, which must fill the image exactly.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image, PpmError> {
    if !bytes.starts_with(b"P6") {
        return Err(PpmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(PpmError::Header("unexpected end of header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(PpmError::Header("expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PpmError::Header("number too large"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PpmError::Header("missing whitespace before pixel data"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(PpmError::MaxVal(maxval));
    }
    let want = width as usize * height as usize * 3;
    let data = &bytes[pos..];
    if data.len() != want {
        return Err(PpmError::Truncated {
            have: data.len(),
            want,
        });
    }
    let image = Image::from_rgb_bytes(width, height, data).ok_or(PpmError::Dimensions(width, height))?;
    if !image.canvas().is_valid() {
        return Err(PpmError::Dimensions(width, height));
    }
    Ok(image)
}
