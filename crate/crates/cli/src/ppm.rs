//! Binary PPM/PGM (P6/P5, maxval 255) reading and writing. Bit-exact,
//! dependency-free, and easy to diff; conversion to anything fancier is
//! the user's concern.

use crate::CliError;
use dcsplat_core::Raster;
use std::io::{Read, Write};
use std::path::Path;

/// Writes a raster as binary PGM (1 channel) or PPM (3 channels), with
/// values clamped to [0, 1] and scaled to maxval 255.
pub fn write_ppm(path: &Path, raster: &Raster) -> Result<(), CliError> {
    let clamped = raster.clamped01();
    let magic = if raster.channels() == 1 { "P5" } else { "P6" };
    let mut out = Vec::with_capacity(32 + clamped.data().len());
    out.extend_from_slice(
        format!("{magic}\n{} {}\n255\n", raster.width(), raster.height()).as_bytes(),
    );
    for v in clamped.data() {
        out.push((v * 255.0).round() as u8);
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Reads a binary P5/P6 file into a raster with values in [0, 1].
pub fn read_ppm(path: &Path) -> Result<Raster, CliError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    parse_ppm(&bytes).map_err(|msg| CliError::Runtime(format!("{}: {msg}", path.display())))
}

fn parse_ppm(bytes: &[u8]) -> Result<Raster, String> {
    let mut pos = 0usize;

    let channels = match bytes.get(0..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err("not a binary P5/P6 file".into()),
    };
    pos += 2;

    // Header tokens may be separated by whitespace and '#' comments.
    let next_token = |pos: &mut usize| -> Result<u32, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err("truncated header".into());
        }
        std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse::<u32>()
            .map_err(|e| e.to_string())
    };

    let width = next_token(&mut pos)? as usize;
    let height = next_token(&mut pos)? as usize;
    let maxval = next_token(&mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // Exactly one whitespace byte between header and payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing header terminator".into());
    }
    pos += 1;

    let need = width * height * channels;
    let payload = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format!("payload too short: need {need} bytes"))?;
    let data = payload.iter().map(|&b| b as f64 / maxval as f64).collect();
    Raster::from_data(width, height, channels, data).map_err(|e| e.to_string())
}
