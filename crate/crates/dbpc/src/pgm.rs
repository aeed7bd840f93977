//! Binary PGM (P5) images, the output format for reconstructions.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Write intensities as a binary P5 file. Values are clipped to
/// `[0, max_intensity]` and scaled to the byte range, row-major.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    values: &[f64],
    max_intensity: f64,
) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Shape(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| ((v.clamp(0.0, max_intensity) / max_intensity) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Read a binary P5 file with maxval 255, returning (width, height,
/// intensities scaled into the unit interval).
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    fn token(bytes: &[u8], pos: &mut usize) -> Result<String> {
        // skip whitespace and # comments
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
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Format(format!(
                "pgm: truncated header at offset {start}"
            )));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    }
    let mut pos = 0;
    let magic = token(&bytes, &mut pos)?;
    if magic != "P5" {
        return Err(Error::Format(format!(
            "pgm: expected P5 at offset 0, got {magic:?}"
        )));
    }
    let width: usize = token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Format("pgm: bad width".into()))?;
    let height: usize = token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Format("pgm: bad height".into()))?;
    let maxval: usize = token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Format("pgm: bad maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Format(format!("pgm: unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::Format(format!(
            "pgm: truncated pixel data at offset {pos} (wanted {need} bytes)"
        )));
    }
    let values = bytes[pos..pos + need]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Ok((width, height, values))
}
