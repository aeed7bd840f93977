//! Flat binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic bytes "DBPC"
//!        4   u32 format version (currently 1)
//!        8   u32 layer count L
//!       12   u32 input height
//!       16   u32 input width
//!       20   L records of 9 bytes: u8 kind (1 = fully connected,
//!            2 = convolutional, 3 = classifier), u32 size, u32 kernel
//!            (0 when not applicable)
//!  20 + 9L   weight blocks in interface order, each a raw run of f64
//!            little-endian values in storage order; lengths follow from
//!            the layer table
//! ```
//!
//! A checkpoint fully describes its architecture, so `eval` and
//! `reconstruct` can run from the file alone.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{LayerSpec, NetworkParams};

const MAGIC: &[u8; 4] = b"DBPC";
const VERSION: u32 = 1;

pub fn save(path: &Path, params: &NetworkParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.layer_count() as u32).to_le_bytes())?;
    let (h, wd) = params.input_hw();
    w.write_all(&(h as u32).to_le_bytes())?;
    w.write_all(&(wd as u32).to_le_bytes())?;
    for spec in params.specs() {
        let (kind, size, kernel) = match *spec {
            LayerSpec::FullyConnected { units } => (1u8, units, 0),
            LayerSpec::Convolutional { channels, kernel } => (2, channels, kernel),
            LayerSpec::Classifier { classes } => (3, classes, 0),
        };
        w.write_all(&[kind])?;
        w.write_all(&(size as u32).to_le_bytes())?;
        w.write_all(&(kernel as u32).to_le_bytes())?;
    }
    for block in params.blocks() {
        for &v in block.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    reader: R,
    offset: usize,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.reader.read_exact(&mut buf).map_err(|_| {
            Error::Checkpoint(format!(
                "truncated at offset {} (wanted {N} bytes)",
                self.offset
            ))
        })?;
        self.offset += N;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
}

pub fn load(path: &Path) -> Result<NetworkParams> {
    let file = File::open(path)
        .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
    let mut cur = Cursor {
        reader: BufReader::new(file),
        offset: 0,
    };
    let magic: [u8; 4] = cur.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic at offset 0: {magic:?} (expected {MAGIC:?})"
        )));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} at offset 4 (expected {VERSION})"
        )));
    }
    let layers = cur.u32()? as usize;
    let h = cur.u32()? as usize;
    let w = cur.u32()? as usize;
    let mut specs = Vec::with_capacity(layers);
    for l in 0..layers {
        let record_offset = cur.offset;
        let kind = cur.bytes::<1>()?[0];
        let size = cur.u32()? as usize;
        let kernel = cur.u32()? as usize;
        let spec = match kind {
            1 => LayerSpec::FullyConnected { units: size },
            2 => LayerSpec::Convolutional {
                channels: size,
                kernel,
            },
            3 => LayerSpec::Classifier { classes: size },
            other => {
                return Err(Error::Checkpoint(format!(
                    "unknown layer kind {other} for layer {} at offset {record_offset}",
                    l + 1
                )))
            }
        };
        specs.push(spec);
    }
    let mut params = NetworkParams::zeroed(specs, (h, w))
        .map_err(|e| Error::Checkpoint(format!("invalid layer table: {e}")))?;
    for j in 1..=params.interface_count() {
        let count = params.block(j).weight_count();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64::from_le_bytes(cur.bytes()?));
        }
        params
            .block_mut(j)
            .set_values(&values)
            .map_err(|e| Error::Checkpoint(format!("weight block {j}: {e}")))?;
    }
    Ok(params)
}
