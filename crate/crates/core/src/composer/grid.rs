use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ComposeError;
use crate::planner::BoundingBox;

const DUMP_MAGIC: &[u8; 4] = b"CXDL";
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl LatentShape {
    pub const fn new(height: usize, width: usize, channels: usize) -> LatentShape {
        LatentShape { height, width, channels }
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.cells() * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self) -> Result<(), ComposeError> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(ComposeError::InvalidLatent(format!("degenerate shape {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for LatentShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

pub(crate) fn mismatch(expected: impl fmt::Display, found: impl fmt::Display) -> ComposeError {
    ComposeError::ShapeMismatch { expected: expected.to_string(), found: found.to_string() }
}

/// Dense H×W×C grid, row-major and channels-last.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    shape: LatentShape,
    values: Vec<f64>,
}

impl LatentGrid {
    pub fn new(shape: LatentShape, values: Vec<f64>) -> Result<LatentGrid, ComposeError> {
        shape.check()?;
        if values.len() != shape.len() {
            return Err(ComposeError::InvalidLatent(format!("{} values for shape {shape}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ComposeError::InvalidLatent(format!("value {i} is not finite")));
        }
        Ok(LatentGrid { shape, values })
    }

    pub fn zeros(shape: LatentShape) -> Result<LatentGrid, ComposeError> {
        shape.check()?;
        Ok(LatentGrid { shape, values: vec![0.0; shape.len()] })
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.shape.width + col) * self.shape.channels + channel
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[self.index(row, col, channel)]
    }

    /// Channel vector of one cell.
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = self.index(row, col, 0);
        &self.values[start..start + self.shape.channels]
    }

    pub(crate) fn cells_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let c = self.shape.channels;
        self.values.chunks_exact_mut(c)
    }

    pub(crate) fn cells(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.shape.channels)
    }

    /// Per-channel maximum over all cells.
    pub fn channel_max(&self) -> Vec<f64> {
        self.channel_fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-channel minimum over all cells.
    pub fn channel_min(&self) -> Vec<f64> {
        self.channel_fold(f64::INFINITY, f64::min)
    }

    fn channel_fold(&self, init: f64, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut acc = vec![init; self.shape.channels];
        for cell in self.cells() {
            for (a, &v) in acc.iter_mut().zip(cell) {
                *a = f(*a, v);
            }
        }
        acc
    }

    pub fn require_shape(&self, shape: LatentShape) -> Result<(), ComposeError> {
        if self.shape != shape {
            return Err(mismatch(shape, self.shape));
        }
        Ok(())
    }

    /// Binary dump: "CXDL", u32 height, width, channels (little-endian), then
    /// every value as a little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.values.len());
        out.extend_from_slice(DUMP_MAGIC);
        for d in [self.shape.height, self.shape.width, self.shape.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LatentGrid, ComposeError> {
        if bytes.len() < 16 || &bytes[..4] != DUMP_MAGIC {
            return Err(ComposeError::InvalidLatent("missing CXDL header".into()));
        }
        let dim = |i: usize| {
            let raw: [u8; 4] = bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes");
            u32::from_le_bytes(raw) as usize
        };
        let shape = LatentShape::new(dim(0), dim(1), dim(2));
        let body = &bytes[16..];
        if body.len() != 8 * shape.len() {
            return Err(ComposeError::InvalidLatent(format!(
                "{} payload bytes for shape {shape}",
                body.len()
            )));
        }
        let values =
            body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        LatentGrid::new(shape, values)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(mut r: impl Read) -> Result<LatentGrid, ComposeError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| ComposeError::InvalidLatent(e.to_string()))?;
        LatentGrid::from_bytes(&bytes)
    }

    /// SHA-256 of the binary dump, lowercase hex.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Binary H×W mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<RegionMask, ComposeError> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(ComposeError::InvalidLatent(format!(
                "{} mask bits for {height}x{width}",
                bits.len()
            )));
        }
        Ok(RegionMask { height, width, bits })
    }

    pub fn full(height: usize, width: usize) -> RegionMask {
        RegionMask { height, width, bits: vec![true; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn require_fits(&self, shape: LatentShape) -> Result<(), ComposeError> {
        if self.height != shape.height || self.width != shape.width {
            return Err(mismatch(
                format!("{}x{} mask", shape.height, shape.width),
                format!("{}x{} mask", self.height, self.width),
            ));
        }
        Ok(())
    }
}

fn cell_range(start: f64, extent: f64, cells: usize) -> (usize, usize) {
    let n = cells as f64;
    let lo = (start * n + SNAP).floor().max(0.0) as usize;
    let hi = ((start + extent) * n - SNAP).ceil().max(0.0) as usize;
    let lo = lo.min(cells - 1);
    let hi = hi.clamp(lo + 1, cells);
    (lo, hi)
}

/// Scales a normalized box onto an H×W grid, rounding outward.
///
/// Rows `floor(y·H) .. ceil((y+h)·H)` and the matching columns are set, clamped
/// to the grid and never empty. Products within 1e-9 of an integer are snapped
/// so that boxes on exact cell edges do not pick up a neighbour.
pub fn resize_box(bbox: &BoundingBox, height: usize, width: usize) -> RegionMask {
    assert!(height > 0 && width > 0, "mask dimensions must be positive");
    let (r0, r1) = cell_range(bbox.y, bbox.h, height);
    let (c0, c1) = cell_range(bbox.x, bbox.w, width);
    let mut bits = vec![false; height * width];
    for r in r0..r1 {
        bits[r * width + c0..r * width + c1].fill(true);
    }
    RegionMask { height, width, bits }
}
