use std::path::Path;

use super::io::atomic_write;
use super::DataError;

/// Axis-aligned 2-D box `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Bounds {
    pub fn square(half: f64) -> Self {
        Self {
            x: (-half, half),
            y: (-half, half),
        }
    }

    /// Pixel `(col, row)` for a point; row 0 is the top edge.
    fn cell(&self, p: &[f64], res: usize) -> Option<(usize, usize)> {
        let u = (p[0] - self.x.0) / (self.x.1 - self.x.0);
        let v = (p[1] - self.y.0) / (self.y.1 - self.y.0);
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return None;
        }
        let col = ((u * res as f64) as usize).min(res - 1);
        let row = res - 1 - ((v * res as f64) as usize).min(res - 1);
        Some((col, row))
    }
}

/// Histogram counts (row-major, top row first) and the P5 file bytes.
/// Gray levels scale linearly with count, max count maps to 255.
pub fn render_sample_grid(samples: &[f64], bounds: Bounds, resolution: usize) -> Result<(Vec<u64>, Vec<u8>), DataError> {
    if resolution == 0 {
        return Err(DataError::InvalidConfig("resolution must be positive".into()));
    }
    if !samples.len().is_multiple_of(2) {
        return Err(DataError::InvalidConfig("sample grid needs 2-D points".into()));
    }
    if !(bounds.x.1 > bounds.x.0) || !(bounds.y.1 > bounds.y.0) {
        return Err(DataError::InvalidConfig("bounds must have positive extent".into()));
    }
    let mut counts = vec![0u64; resolution * resolution];
    for p in samples.chunks_exact(2) {
        if let Some((c, r)) = bounds.cell(p, resolution) {
            counts[r * resolution + c] += 1;
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut bytes = format!("P5\n{resolution} {resolution}\n255\n").into_bytes();
    bytes.extend(counts.iter().map(|&c| (c * 255 + max / 2).checked_div(max).unwrap_or(0) as u8));
    Ok((counts, bytes))
}

pub fn write_sample_grid(samples: &[f64], bounds: Bounds, resolution: usize, path: &Path) -> Result<(), DataError> {
    let (_, bytes) = render_sample_grid(samples, bounds, resolution)?;
    atomic_write(path, &bytes)
}
