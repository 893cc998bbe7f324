//! Grayscale heatmaps of adjacency submatrices as binary PGM (P5) images.
//! Zero maps to white and the window maximum to black; a window whose values
//! are all equal renders white.

use std::path::Path;

use glnn_core::Matrix;

use crate::output::write_atomic;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row0: usize,
    pub col0: usize,
    pub size: usize,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            row0: 0,
            col0: 0,
            size: 30,
        }
    }
}

impl Window {
    pub fn fits(&self, m: &Matrix) -> bool {
        self.size > 0 && self.row0 + self.size <= m.rows() && self.col0 + self.size <= m.cols()
    }

    /// The window clipped to the matrix, anchored at its origin. Used when a
    /// small graph cannot hold the default window.
    pub fn clipped_to(&self, m: &Matrix) -> Window {
        let size = self.size.min(m.rows()).min(m.cols());
        Window {
            row0: self.row0.min(m.rows() - size),
            col0: self.col0.min(m.cols() - size),
            size,
        }
    }
}

pub fn render_pgm(m: &Matrix, w: Window) -> Result<Vec<u8>> {
    if !w.fits(m) {
        return Err(HarnessError::Config(format!(
            "heatmap window {}x{} at ({}, {}) does not fit a {}x{} matrix",
            w.size,
            w.size,
            w.row0,
            w.col0,
            m.rows(),
            m.cols()
        )));
    }
    let cells = (w.row0..w.row0 + w.size)
        .flat_map(|r| (w.col0..w.col0 + w.size).map(move |c| (r, c)))
        .map(|(r, c)| m.get(r, c));
    let max = cells.clone().fold(0.0_f64, f64::max);
    let mut out = format!("P5\n{} {}\n255\n", w.size, w.size).into_bytes();
    out.extend(cells.map(|v| {
        if max > 0.0 {
            let t = (v.max(0.0) / max).min(1.0);
            (255.0 * (1.0 - t)).round() as u8
        } else {
            255
        }
    }));
    Ok(out)
}

pub fn export_heatmap(m: &Matrix, w: Window, path: &Path) -> Result<()> {
    let bytes = render_pgm(m, w)?;
    write_atomic(path, &bytes)?;
    Ok(())
}
