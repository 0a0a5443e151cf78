//! Multi-plane raster files: a text header followed by little-endian f64
//! samples, plane-major, rows top to bottom.
//!
//! ```text
//! MCRASTER 1
//! width 128
//! height 128
//! planes 2
//! plane log_i1
//! plane coherence_mag
//! end
//! <width * height * planes * 8 bytes>
//! ```

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use matchange_core::Grid;

pub const MAGIC: &str = "MCRASTER 1";

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad raster header: {0}")]
    Header(String),
    #[error("payload holds {actual} bytes, header promises {expected}")]
    Payload { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterFile {
    pub width: usize,
    pub height: usize,
    pub names: Vec<String>,
    pub planes: Vec<Vec<f64>>,
}

impl RasterFile {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            names: Vec::new(),
            planes: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, grid: &Grid<f64>) -> Result<(), RasterError> {
        if grid.dims() != (self.width, self.height) {
            return Err(RasterError::Header(format!(
                "plane {name} is {}x{}, raster is {}x{}",
                grid.width(),
                grid.height(),
                self.width,
                self.height
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(RasterError::Header(format!("plane name `{name}` must be a single word")));
        }
        self.names.push(name.to_string());
        self.planes.push(grid.as_slice().to_vec());
        Ok(())
    }

    pub fn push_mask(&mut self, name: &str, mask: &Grid<bool>) -> Result<(), RasterError> {
        self.push(name, &mask.map(|&b| if b { 1.0 } else { 0.0 }))
    }

    pub fn plane(&self, name: &str) -> Option<Grid<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Grid::from_vec(self.width, self.height, self.planes[i].clone()).ok()
    }

    pub fn mask(&self, name: &str) -> Option<Grid<bool>> {
        self.plane(name).map(|g| g.map(|&v| v != 0.0))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), RasterError> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "width {}", self.width)?;
        writeln!(w, "height {}", self.height)?;
        writeln!(w, "planes {}", self.planes.len())?;
        for n in &self.names {
            writeln!(w, "plane {n}")?;
        }
        writeln!(w, "end")?;
        for p in &self.planes {
            for v in p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self, RasterError> {
        if next(r)? != MAGIC {
            return Err(RasterError::Header("missing MCRASTER 1 magic".into()));
        }
        let field = |r: &mut dyn BufRead, key: &str| -> Result<usize, RasterError> {
            let l = next(r)?;
            l.strip_prefix(key)
                .and_then(|v| v.strip_prefix(' '))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| RasterError::Header(format!("expected `{key} <n>`, got `{l}`")))
        };
        let width = field(r, "width")?;
        let height = field(r, "height")?;
        let count = field(r, "planes")?;
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            let l = next(r)?;
            let n = l
                .strip_prefix("plane ")
                .filter(|n| !n.is_empty())
                .ok_or_else(|| RasterError::Header(format!("expected `plane <name>`, got `{l}`")))?;
            names.push(n.to_string());
        }
        if next(r)? != "end" {
            return Err(RasterError::Header("missing `end`".into()));
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let expected = width * height * count * 8;
        if payload.len() != expected {
            return Err(RasterError::Payload {
                expected,
                actual: payload.len(),
            });
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let planes = if count == 0 {
            Vec::new()
        } else {
            values.chunks(width * height).map(<[f64]>::to_vec).collect()
        };
        Ok(Self {
            width,
            height,
            names,
            planes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RasterError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn next(r: &mut dyn BufRead) -> Result<String, RasterError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(RasterError::Header("unexpected end of header".into()));
    }
    Ok(line.trim_end_matches('\n').to_string())
}
