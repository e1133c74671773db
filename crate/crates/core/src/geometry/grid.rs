use std::io::{Read, Write};

use rayon::prelude::*;

use super::csg::MembershipOracle;
use super::{Aabb, GeometryError, Point};

/// Magic bytes opening a grid dump.
pub const GRID_MAGIC: &[u8; 4] = b"OCCG";

/// `resolution³` cells over `frame`; cell `(i, j, k)` is set iff its center
/// is inside the solid. Cells are stored x-major: `(i * res + j) * res + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: usize,
    frame: Aabb,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn frame(&self) -> &Aabb {
        &self.frame
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[self.index(i, j, k)]
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn fraction(&self) -> f64 {
        self.occupied() as f64 / self.cells.len() as f64
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Point {
        cell_center(&self.frame, self.resolution, i, j, k)
    }

    /// Debug dump: 16-byte header (`OCCG`, u32 LE resolution, two reserved
    /// u32 zeros) followed by the cells bit-packed LSB-first in index order.
    pub fn write_dump(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header = [0u8; 16];
        header[..4].copy_from_slice(GRID_MAGIC);
        header[4..8].copy_from_slice(&(self.resolution as u32).to_le_bytes());
        w.write_all(&header)?;
        let mut bytes = vec![0u8; self.cells.len().div_ceil(8)];
        for (i, &c) in self.cells.iter().enumerate() {
            if c {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bytes)
    }

    /// Reads a dump written by [`write_dump`](Self::write_dump). The frame is
    /// not stored, so the caller supplies it.
    pub fn read_dump(mut r: impl Read, frame: Aabb) -> std::io::Result<OccupancyGrid> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != GRID_MAGIC {
            return Err(bad("bad grid magic"));
        }
        let resolution = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let n = resolution.pow(3);
        let mut bytes = vec![0u8; n.div_ceil(8)];
        r.read_exact(&mut bytes)?;
        let cells = (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok(OccupancyGrid {
            resolution,
            frame,
            cells,
        })
    }
}

fn cell_center(frame: &Aabb, res: usize, i: usize, j: usize, k: usize) -> Point {
    let step = frame.extent() / res as f64;
    Point::new(
        frame.min.x + (i as f64 + 0.5) * step.x,
        frame.min.y + (j as f64 + 0.5) * step.y,
        frame.min.z + (k as f64 + 0.5) * step.z,
    )
}

/// Rasterizes the solid by testing every cell center.
pub fn occupancy_grid(
    o: &MembershipOracle,
    resolution: usize,
    frame: Aabb,
) -> Result<OccupancyGrid, GeometryError> {
    if resolution < 2 {
        return Err(GeometryError::InvalidArgument(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let res = resolution;
    let mut cells = vec![false; res * res * res];
    cells
        .par_chunks_mut(res * res)
        .enumerate()
        .for_each(|(i, slab)| {
            for j in 0..res {
                for k in 0..res {
                    slab[j * res + k] = o.contains(&cell_center(&frame, res, i, j, k));
                }
            }
        });
    Ok(OccupancyGrid {
        resolution,
        frame,
        cells,
    })
}
