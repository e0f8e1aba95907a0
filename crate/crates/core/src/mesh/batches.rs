//! Grouping of cells and faces into lane batches.

use crate::error::{Error, Result};
use crate::geometry::{CellCategory, FaceCategory};
use crate::lanes::SUPPORTED_WIDTHS;
use crate::mesh::dofs::DofHandler;
use crate::scalar::Real;

pub const MAX_LANES: usize = 16;

/// Up to `W` active cells of one category.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellBatch {
    pub cells: [u32; MAX_LANES],
    pub len: usize,
    pub category: CellCategory,
}

impl CellBatch {
    pub fn lanes(&self) -> &[u32] {
        &self.cells[..self.len]
    }
}

/// Up to `W` faces (indices into `DofHandler::faces`) with the same normal
/// direction, i.e. the same pair of local face numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceBatch {
    pub faces: [u32; MAX_LANES],
    pub len: usize,
    pub dir: usize,
}

impl FaceBatch {
    pub fn lanes(&self) -> &[u32] {
        &self.faces[..self.len]
    }
}

pub fn check_lanes(lanes: usize) -> Result<()> {
    if SUPPORTED_WIDTHS.contains(&lanes) {
        Ok(())
    } else {
        Err(Error::UnsupportedLanes(lanes))
    }
}

/// Batches over the given active cells (ascending): consecutive runs of
/// `lanes` cells per category, ordered by their first cell.
pub fn cell_batches<T: Real>(handler: &DofHandler<T>, cells: &[u32], lanes: usize) -> Result<Vec<CellBatch>> {
    check_lanes(lanes)?;
    let mut out = Vec::new();
    for cat in [CellCategory::Inside, CellCategory::Intersected] {
        let members: Vec<u32> = cells.iter().copied().filter(|&a| handler.category_of(a as usize) == cat).collect();
        for chunk in members.chunks(lanes) {
            let mut b = CellBatch { cells: [0; MAX_LANES], len: chunk.len(), category: cat };
            b.cells[..chunk.len()].copy_from_slice(chunk);
            out.push(b);
        }
    }
    out.sort_by_key(|b| b.cells[0]);
    Ok(out)
}

/// Batches over the given faces (indices into `handler.faces`), grouped by
/// normal direction.
pub fn face_batches<T: Real>(handler: &DofHandler<T>, faces: &[u32], lanes: usize) -> Result<Vec<FaceBatch>> {
    check_lanes(lanes)?;
    let mut out = Vec::new();
    for dir in 0..handler.dim() {
        let members: Vec<u32> = faces.iter().copied().filter(|&f| handler.faces[f as usize].dir == dir).collect();
        for chunk in members.chunks(lanes) {
            let mut b = FaceBatch { faces: [0; MAX_LANES], len: chunk.len(), dir };
            b.faces[..chunk.len()].copy_from_slice(chunk);
            out.push(b);
        }
    }
    out.sort_by_key(|b| b.faces[0]);
    Ok(out)
}

/// Cell batches over all active cells and face batches over all faces
/// between active cells that are not outside the domain.
pub fn build_batches<T: Real>(handler: &DofHandler<T>, lanes: usize) -> Result<(Vec<CellBatch>, Vec<FaceBatch>)> {
    let cells: Vec<u32> = (0..handler.n_active() as u32).collect();
    let faces: Vec<u32> = handler
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.category != FaceCategory::Outside)
        .map(|(i, _)| i as u32)
        .collect();
    Ok((cell_batches(handler, &cells, lanes)?, face_batches(handler, &faces, lanes)?))
}
