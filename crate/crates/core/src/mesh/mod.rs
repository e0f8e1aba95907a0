//! Cartesian background mesh with lexicographic cell and face numbering.

pub mod batches;
pub mod dofs;
pub mod partition;

use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use crate::scalar::Real;

/// Uniform Cartesian grid on an axis-aligned box. Cells are numbered with x
/// running fastest. Faces are grouped by normal direction; within a group
/// they are numbered lexicographically on the grid of face positions, which
/// has one extra layer along the normal.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianMesh<T> {
    pub dim: usize,
    pub origin: [T; 3],
    pub extent: [T; 3],
    pub cells: [usize; 3],
    pub refinements: usize,
    pub h: [T; 3],
    face_offsets: [usize; 4],
}

impl<T: Real> CartesianMesh<T> {
    /// `n * 2^refinements` cells per direction on `[origin, origin + extent]^dim`.
    pub fn build(dim: usize, origin: T, extent: T, n: usize, refinements: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMesh("need at least one cell per direction".into()));
        }
        if refinements >= 32 {
            return Err(Error::IndexOverflow(u128::MAX));
        }
        let per_dim = (n as u128) << refinements;
        if per_dim > usize::MAX as u128 {
            return Err(Error::IndexOverflow(per_dim));
        }
        let mut cells = [1usize; 3];
        let mut o = [T::zero(); 3];
        let mut e = [T::zero(); 3];
        for a in 0..dim {
            cells[a] = per_dim as usize;
            o[a] = origin;
            e[a] = extent;
        }
        let mut mesh = Self::with_cells(dim, o, e, cells)?;
        mesh.refinements = refinements;
        Ok(mesh)
    }

    /// Anisotropic cell counts per direction.
    pub fn with_cells(dim: usize, origin: [T; 3], extent: [T; 3], cells: [usize; 3]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let mut cells = cells;
        let mut origin = origin;
        let mut extent = extent;
        for a in 0..3 {
            if a >= dim {
                cells[a] = 1;
                origin[a] = T::zero();
                extent[a] = T::zero();
            } else if cells[a] == 0 || !(extent[a] > T::zero()) {
                return Err(Error::InvalidMesh(format!(
                    "direction {a}: {} cells over extent {}",
                    cells[a], extent[a]
                )));
            }
        }
        let total_cells = cells.iter().map(|&c| c as u128).product::<u128>();
        if total_cells > u32::MAX as u128 {
            return Err(Error::IndexOverflow(total_cells));
        }
        let mut h = [T::zero(); 3];
        for a in 0..dim {
            h[a] = extent[a] / T::of_usize(cells[a]);
        }
        let mut face_offsets = [0usize; 4];
        for a in 0..3 {
            let count = if a < dim {
                (0..dim)
                    .map(|b| if b == a { cells[b] + 1 } else { cells[b] })
                    .product::<usize>()
            } else {
                0
            };
            face_offsets[a + 1] = face_offsets[a] + count;
        }
        Ok(Self { dim, origin, extent, cells, refinements: 0, h, face_offsets })
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1] * self.cells[2]
    }

    pub fn n_faces(&self) -> usize {
        self.face_offsets[3]
    }

    /// Characteristic element size used in penalty scalings.
    pub fn h_min(&self) -> T {
        (0..self.dim).fold(T::infinity(), |m, a| m.min(self.h[a]))
    }

    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.cells[0] * (c[1] + self.cells[1] * c[2])
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let i = cell % self.cells[0];
        let r = cell / self.cells[0];
        [i, r % self.cells[1], r / self.cells[1]]
    }

    pub fn cell_box(&self, cell: usize) -> AxisBox<T> {
        let c = self.cell_coords(cell);
        let mut lo = [T::zero(); 3];
        let mut hi = [T::zero(); 3];
        for a in 0..self.dim {
            lo[a] = self.origin[a] + self.h[a] * T::of_usize(c[a]);
            hi[a] = if c[a] + 1 == self.cells[a] {
                self.origin[a] + self.extent[a]
            } else {
                self.origin[a] + self.h[a] * T::of_usize(c[a] + 1)
            };
        }
        AxisBox::new(lo, hi, self.dim)
    }

    /// Extent of the face-position grid for normal direction `dir`.
    fn face_grid(&self, dir: usize) -> [usize; 3] {
        let mut g = self.cells;
        g[dir] += 1;
        g
    }

    /// Normal direction and grid position of a face.
    pub fn face_coords(&self, face: usize) -> (usize, [usize; 3]) {
        let dir = (0..self.dim).find(|&a| face < self.face_offsets[a + 1]).expect("face index in range");
        let local = face - self.face_offsets[dir];
        let g = self.face_grid(dir);
        let i = local % g[0];
        let r = local / g[0];
        (dir, [i, r % g[1], r / g[1]])
    }

    pub fn face_index(&self, dir: usize, pos: [usize; 3]) -> usize {
        let g = self.face_grid(dir);
        self.face_offsets[dir] + pos[0] + g[0] * (pos[1] + g[1] * pos[2])
    }

    /// Global index of local face `2*dir + side` of `cell` (side 0 at the
    /// lower coordinate).
    pub fn cell_face(&self, cell: usize, local: usize) -> usize {
        let dir = local / 2;
        let mut c = self.cell_coords(cell);
        c[dir] += local % 2;
        self.face_index(dir, c)
    }

    /// Cells adjacent to a face: the one below (for which it is local face
    /// `2*dir + 1`) and the one above (local face `2*dir`).
    pub fn face_cells(&self, face: usize) -> (usize, Option<usize>, Option<usize>) {
        let (dir, pos) = self.face_coords(face);
        let minus = (pos[dir] > 0).then(|| {
            let mut c = pos;
            c[dir] -= 1;
            self.cell_index(c)
        });
        let plus = (pos[dir] < self.cells[dir]).then(|| self.cell_index(pos));
        (dir, minus, plus)
    }

    pub fn face_box(&self, face: usize) -> AxisBox<T> {
        let (dir, pos) = self.face_coords(face);
        let mut c = pos;
        let upper = pos[dir] == self.cells[dir];
        if upper {
            c[dir] -= 1;
        }
        let mut b = self.cell_box(self.cell_index(c));
        if upper {
            b.lo[dir] = b.hi[dir];
        } else {
            b.hi[dir] = b.lo[dir];
        }
        b
    }

    /// Neighbor across local face `local`, if inside the mesh.
    pub fn neighbor(&self, cell: usize, local: usize) -> Option<usize> {
        let dir = local / 2;
        let mut c = self.cell_coords(cell);
        if local % 2 == 0 {
            if c[dir] == 0 {
                return None;
            }
            c[dir] -= 1;
        } else {
            if c[dir] + 1 == self.cells[dir] {
                return None;
            }
            c[dir] += 1;
        }
        Some(self.cell_index(c))
    }

    /// Physical coordinates of a reference point of `cell`.
    pub fn map_point(&self, cell: usize, r: &[T; 3]) -> [T; 3] {
        let b = self.cell_box(cell);
        let mut x = [T::zero(); 3];
        for a in 0..self.dim {
            x[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * r[a];
        }
        x
    }
}
