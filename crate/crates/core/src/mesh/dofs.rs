//! Degree-of-freedom numbering for continuous and discontinuous Lagrange
//! elements on the active (inside or intersected) cells.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{classify_cell, classify_face, CellCategory, FaceCategory, LevelSet};
use crate::mesh::CartesianMesh;
use crate::scalar::Real;

pub const INVALID: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeKind {
    Cg,
    Dg,
}

impl FeKind {
    pub fn name(self) -> &'static str {
        match self {
            FeKind::Cg => "cg",
            FeKind::Dg => "dg",
        }
    }
}

/// Face shared by two active cells. `minus` lies below the face along `dir`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorFace {
    pub face: usize,
    pub dir: usize,
    pub minus: u32,
    pub plus: u32,
    pub category: FaceCategory,
}

#[derive(Clone, Debug)]
pub struct DofHandler<T> {
    pub mesh: CartesianMesh<T>,
    pub fe: FeKind,
    pub degree: usize,
    /// Nodes per direction, `degree + 1`.
    pub k: usize,
    pub categories: Vec<CellCategory>,
    /// Active cells in increasing cell index.
    pub active: Vec<usize>,
    active_of: Vec<u32>,
    /// `dofs_per_cell` global indices per active cell, x fastest.
    pub cell_dofs: Vec<u32>,
    pub n_dofs: usize,
    /// Faces between two active cells, in increasing face index.
    pub faces: Vec<InteriorFace>,
}

impl<T: Real> DofHandler<T> {
    /// Classifies cells and faces against `ls` with `(p+2)^d` samples and
    /// numbers the DoFs of all active cells.
    pub fn build(mesh: CartesianMesh<T>, ls: &LevelSet<T>, fe: FeKind, degree: usize) -> Result<Self> {
        if degree == 0 || degree > 7 {
            return Err(Error::UnsupportedDegree(degree));
        }
        let samples = degree + 2;
        let categories: Vec<CellCategory> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let b = mesh.cell_box(c);
                let local = ls.localize(&b.center(), b.half_diagonal());
                classify_cell(&local, &b, samples)
            })
            .collect();
        Self::with_categories(mesh, ls, categories, fe, degree)
    }

    /// Numbering for given cell categories; face categories are still
    /// computed from `ls`.
    pub fn with_categories(
        mesh: CartesianMesh<T>,
        ls: &LevelSet<T>,
        categories: Vec<CellCategory>,
        fe: FeKind,
        degree: usize,
    ) -> Result<Self> {
        if degree == 0 || degree > 7 {
            return Err(Error::UnsupportedDegree(degree));
        }
        if categories.len() != mesh.n_cells() {
            return Err(Error::DimensionMismatch { expected: mesh.n_cells(), got: categories.len() });
        }
        let dim = mesh.dim;
        let k = degree + 1;
        let per_cell = k.pow(dim as u32);
        let active: Vec<usize> = (0..mesh.n_cells())
            .filter(|&c| categories[c] != CellCategory::Outside)
            .collect();
        let mut active_of = vec![INVALID; mesh.n_cells()];
        for (i, &c) in active.iter().enumerate() {
            active_of[c] = i as u32;
        }
        let total = active.len() as u128 * per_cell as u128;
        if total > u32::MAX as u128 {
            return Err(Error::IndexOverflow(total));
        }
        let mut cell_dofs = vec![0u32; active.len() * per_cell];
        let n_dofs = match fe {
            FeKind::Dg => {
                for (i, v) in cell_dofs.iter_mut().enumerate() {
                    *v = i as u32;
                }
                active.len() * per_cell
            }
            FeKind::Cg => {
                let mut lattice = [1usize; 3];
                for a in 0..dim {
                    lattice[a] = mesh.cells[a] * degree + 1;
                }
                let n_nodes = lattice[0] * lattice[1] * lattice[2];
                let node = |c: [usize; 3], l: usize| -> usize {
                    let li = [l % k, (l / k) % k, l / (k * k)];
                    let mut g = [0usize; 3];
                    for a in 0..dim {
                        g[a] = c[a] * degree + li[a];
                    }
                    g[0] + lattice[0] * (g[1] + lattice[1] * g[2])
                };
                let mut number = vec![INVALID; n_nodes];
                for &c in &active {
                    let cc = mesh.cell_coords(c);
                    for l in 0..per_cell {
                        number[node(cc, l)] = 0;
                    }
                }
                let mut next = 0u32;
                for v in number.iter_mut() {
                    if *v != INVALID {
                        *v = next;
                        next += 1;
                    }
                }
                for (i, &c) in active.iter().enumerate() {
                    let cc = mesh.cell_coords(c);
                    for l in 0..per_cell {
                        cell_dofs[i * per_cell + l] = number[node(cc, l)];
                    }
                }
                next as usize
            }
        };
        let samples = degree + 2;
        let faces: Vec<InteriorFace> = (0..mesh.n_faces())
            .into_par_iter()
            .filter_map(|f| {
                let (dir, minus, plus) = mesh.face_cells(f);
                let (m, p) = (active_of[minus?], active_of[plus?]);
                if m == INVALID || p == INVALID {
                    return None;
                }
                let b = mesh.face_box(f);
                let local = ls.localize(&b.center(), b.half_diagonal());
                Some(InteriorFace { face: f, dir, minus: m, plus: p, category: classify_face(&local, &b, samples) })
            })
            .collect();
        Ok(Self { mesh, fe, degree, k, categories, active, active_of, cell_dofs, n_dofs, faces })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.k.pow(self.mesh.dim as u32)
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Active index of a cell, if the cell is active.
    pub fn active_index(&self, cell: usize) -> Option<usize> {
        let a = self.active_of[cell];
        (a != INVALID).then_some(a as usize)
    }

    pub fn dofs_of(&self, active_idx: usize) -> &[u32] {
        let n = self.dofs_per_cell();
        &self.cell_dofs[active_idx * n..(active_idx + 1) * n]
    }

    pub fn category_of(&self, active_idx: usize) -> CellCategory {
        self.categories[self.active[active_idx]]
    }

    pub fn count(&self, category: CellCategory) -> usize {
        self.categories.iter().filter(|&&c| c == category).count()
    }

    /// Fraction of active cells that are intersected.
    pub fn cut_ratio(&self) -> f64 {
        if self.active.is_empty() {
            0.0
        } else {
            self.count(CellCategory::Intersected) as f64 / self.active.len() as f64
        }
    }

    /// Physical position of every DoF (nodal point).
    pub fn support_points(&self, nodes: &[T]) -> Vec<[T; 3]> {
        let mut pts = vec![[T::zero(); 3]; self.n_dofs];
        let k = self.k;
        for (i, &c) in self.active.iter().enumerate() {
            for (l, &g) in self.dofs_of(i).iter().enumerate() {
                let r = [nodes[l % k], nodes[(l / k) % k], nodes[(l / (k * k)) % k]];
                pts[g as usize] = self.mesh.map_point(c, &r);
            }
        }
        pts
    }
}

/// Selects for every intersected cell the face to its most stable active
/// neighbor: the largest volume fraction (inside cells count as 1), ties
/// broken by the lowest face index. Returns indices into `handler.faces`,
/// sorted and without duplicates.
pub fn select_stabilization_faces<T: Real>(
    handler: &DofHandler<T>,
    volume_fraction: impl Fn(usize) -> T,
) -> Result<Vec<usize>> {
    let mesh = &handler.mesh;
    let face_slot: std::collections::HashMap<usize, usize> =
        handler.faces.iter().enumerate().map(|(i, f)| (f.face, i)).collect();
    let mut selected = Vec::new();
    for (ai, &c) in handler.active.iter().enumerate() {
        if handler.categories[c] != CellCategory::Intersected {
            continue;
        }
        let mut best: Option<(T, usize)> = None;
        for local in 0..2 * mesh.dim {
            let Some(nb) = mesh.neighbor(c, local) else { continue };
            let Some(na) = handler.active_index(nb) else { continue };
            let frac = match handler.categories[nb] {
                CellCategory::Inside => T::one(),
                _ => volume_fraction(na),
            };
            let face = mesh.cell_face(c, local);
            let better = match best {
                None => true,
                Some((bf, bface)) => frac > bf || (frac == bf && face < bface),
            };
            if better {
                best = Some((frac, face));
            }
        }
        let Some((_, face)) = best else {
            return Err(Error::IsolatedCutCell(c));
        };
        debug_assert!(handler.active_index(c) == Some(ai));
        selected.push(face_slot[&face]);
    }
    selected.sort_unstable();
    selected.dedup();
    Ok(selected)
}
