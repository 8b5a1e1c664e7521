//! Structured triangular meshes of unions of axis-aligned rectangles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    Wall,
}

impl BoundaryTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Outlet => "outlet",
            BoundaryTag::Wall => "wall",
        }
    }
}

/// Boundary edge, oriented so that the domain lies on its left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug)]
pub struct TriangularMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<BoundaryFacet>,
}

impl TriangularMesh {
    /// Checks orientation, index bounds and that every boundary edge carries
    /// exactly one facet.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, facets: Vec<BoundaryFacet>) -> Result<Self> {
        let mesh = Self { vertices, triangles, facets };
        let nv = mesh.vertices.len();
        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, tri) in mesh.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidInput(format!("triangle {k} references a missing vertex")));
            }
            if !(mesh.signed_area(k) > 0.0) {
                return Err(Error::InvalidInput(format!("triangle {k} is degenerate or clockwise")));
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &mesh.facets {
            let [a, b] = f.vertices;
            *tagged.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        for (edge, uses) in &edge_use {
            let tags = tagged.get(edge).copied().unwrap_or(0);
            match (uses, tags) {
                (1, 1) | (2, 0) => {}
                (2, _) => return Err(Error::InvalidInput(format!("interior edge {edge:?} is tagged"))),
                (1, _) => return Err(Error::InvalidInput(format!("boundary edge {edge:?} has {tags} tags"))),
                _ => return Err(Error::InvalidInput(format!("edge {edge:?} shared by {uses} triangles"))),
            }
        }
        if tagged.keys().any(|e| !edge_use.contains_key(e)) {
            return Err(Error::InvalidInput("facet is not a triangle edge".into()));
        }
        Ok(mesh)
    }

    /// Union of the grid cells of size `h` (lower-left corner `origin`,
    /// `nx` by `ny` cells) selected by `inside(cell_center)`, each cell split
    /// into four triangles through its center. Boundary edges are tagged by
    /// `tag(edge_midpoint)`.
    pub fn crossed_grid(
        origin: [f64; 2],
        h: f64,
        nx: usize,
        ny: usize,
        inside: impl Fn([f64; 2]) -> bool,
        tag: impl Fn([f64; 2]) -> BoundaryTag,
    ) -> Result<Self> {
        if !(h > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("grid needs h > 0 and at least one cell".into()));
        }
        let point = |i: usize, j: usize| [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
        let cell_in = |i: isize, j: isize| {
            i >= 0
                && j >= 0
                && (i as usize) < nx
                && (j as usize) < ny
                && inside([origin[0] + (i as f64 + 0.5) * h, origin[1] + (j as f64 + 0.5) * h])
        };

        let mut vertices = Vec::new();
        let mut grid_index = vec![usize::MAX; (nx + 1) * (ny + 1)];
        for j in 0..=ny {
            for i in 0..=nx {
                let (ii, jj) = (i as isize, j as isize);
                if cell_in(ii - 1, jj - 1) || cell_in(ii, jj - 1) || cell_in(ii - 1, jj) || cell_in(ii, jj) {
                    grid_index[j * (nx + 1) + i] = vertices.len();
                    vertices.push(point(i, j));
                }
            }
        }
        let gi = |i: usize, j: usize| grid_index[j * (nx + 1) + i];

        let mut triangles = Vec::new();
        let mut facets = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if !cell_in(i as isize, j as isize) {
                    continue;
                }
                let m = vertices.len();
                vertices.push([origin[0] + (i as f64 + 0.5) * h, origin[1] + (j as f64 + 0.5) * h]);
                let corners = [gi(i, j), gi(i + 1, j), gi(i + 1, j + 1), gi(i, j + 1)];
                let neighbours = [(0, -1), (1, 0), (0, 1), (-1, 0)];
                for s in 0..4 {
                    let (a, b) = (corners[s], corners[(s + 1) % 4]);
                    triangles.push([a, b, m]);
                    let (di, dj) = neighbours[s];
                    if !cell_in(i as isize + di, j as isize + dj) {
                        let mid = [0.5 * (vertices[a][0] + vertices[b][0]), 0.5 * (vertices[a][1] + vertices[b][1])];
                        facets.push(BoundaryFacet { vertices: [a, b], tag: tag(mid) });
                    }
                }
            }
        }
        Self::new(vertices, triangles, facets)
    }

    /// `[x0, x0 + nx h] x [y0, y0 + ny h]`.
    pub fn rectangle(
        origin: [f64; 2],
        h: f64,
        nx: usize,
        ny: usize,
        tag: impl Fn([f64; 2]) -> BoundaryTag,
    ) -> Result<Self> {
        Self::crossed_grid(origin, h, nx, ny, |_| true, tag)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangles[k].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.signed_area(k)).sum()
    }

    pub fn facet_length(&self, f: &BoundaryFacet) -> f64 {
        let [a, b] = f.vertices.map(|v| self.vertices[v]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.facets.iter().filter(|f| f.tag == tag).map(|f| self.facet_length(f)).sum()
    }

    /// Longest triangle edge.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |e| (t[e], t[(e + 1) % 3])))
            .map(|(a, b)| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

const GEOMETRY_EPS: f64 = 1e-9;

/// Backward-facing step `([0,18] x [2,5]) U ([4,18] x [0,2])` (cm) with cell
/// size `1 / 2^refine`. Inlet at `x = 0`, outlet at `x = 18`, walls elsewhere.
pub fn build_step_mesh(refine: u32) -> TriangularMesh {
    let n = 1usize << refine;
    let h = 1.0 / n as f64;
    TriangularMesh::crossed_grid(
        [0.0, 0.0],
        h,
        18 * n,
        5 * n,
        |c| c[0] > 4.0 || c[1] > 2.0,
        |m| {
            if m[0] < GEOMETRY_EPS {
                BoundaryTag::Inlet
            } else if m[0] > 18.0 - GEOMETRY_EPS {
                BoundaryTag::Outlet
            } else {
                BoundaryTag::Wall
            }
        },
    )
    .expect("step geometry is valid")
}

/// Straight channel `[0,10] x [0,2.5]` (cm) with cell size `0.5 / 2^refine`.
pub fn build_channel_mesh(refine: u32) -> TriangularMesh {
    let n = 1usize << refine;
    let h = 0.5 / n as f64;
    TriangularMesh::rectangle([0.0, 0.0], h, 20 * n, 5 * n, |m| {
        if m[0] < GEOMETRY_EPS {
            BoundaryTag::Inlet
        } else if m[0] > 10.0 - GEOMETRY_EPS {
            BoundaryTag::Outlet
        } else {
            BoundaryTag::Wall
        }
    })
    .expect("channel geometry is valid")
}
