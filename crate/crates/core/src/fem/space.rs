//! Taylor–Hood P2/P1 element: continuous quadratic velocity, continuous
//! linear pressure.

use std::collections::HashMap;
use std::sync::Arc;

use super::mesh::TriangularMesh;

/// Local P2 node order on a triangle `[v0, v1, v2]`.
pub const P2_LOCAL: usize = 6;
/// Vertex pairs of the three edge nodes (local nodes 3, 4, 5).
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Values of the six P2 shape functions at barycentric point `l`.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Cartesian gradients of the P2 shape functions at `l`, given the constant
/// barycentric gradients `gl` of the triangle.
pub fn p2_gradients(l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        for d in 0..2 {
            g[i][d] = (4.0 * l[i] - 1.0) * gl[i][d];
        }
    }
    for (e, [i, j]) in EDGE_VERTICES.iter().enumerate() {
        for d in 0..2 {
            g[3 + e][d] = 4.0 * (l[*j] * gl[*i][d] + l[*i] * gl[*j][d]);
        }
    }
    g
}

/// Geometry of one affine triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    pub corners: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(corners: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = corners;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let grad_lambda = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        Self { area: 0.5 * det, grad_lambda, corners }
    }

    pub fn point(&self, l: [f64; 3]) -> [f64; 2] {
        let c = &self.corners;
        [
            l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
            l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
        ]
    }
}

/// Degree-of-freedom numbering: velocity component `c` at P2 node `k` is
/// `c * n_p2 + k`; pressure at mesh vertex `v` is `2 * n_p2 + v`. P2 nodes are
/// the mesh vertices followed by the edge midpoints.
#[derive(Clone, Debug)]
pub struct TaylorHoodSpace {
    mesh: Arc<TriangularMesh>,
    nodes: Vec<[f64; 2]>,
    element_nodes: Vec<[usize; P2_LOCAL]>,
    edge_index: HashMap<(usize, usize), usize>,
    geometry: Vec<ElementGeometry>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: Arc<TriangularMesh>) -> Self {
        let nv = mesh.num_vertices();
        let mut nodes: Vec<[f64; 2]> = mesh.vertices().to_vec();
        let mut edge_index = HashMap::new();
        let mut element_nodes = Vec::with_capacity(mesh.num_triangles());
        let mut geometry = Vec::with_capacity(mesh.num_triangles());
        for tri in mesh.triangles() {
            let mut en = [tri[0], tri[1], tri[2], 0, 0, 0];
            for (e, [i, j]) in EDGE_VERTICES.iter().enumerate() {
                let (a, b) = (tri[*i], tri[*j]);
                let key = (a.min(b), a.max(b));
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                    nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    nodes.len() - 1
                });
                en[3 + e] = idx;
            }
            element_nodes.push(en);
            geometry.push(ElementGeometry::new(tri.map(|v| mesh.vertices()[v])));
        }
        debug_assert_eq!(nodes.len(), nv + edge_index.len());
        Self { mesh, nodes, element_nodes, edge_index, geometry }
    }

    pub fn mesh(&self) -> &Arc<TriangularMesh> {
        &self.mesh
    }

    /// Number of P2 nodes (vertices plus edges).
    pub fn num_p2_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_p1_nodes(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_velocity_dofs() + self.num_pressure_dofs()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn element_nodes(&self, k: usize) -> &[usize; P2_LOCAL] {
        &self.element_nodes[k]
    }

    pub fn geometry(&self, k: usize) -> &ElementGeometry {
        &self.geometry[k]
    }

    pub fn num_elements(&self) -> usize {
        self.element_nodes.len()
    }

    pub fn velocity_dof(&self, component: usize, node: usize) -> usize {
        component * self.nodes.len() + node
    }

    pub fn pressure_dof(&self, vertex: usize) -> usize {
        2 * self.nodes.len() + vertex
    }

    /// P2 node at the midpoint of mesh edge `(a, b)`.
    pub fn edge_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    /// Global dofs of element `k` in local order
    /// `[u_x at 6 nodes, u_y at 6 nodes, p at 3 vertices]`.
    pub fn element_dofs(&self, k: usize) -> [usize; 15] {
        let en = &self.element_nodes[k];
        let mut d = [0; 15];
        for i in 0..P2_LOCAL {
            d[i] = self.velocity_dof(0, en[i]);
            d[P2_LOCAL + i] = self.velocity_dof(1, en[i]);
        }
        for i in 0..3 {
            d[12 + i] = self.pressure_dof(en[i]);
        }
        d
    }

    /// Nodal interpolant of a velocity field and a pressure field.
    pub fn interpolate(&self, velocity: impl Fn([f64; 2]) -> [f64; 2], pressure: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut u = vec![0.0; self.num_dofs()];
        for (k, &x) in self.nodes.iter().enumerate() {
            let v = velocity(x);
            u[self.velocity_dof(0, k)] = v[0];
            u[self.velocity_dof(1, k)] = v[1];
        }
        for (v, &x) in self.mesh.vertices().iter().enumerate() {
            u[self.pressure_dof(v)] = pressure(x);
        }
        u
    }
}
