//! Plain-text tables of meshes and solutions.
//!
//! Node table columns: `node x y u_x u_y p`, one row per P2 node; pressure at
//! edge nodes is the mean of the two end vertices (exact for P1).
//! Element table columns: `element n0 n1 n2 n3 n4 n5`, vertices first, then
//! the midpoints of edges 01, 12 and 20.

use std::io::{self, Write};

use super::space::{TaylorHoodSpace, EDGE_VERTICES};

pub fn write_nodes<W: Write>(mut w: W, space: &TaylorHoodSpace, state: &[f64]) -> io::Result<()> {
    let nv = space.num_p1_nodes();
    let mut pressure = vec![0.0; space.num_p2_nodes()];
    for v in 0..nv {
        pressure[v] = state[space.pressure_dof(v)];
    }
    for k in 0..space.num_elements() {
        let en = space.element_nodes(k);
        for (e, [i, j]) in EDGE_VERTICES.iter().enumerate() {
            pressure[en[3 + e]] = 0.5 * (pressure[en[*i]] + pressure[en[*j]]);
        }
    }
    writeln!(w, "node x y u_x u_y p")?;
    for (k, x) in space.nodes().iter().enumerate() {
        writeln!(
            w,
            "{k} {} {} {} {} {}",
            x[0],
            x[1],
            state[space.velocity_dof(0, k)],
            state[space.velocity_dof(1, k)],
            pressure[k]
        )?;
    }
    Ok(())
}

pub fn write_elements<W: Write>(mut w: W, space: &TaylorHoodSpace) -> io::Result<()> {
    writeln!(w, "element n0 n1 n2 n3 n4 n5")?;
    for k in 0..space.num_elements() {
        let n = space.element_nodes(k);
        writeln!(w, "{k} {} {} {} {} {} {}", n[0], n[1], n[2], n[3], n[4], n[5])?;
    }
    Ok(())
}
