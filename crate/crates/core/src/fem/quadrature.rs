//! Symmetric quadrature rules on triangles (barycentric points, weights
//! summing to one) and Gauss–Legendre rules on edges.

#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn orbit3(a: f64, b: f64, w: f64, points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>) {
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        points.push(p);
        weights.push(w);
    }
}

/// Six-point rule exact for polynomials of degree 4.
pub fn degree4() -> TriangleRule {
    let mut points = Vec::with_capacity(6);
    let mut weights = Vec::with_capacity(6);
    orbit3(0.445948490915964886, 0.108103018168070227, 0.223381589678011466, &mut points, &mut weights);
    orbit3(0.091576213509770743, 0.816847572980458514, 0.109951743655321868, &mut points, &mut weights);
    TriangleRule { points, weights, degree: 4 }
}

/// Seven-point rule exact for polynomials of degree 5.
pub fn degree5() -> TriangleRule {
    let s = 15f64.sqrt();
    let mut points = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 40.0];
    orbit3((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0, (155.0 - s) / 1200.0, &mut points, &mut weights);
    orbit3((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0, (155.0 + s) / 1200.0, &mut points, &mut weights);
    TriangleRule { points, weights, degree: 5 }
}

/// Three-point Gauss–Legendre rule on `[0, 1]`, exact for degree 5.
pub fn gauss3_unit() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}
