//! Gauss-Legendre quadrature on subintervals.

/// Nodes of the 5-point rule on [-1, 1].
const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Nodes and weights of the 5-point rule mapped to `[a, a + h]`.
/// Exact for polynomials of degree 9.
pub fn gauss_legendre_on(a: f64, h: f64) -> impl Iterator<Item = (f64, f64)> {
    let mid = a + 0.5 * h;
    NODES
        .iter()
        .zip(WEIGHTS.iter())
        .map(move |(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
}

/// Composite rule over `cells` equal subintervals of `[0, 1]`.
pub fn integrate_unit(cells: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / cells as f64;
    let mut acc = 0.0;
    for c in 0..cells {
        for (x, w) in gauss_legendre_on(c as f64 * h, h) {
            acc += w * f(x);
        }
    }
    acc
}
