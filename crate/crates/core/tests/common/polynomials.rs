//! Polynomial objectives with hand-derived gradients.

type Poly = (fn(&[f64]) -> f64, fn(&[f64]) -> Vec<f64>, usize);

/// Five polynomial families with hand-derived gradients.
pub const FAMILIES: [Poly; 5] = [
    (|x| 3.0 * x[0] - 2.0 * x[1] + 0.5 * x[2], |_| vec![3.0, -2.0, 0.5], 3),
    (
        |x| (x[0] - 1.0).powi(2) + 4.0 * (x[1] + 0.5).powi(2),
        |x| vec![2.0 * (x[0] - 1.0), 8.0 * (x[1] + 0.5)],
        2,
    ),
    (
        |x| x[0] * x[0] * x[1] + 3.0 * x[1].powi(3) - x[0] * x[1],
        |x| vec![2.0 * x[0] * x[1] - x[1], x[0] * x[0] + 9.0 * x[1] * x[1] - x[0]],
        2,
    ),
    (
        |x| (x[0] + x[1] + x[2] + x[3]).powi(4) / 10.0,
        |x| vec![0.4 * (x[0] + x[1] + x[2] + x[3]).powi(3); 4],
        4,
    ),
    (
        |x| x[0].powi(5) - 2.0 * x[0].powi(3) * x[1] * x[1] + x[1].powi(4),
        |x| {
            vec![
                5.0 * x[0].powi(4) - 6.0 * x[0] * x[0] * x[1] * x[1],
                -4.0 * x[0].powi(3) * x[1] + 4.0 * x[1].powi(3),
            ]
        },
        2,
    ),
];

/// Max absolute gradient error, relative to the largest exact component
/// (or 1, whichever is bigger).
pub fn gradient_error(fd: &[f64], exact: &[f64]) -> f64 {
    let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    fd.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}
