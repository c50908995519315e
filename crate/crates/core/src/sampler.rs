//! Latin hypercube sampling with multidimensional uniformity (LHSMDU).
//!
//! The construction oversamples the unit cube, greedily discards the most
//! crowded candidates until the requested count remains, and then re-imposes
//! the Latin stratification coordinate by coordinate using the rank order of
//! the survivors. The result keeps the one-sample-per-stratum marginals of
//! plain LHS while spreading points more evenly in the joint space.
//!
//! Random numbers come from ChaCha8 seeded with `seed_from_u64`; a uniform
//! draw in `[0, 1)` takes the top 53 bits of one `next_u64`. Draw order is
//! fixed: all candidate coordinates row by row, then the within-stratum
//! offsets dimension by dimension.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Number of candidates drawn per requested sample before pruning.
pub const OVERSAMPLING_FACTOR: usize = 5;

/// Axis-aligned hyper-rectangle `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InvalidBox {
    #[error("box has no dimensions")]
    Empty,
    #[error("lower and upper bound vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("dimension {0} has a non-finite bound")]
    NonFinite(usize),
    #[error("dimension {index}: lower bound {lo} exceeds upper bound {hi}")]
    Inverted { index: usize, lo: f64, hi: f64 },
}

impl InputBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, InvalidBox> {
        if lo.len() != hi.len() {
            return Err(InvalidBox::LengthMismatch(lo.len(), hi.len()));
        }
        if lo.is_empty() {
            return Err(InvalidBox::Empty);
        }
        for (index, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(InvalidBox::NonFinite(index));
            }
            if l > h {
                return Err(InvalidBox::Inverted { index, lo: l, hi: h });
            }
        }
        Ok(InputBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| l <= v && v <= h)
    }

    /// Coordinatewise projection onto the box.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (&l, &h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(l, h);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| l + 0.5 * (h - l)).collect()
    }
}

/// `n` sample points (rows) and the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stratum(x: f64, lo: f64, hi: f64, n: usize) -> usize {
    let s = (n as f64 * ((x - lo) / (hi - lo))).floor();
    if s <= 0.0 {
        0
    } else {
        (s as usize).min(n - 1)
    }
}

/// Draws `n` LHSMDU points in `bounds`. Deterministic in `(n, bounds, seed)`.
pub fn lhsmdu(n: usize, bounds: &InputBox, seed: u64) -> SampleSet {
    assert!(n >= 1, "lhsmdu needs at least one sample");
    let d = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let candidates: Vec<Vec<f64>> = (0..OVERSAMPLING_FACTOR * n)
        .map(|_| (0..d).map(|_| uniform(&mut rng)).collect())
        .collect();
    let survivors = nearest_neighbor_prune(&candidates, n);

    let mut points = vec![vec![0.0; d]; n];
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..d {
        order.sort_by(|&a, &b| survivors[a][j].total_cmp(&survivors[b][j]).then(a.cmp(&b)));
        let (lo, hi) = (bounds.lo[j], bounds.hi[j]);
        for (rank, &row) in order.iter().enumerate() {
            let u = (rank as f64 + uniform(&mut rng)) / n as f64;
            points[row][j] = if lo == hi {
                lo
            } else {
                let x = (lo + u * (hi - lo)).clamp(lo, hi);
                if stratum(x, lo, hi, n) == rank {
                    x
                } else {
                    // Rounding pushed the point across a stratum edge.
                    lo + (rank as f64 + 0.5) / n as f64 * (hi - lo)
                }
            };
        }
    }
    SampleSet { points, seed }
}

#[derive(Clone, Copy)]
struct Neighbors {
    first: (f64, usize),
    second: (f64, usize),
}

impl Neighbors {
    const NONE: (f64, usize) = (f64::INFINITY, usize::MAX);

    fn score(&self) -> f64 {
        match (self.first.0.is_finite(), self.second.0.is_finite()) {
            (true, true) => 0.5 * (self.first.0 + self.second.0),
            (true, false) => self.first.0,
            _ => f64::INFINITY,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn two_nearest(points: &[Vec<f64>], alive: &[bool], i: usize) -> Neighbors {
    let mut nb = Neighbors {
        first: Neighbors::NONE,
        second: Neighbors::NONE,
    };
    for (j, p) in points.iter().enumerate() {
        if j == i || !alive[j] {
            continue;
        }
        let dist = distance(&points[i], p);
        if dist < nb.first.0 {
            nb.second = nb.first;
            nb.first = (dist, j);
        } else if dist < nb.second.0 {
            nb.second = (dist, j);
        }
    }
    nb
}

/// Removes, one at a time, the point whose mean distance to its two nearest
/// remaining neighbours is smallest (lowest row index on ties) until `target`
/// rows remain. Survivors keep their original relative order.
pub fn nearest_neighbor_prune(points: &[Vec<f64>], target: usize) -> Vec<Vec<f64>> {
    assert!(
        target >= 1 && target <= points.len(),
        "prune target {target} out of range for {} points",
        points.len()
    );
    let m = points.len();
    let mut alive = vec![true; m];
    let mut neighbors: Vec<Neighbors> = (0..m).map(|i| two_nearest(points, &alive, i)).collect();

    for _ in target..m {
        let mut victim = usize::MAX;
        let mut best = f64::INFINITY;
        for i in (0..m).filter(|&i| alive[i]) {
            let score = neighbors[i].score();
            if victim == usize::MAX || score < best {
                victim = i;
                best = score;
            }
        }
        alive[victim] = false;
        for i in 0..m {
            if alive[i] && (neighbors[i].first.1 == victim || neighbors[i].second.1 == victim) {
                neighbors[i] = two_nearest(points, &alive, i);
            }
        }
    }

    points
        .iter()
        .zip(&alive)
        .filter(|(_, &keep)| keep)
        .map(|(p, _)| p.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> InputBox {
        InputBox::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn four_points_one_per_quarter() {
        for seed in 0..20 {
            let s = lhsmdu(4, &unit(1), seed);
            let mut quarters: Vec<usize> = s
                .points
                .iter()
                .map(|p| ((p[0] * 4.0).floor() as usize).min(3))
                .collect();
            quarters.sort();
            assert_eq!(quarters, vec![0, 1, 2, 3], "seed {seed}");
        }
    }

    #[test]
    fn acas_sized_sample_has_100_rows() {
        let b = InputBox::new(vec![-1.0; 5], vec![1.0; 5]).unwrap();
        let s = lhsmdu(20 * 5, &b, 7);
        assert_eq!(s.len(), 100);
        assert!(s.points.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn degenerate_box_yields_constant_points() {
        let b = InputBox::new(vec![3.0, 3.0], vec![3.0, 3.0]).unwrap();
        let s = lhsmdu(7, &b, 1);
        assert_eq!(s.len(), 7);
        assert!(s.points.iter().all(|p| p == &[3.0, 3.0]));
    }

    #[test]
    fn prune_drops_the_crowded_point() {
        let pts: Vec<Vec<f64>> = [0.0, 0.5, 0.51, 1.0].iter().map(|&x| vec![x]).collect();
        // Neighbour means: 0.505, 0.255, 0.25, 0.495 -> 0.51 goes.
        assert_eq!(nearest_neighbor_prune(&pts, 3), vec![vec![0.0], vec![0.5], vec![1.0]]);
    }

    #[test]
    fn prune_never_removes_an_endpoint_of_a_uniform_line() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.25]).collect();
        // Interior means are all 0.25 and endpoints 0.375; the tie goes to row 1.
        let kept = nearest_neighbor_prune(&pts, 4);
        assert_eq!(kept, vec![vec![0.0], vec![0.5], vec![0.75], vec![1.0]]);
    }

    #[test]
    fn prune_to_same_size_is_identity() {
        let pts = vec![vec![0.3, 0.1], vec![0.3, 0.1], vec![0.9, 0.2]];
        assert_eq!(nearest_neighbor_prune(&pts, 3), pts);
    }

    #[test]
    fn box_validation() {
        assert_eq!(InputBox::new(vec![], vec![]), Err(InvalidBox::Empty));
        assert!(matches!(
            InputBox::new(vec![1.0], vec![0.0]),
            Err(InvalidBox::Inverted { index: 0, .. })
        ));
        assert_eq!(
            InputBox::new(vec![f64::NEG_INFINITY], vec![0.0]),
            Err(InvalidBox::NonFinite(0))
        );
    }
}
