//! The simplex lattice `Q_n` and nearest-point quantization in total variation.
//!
//! Points are stored as integer numerators over the common denominator `n`,
//! listed in lexicographic order of their numerator vectors.

use num_bigint::BigUint;
use num_traits::One;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rational::Rational;

const DEFAULT_POINT_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    pub m: usize,
    pub n: usize,
    points: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedBelief {
    pub index: usize,
    pub numerators: Vec<usize>,
}

impl QuantizedBelief {
    pub fn point(&self, n: usize) -> Vec<Rational> {
        self.numerators.iter().map(|&k| Rational::new(k as i64, n as i64)).collect()
    }
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn numerators(&self) -> &[Vec<usize>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Vec<Rational> {
        self.points[index]
            .iter()
            .map(|&k| Rational::new(k as i64, self.n as i64))
            .collect()
    }

    pub fn index_of(&self, numerators: &[usize]) -> Option<usize> {
        self.points.binary_search_by(|p| p.as_slice().cmp(numerators)).ok()
    }

    /// Whether `p` lies on the lattice.
    pub fn contains(&self, p: &[Rational]) -> bool {
        p.len() == self.m && p.iter().all(|x| (x * &Rational::from_integer(self.n as i64)).denom().is_one())
    }

    /// Moving one unit of mass between two coordinates: the pairs of points at
    /// total variation distance `2/n`.
    pub fn neighbours(&self, index: usize) -> Vec<usize> {
        let p = &self.points[index];
        let mut out = Vec::new();
        for from in 0..self.m {
            if p[from] == 0 {
                continue;
            }
            for to in 0..self.m {
                if to == from {
                    continue;
                }
                let mut q = p.clone();
                q[from] -= 1;
                q[to] += 1;
                out.push(self.index_of(&q).expect("neighbour lies on the lattice"));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m,
            "n": self.n,
            "size": self.len(),
            "points": self.points.iter().map(|p| {
                p.iter().map(|&k| Rational::new(k as i64, self.n as i64).to_string()).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }
}

/// `C(m + n - 1, m - 1)`.
pub fn lattice_size(m: usize, n: usize) -> BigUint {
    let top = m + n - 1;
    let k = (m - 1).min(n);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(top - i) / BigUint::from(i + 1);
    }
    acc
}

/// All points of `Q_n` in dimension `m`.
pub fn build_lattice(m: usize, n: usize) -> Result<Lattice> {
    if m == 0 || n == 0 {
        return Err(Error::OutOfRange(format!("lattice needs m >= 1 and n >= 1, got m = {m}, n = {n}")));
    }
    let size = lattice_size(m, n);
    let cap = crate::budget(DEFAULT_POINT_CAP);
    if size > BigUint::from(cap) {
        return Err(Error::ResourceLimit(format!("lattice with m = {m}, n = {n} has {size} points, cap is {cap}")));
    }
    let mut points = Vec::new();
    let mut current = Vec::with_capacity(m);
    compositions(m, n, &mut current, &mut points);
    Ok(Lattice { m, n, points })
}

fn compositions(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(parts - 1, total - k, prefix, out);
        prefix.pop();
    }
}

/// `sum_i |p_i - q_i|`.
pub fn tv_distance(p: &[Rational], q: &[Rational]) -> Result<Rational> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("vectors of length {} and {}", p.len(), q.len())));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Nearest lattice point in total variation; ties go to the lexicographically
/// smallest point.
///
/// Scale by `n`, take floors, then hand the missing units to the coordinates
/// with the largest fractional parts. Among equal fractional parts the later
/// coordinate is rounded up first, which yields the smallest minimizer.
pub fn quantize(lattice: &Lattice, p: &[Rational]) -> Result<QuantizedBelief> {
    if p.len() != lattice.m {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a lattice of dimension {}",
            p.len(),
            lattice.m
        )));
    }
    let n = Rational::from_integer(lattice.n as i64);
    let mut numerators = Vec::with_capacity(p.len());
    let mut fractions = Vec::with_capacity(p.len());
    for (i, x) in p.iter().enumerate() {
        let scaled = x * &n;
        let floor = scaled.floor();
        let floor_r = Rational::from_bigints(floor.clone(), 1.into());
        fractions.push((scaled - floor_r, i));
        numerators.push(usize::try_from(floor).map_err(|_| Error::OutOfRange("vector is not on the simplex".into()))?);
    }
    let assigned: usize = numerators.iter().sum();
    let missing = lattice
        .n
        .checked_sub(assigned)
        .ok_or_else(|| Error::OutOfRange("vector is not on the simplex".into()))?;
    fractions.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    for (_, i) in fractions.iter().take(missing) {
        numerators[*i] += 1;
    }
    let index = lattice
        .index_of(&numerators)
        .ok_or_else(|| Error::OutOfRange("vector is not on the simplex".into()))?;
    Ok(QuantizedBelief { index, numerators })
}

/// `2a(1 + a) / (m n)` with `a = floor(m / 2)`.
pub fn error_bound(m: usize, n: usize) -> Rational {
    let a = (m / 2) as i64;
    Rational::new(2 * a * (1 + a), (m * n) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn as_set(l: &Lattice) -> Vec<Vec<Rational>> {
        let mut v: Vec<Vec<Rational>> = (0..l.len()).map(|i| l.point(i)).collect();
        v.sort();
        v
    }

    /// Lexicographically smallest minimizer by exhaustive search.
    fn brute(lattice: &Lattice, p: &[Rational]) -> (usize, Rational) {
        let mut best: Option<(Rational, usize)> = None;
        for i in 0..lattice.len() {
            let d = tv_distance(p, &lattice.point(i)).unwrap();
            if best.as_ref().is_none_or(|(b, _)| d < *b) {
                best = Some((d, i));
            }
        }
        let (d, i) = best.unwrap();
        (i, d)
    }

    #[test]
    fn small_lattices() {
        let q2 = build_lattice(2, 2).unwrap();
        let mut expect = vec![vec![r(0, 1), r(1, 1)], vec![r(1, 2), r(1, 2)], vec![r(1, 1), r(0, 1)]];
        expect.sort();
        assert_eq!(as_set(&q2), expect);

        let q = build_lattice(3, 2).unwrap();
        let h = r(1, 2);
        let (o, z) = (r(1, 1), r(0, 1));
        let mut expect = vec![
            vec![o.clone(), z.clone(), z.clone()],
            vec![h.clone(), h.clone(), z.clone()],
            vec![z.clone(), o.clone(), z.clone()],
            vec![z.clone(), h.clone(), h.clone()],
            vec![z.clone(), z.clone(), o.clone()],
            vec![h.clone(), z.clone(), h.clone()],
        ];
        expect.sort();
        assert_eq!(as_set(&q), expect);

        for n in 1..5 {
            assert_eq!(as_set(&build_lattice(1, n).unwrap()), vec![vec![r(1, 1)]]);
        }
    }

    #[test]
    fn sizes_match_enumeration() {
        assert_eq!(lattice_size(2, 2), BigUint::from(3u32));
        assert_eq!(lattice_size(3, 2), BigUint::from(6u32));
        assert_eq!(lattice_size(4, 3), BigUint::from(20u32));
        for m in 1..6 {
            for n in 1..7 {
                let l = build_lattice(m, n).unwrap();
                assert_eq!(BigUint::from(l.len()), lattice_size(m, n));
                for i in 0..l.len() {
                    assert_eq!(l.index_of(&l.numerators()[i]), Some(i));
                    assert!(l.point(i).iter().sum::<Rational>().is_one());
                }
            }
        }
        assert!(build_lattice(0, 2).is_err());
    }

    #[test]
    fn distances() {
        assert!(tv_distance(&[r(1, 3), r(2, 3)], &[r(1, 3), r(2, 3)]).unwrap().is_zero());
        assert_eq!(tv_distance(&[r(1, 1), r(0, 1)], &[r(0, 1), r(1, 1)]).unwrap(), r(2, 1));
        assert_eq!(tv_distance(&[r(1, 2), r(1, 2)], &[r(3, 4), r(1, 4)]).unwrap(), r(1, 2));
        assert!(matches!(tv_distance(&[r(1, 1)], &[r(1, 2), r(1, 2)]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn quantize_examples() {
        let l = build_lattice(2, 2).unwrap();
        let q = quantize(&l, &[r(3, 5), r(2, 5)]).unwrap();
        assert_eq!(q.point(2), vec![r(1, 2), r(1, 2)]);
        assert_eq!(tv_distance(&[r(3, 5), r(2, 5)], &q.point(2)).unwrap(), r(1, 5));
        for i in 0..l.len() {
            assert_eq!(quantize(&l, &l.point(i)).unwrap().index, i);
        }
        let l1 = build_lattice(2, 1).unwrap();
        assert_eq!(quantize(&l1, &[r(1, 2), r(1, 2)]).unwrap().numerators, vec![0, 1]);
    }

    #[test]
    fn error_bounds() {
        assert_eq!(error_bound(2, 4), r(1, 2));
        assert_eq!(error_bound(3, 2), r(2, 3));
        assert!(error_bound(1, 7).is_zero());
    }

    #[test]
    fn neighbours_are_at_unit_distance() {
        let l = build_lattice(3, 4).unwrap();
        for i in 0..l.len() {
            for j in l.neighbours(i) {
                assert_eq!(tv_distance(&l.point(i), &l.point(j)).unwrap(), r(2, 4));
            }
        }
    }

    fn simplex_point(raw: Vec<u16>) -> Vec<Rational> {
        let total: i64 = raw.iter().map(|&x| x as i64).sum::<i64>().max(1);
        if raw.iter().all(|&x| x == 0) {
            let mut v = vec![r(0, 1); raw.len()];
            v[0] = r(1, 1);
            return v;
        }
        raw.into_iter().map(|x| r(x as i64, total)).collect()
    }

    proptest! {
        #[test]
        fn quantize_is_the_exhaustive_minimizer(raw in proptest::collection::vec(0u16..12, 2..5), n in 1usize..7) {
            let p = simplex_point(raw);
            let l = build_lattice(p.len(), n).unwrap();
            let q = quantize(&l, &p).unwrap();
            let (best, d) = brute(&l, &p);
            prop_assert_eq!(q.index, best);
            prop_assert!(d <= error_bound(p.len(), n));
            let fine = build_lattice(p.len(), 2 * n).unwrap();
            let q2 = quantize(&fine, &p).unwrap();
            prop_assert!(tv_distance(&p, &q2.point(2 * n)).unwrap() <= d);
        }
    }
}
