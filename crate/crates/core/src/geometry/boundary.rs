use std::collections::{BTreeSet, HashMap};

use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::Serialize;

use super::{approximation_graph, corners, Ifs};
use crate::error::{Error, Result};
use crate::scalar::{ratio, Point, Scalar};

pub const DEFAULT_ORBIT_GUARD: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Edge {
    /// `p2 → p3`
    Bottom,
    /// `p3 → p1`
    Right,
    /// `p1 → p2`
    Left,
}

impl Edge {
    pub const ALL: [Edge; 3] = [Edge::Bottom, Edge::Right, Edge::Left];

    fn index(self) -> usize {
        self as usize
    }

    /// The edge this one is carried to by the 120° rotation.
    pub fn rotated(self) -> Edge {
        Edge::ALL[(self.index() + 1) % 3]
    }

    pub fn point(self, t: &BigRational) -> Point {
        let t = Scalar::rational(t.clone());
        match self {
            Edge::Bottom => Point::new(t, Scalar::zero()),
            Edge::Right => Point::new(
                &Scalar::one() - &(&t * &Scalar::from_ratio(1, 2)),
                &t * &Scalar::sqrt3_ratio(1, 2),
            ),
            Edge::Left => Point::new(
                &Scalar::from_ratio(1, 2) - &(&t * &Scalar::from_ratio(1, 2)),
                &Scalar::sqrt3_ratio(1, 2) - &(&t * &Scalar::sqrt3_ratio(1, 2)),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Label {
    /// Corner `p_i`, `i ∈ 1..=3`.
    Corner(u8),
    EdgeOrbit { edge: Edge, t: String },
}

/// The cell-boundary set: the corners plus three rotated copies of a finite
/// parameter set `T ⊂ (0,1)`. Ordering is corners `p1, p2, p3` followed by
/// `(t, edge)` with `t` ascending and edges in `Bottom, Right, Left` order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySet {
    pub points: Vec<Point>,
    pub labels: Vec<Label>,
    params: Vec<BigRational>,
}

impl BoundarySet {
    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn params(&self) -> &[BigRational] {
        &self.params
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }

    /// Index permutation induced by the 120° rotation.
    pub fn rotation(&self) -> Vec<usize> {
        let mut perm = Vec::with_capacity(self.size());
        for i in 0..3 {
            perm.push((i + 1) % 3);
        }
        for k in 0..self.params.len() {
            for e in 0..3 {
                perm.push(3 + 3 * k + (e + 1) % 3);
            }
        }
        perm
    }

    /// Builds the canonical set from corner-free parameters.
    fn from_params(params: BTreeSet<BigRational>) -> Self {
        let params: Vec<BigRational> = params.into_iter().collect();
        let mut points: Vec<Point> = corners().to_vec();
        let mut labels: Vec<Label> = (1..=3).map(Label::Corner).collect();
        for t in &params {
            for e in Edge::ALL {
                points.push(e.point(t));
                labels.push(Label::EdgeOrbit { edge: e, t: super::rational_string(t) });
            }
        }
        BoundarySet { points, labels, params }
    }

    /// Canonical set from arbitrary exact boundary points; fails when a point
    /// is off `∂▲` or the set is not rotation invariant.
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point>) -> Result<Self> {
        let c = corners();
        let mut seen: HashMap<Edge, BTreeSet<BigRational>> = HashMap::new();
        for p in pts {
            if c.contains(p) {
                continue;
            }
            let (e, t) = locate_on_boundary(p).ok_or_else(|| Error::NotOnBoundary(p.to_string()))?;
            seen.entry(e).or_default().insert(t);
        }
        let bottom = seen.get(&Edge::Bottom).cloned().unwrap_or_default();
        for e in [Edge::Right, Edge::Left] {
            if seen.get(&e).cloned().unwrap_or_default() != bottom {
                return Err(Error::IdentificationMismatch(
                    "boundary points are not invariant under rotation".into(),
                ));
            }
        }
        Ok(Self::from_params(bottom))
    }
}

/// Edge and parameter of a non-corner point of `∂▲`.
pub(crate) fn locate_on_boundary(p: &Point) -> Option<(Edge, BigRational)> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let inside = |t: &BigRational| t.is_positive() && *t < one;
    if p.y.is_zero() && p.x.is_rational() && inside(&p.x.a) {
        return Some((Edge::Bottom, p.x.a.clone()));
    }
    // right edge: (1 − t/2, (√3/2) t)
    if p.y.a == zero && p.x.is_rational() {
        let t = &p.y.b * ratio(2, 1);
        if inside(&t) && Edge::Right.point(&t) == *p {
            return Some((Edge::Right, t));
        }
        // left edge: (1/2 − t/2, √3/2 − (√3/2) t)
        let t = &one - &p.x.a * ratio(2, 1);
        if inside(&t) && Edge::Left.point(&t) == *p {
            return Some((Edge::Left, t));
        }
    }
    None
}

/// Parameters of the doubling orbit of `2λ`; the orbit stops at `1/2`.
pub(crate) fn doubling_orbit(lambda: &BigRational, guard: usize) -> Result<BTreeSet<BigRational>> {
    let half = ratio(1, 2);
    let one = BigRational::one();
    let mut out = BTreeSet::new();
    let mut t = lambda * ratio(2, 1);
    loop {
        if !out.insert(t.clone()) {
            break;
        }
        if out.len() > guard {
            return Err(Error::OrbitOverflow { guard });
        }
        if t == half {
            break;
        }
        t = if t < half { &t * ratio(2, 1) } else { &t * ratio(2, 1) - &one };
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Rotation orbits of the doubling orbit of `2λ`.
    Fast { guard: usize },
    /// Pull back the level-`k` vertices of every level-`k` cell, `k ≤ depth`.
    Oracle { depth: usize },
}

impl Default for BoundaryMode {
    fn default() -> Self {
        BoundaryMode::Fast { guard: DEFAULT_ORBIT_GUARD }
    }
}

pub fn boundary_set(ifs: &Ifs, mode: BoundaryMode) -> Result<BoundarySet> {
    match mode {
        BoundaryMode::Fast { guard } => {
            Ok(BoundarySet::from_params(doubling_orbit(ifs.lambda(), guard)?))
        }
        BoundaryMode::Oracle { depth } => {
            let mut pulled: Vec<Point> = corners().to_vec();
            for k in 1..=depth {
                let g = approximation_graph(ifs, k)?;
                for (idx, cell) in g.cells.iter().enumerate() {
                    let inv = g.cell_map(idx).inverse();
                    for &v in &cell.vertices {
                        let q = inv.apply(&g.vertices[v]);
                        if !pulled.contains(&q) {
                            pulled.push(q);
                        }
                    }
                }
            }
            BoundarySet::from_points(pulled.iter())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::make_ifs;
    use super::*;

    fn fast(l: BigRational) -> BoundarySet {
        boundary_set(&make_ifs(&l).unwrap(), BoundaryMode::default()).unwrap()
    }

    #[test]
    fn orbit_examples() {
        let b = fast(ratio(1, 4));
        assert_eq!(b.params(), &[ratio(1, 2)]);
        assert_eq!(b.size(), 6);
        let b = fast(ratio(1, 7));
        assert_eq!(b.params(), &[ratio(1, 7), ratio(2, 7), ratio(4, 7)]);
        assert_eq!(b.size(), 12);
        let b = fast(ratio(1, 8));
        assert_eq!(b.params(), &[ratio(1, 4), ratio(1, 2)]);
        assert_eq!(b.size(), 9);
    }

    #[test]
    fn fast_equals_oracle() {
        for (l, depth) in [(ratio(1, 4), 2), (ratio(1, 8), 3), (ratio(1, 7), 4), (ratio(3, 16), 4)] {
            let ifs = make_ifs(&l).unwrap();
            let f = boundary_set(&ifs, BoundaryMode::default()).unwrap();
            let o = boundary_set(&ifs, BoundaryMode::Oracle { depth }).unwrap();
            assert_eq!(f, o, "lambda {l}");
            assert!(f.params().contains(&(&l * ratio(2, 1))));
        }
    }

    #[test]
    fn shallow_oracle_is_a_subset() {
        let ifs = make_ifs(&ratio(1, 7)).unwrap();
        let o = boundary_set(&ifs, BoundaryMode::Oracle { depth: 1 }).unwrap();
        assert_eq!(o.params(), &[ratio(2, 7)]);
    }

    #[test]
    fn rotation_permutation_matches_geometry() {
        let ifs = make_ifs(&ratio(3, 16)).unwrap();
        let b = boundary_set(&ifs, BoundaryMode::default()).unwrap();
        let perm = b.rotation();
        for (i, p) in b.points.iter().enumerate() {
            assert_eq!(ifs.rotations()[0].apply(p), b.points[perm[i]]);
        }
    }

    #[test]
    fn guard_and_locate() {
        let ifs = make_ifs(&ratio(1, 7)).unwrap();
        assert!(matches!(
            boundary_set(&ifs, BoundaryMode::Fast { guard: 2 }),
            Err(Error::OrbitOverflow { guard: 2 })
        ));
        for e in Edge::ALL {
            let t = ratio(3, 11);
            assert_eq!(locate_on_boundary(&e.point(&t)), Some((e, t)));
        }
        assert_eq!(
            locate_on_boundary(&Point::new(Scalar::from_ratio(1, 2), Scalar::sqrt3_ratio(1, 6))),
            None
        );
    }
}
