//! Exact geometry of the gasket with an added rotated triangle: the four
//! contractions, the rotation group, words, membership, the cell-boundary set
//! and the approximating graphs.

mod boundary;
mod graph;
mod hausdorff;
mod membership;

use std::fmt;
use std::str::FromStr;

use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ratio, Point, Scalar};

pub use boundary::{boundary_set, BoundaryMode, BoundarySet, Edge, Label, DEFAULT_ORBIT_GUARD};
pub use graph::{approximation_graph, Cell, GraphApprox, DEFAULT_LEVEL_CAP};
pub use hausdorff::{hausdorff_distance, vertex_cloud, HAUSDORFF_DEPTH_CAP};
pub use membership::{point_in_attractor, point_in_attractor_with_cap, DEFAULT_PULLBACK_CAP};

/// A planar similarity `x ↦ linear·x + translation` with exact entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Similarity {
    pub linear: [[Scalar; 2]; 2],
    pub translation: Point,
    /// Contraction ratio; `ratio²` equals the determinant of `linear`.
    pub ratio: f64,
}

impl Similarity {
    fn from_parts(linear: [[Scalar; 2]; 2], translation: Point) -> Self {
        let det = &linear[0][0] * &linear[1][1] - &linear[0][1] * &linear[1][0];
        Similarity { ratio: det.to_f64().sqrt(), linear, translation }
    }

    pub fn identity() -> Self {
        Self::from_parts(
            [[Scalar::one(), Scalar::zero()], [Scalar::zero(), Scalar::one()]],
            Point::new(Scalar::zero(), Scalar::zero()),
        )
    }

    pub fn apply(&self, p: &Point) -> Point {
        let l = &self.linear;
        Point::new(
            &(&l[0][0] * &p.x + &l[0][1] * &p.y) + &self.translation.x,
            &(&l[1][0] * &p.x + &l[1][1] * &p.y) + &self.translation.y,
        )
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Similarity) -> Similarity {
        let a = &self.linear;
        let b = &inner.linear;
        let mul = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
        let linear = [[mul(0, 0), mul(0, 1)], [mul(1, 0), mul(1, 1)]];
        Similarity {
            linear,
            translation: self.apply(&inner.translation),
            ratio: self.ratio * inner.ratio,
        }
    }

    pub fn determinant(&self) -> Scalar {
        &self.linear[0][0] * &self.linear[1][1] - &self.linear[0][1] * &self.linear[1][0]
    }

    pub fn inverse(&self) -> Similarity {
        let det = self.determinant();
        let inv_det = det.recip().expect("similarity with zero determinant");
        let l = &self.linear;
        let linear = [
            [&l[1][1] * &inv_det, -(&l[0][1] * &inv_det)],
            [-(&l[1][0] * &inv_det), &l[0][0] * &inv_det],
        ];
        let t = &self.translation;
        let translation = Point::new(
            -(&(&linear[0][0] * &t.x) + &(&linear[0][1] * &t.y)),
            -(&(&linear[1][0] * &t.x) + &(&linear[1][1] * &t.y)),
        );
        Similarity { linear, translation, ratio: 1.0 / self.ratio }
    }

    /// Exact check that the linear part is a positive multiple of a rotation.
    pub fn is_scaled_rotation(&self) -> bool {
        let l = &self.linear;
        l[0][0] == l[1][1] && l[0][1] == -l[1][0].clone() && !self.determinant().is_negative()
            && !self.determinant().is_zero()
    }

    /// Entries of `linearᵀ·linear − det·I`, all zero for a similarity.
    pub fn orthogonality_residual(&self) -> [Scalar; 4] {
        let l = &self.linear;
        let det = self.determinant();
        let g = |i: usize, j: usize| &(&l[0][i] * &l[0][j]) + &(&l[1][i] * &l[1][j]);
        [g(0, 0) - &det, g(0, 1), g(1, 0), g(1, 1) - det]
    }

    /// `[a, b, c, d, tx, ty]` with `x ↦ (a x + b y + tx, c x + d y + ty)`.
    pub fn to_f64(&self) -> [f64; 6] {
        let l = &self.linear;
        [
            l[0][0].to_f64(),
            l[0][1].to_f64(),
            l[1][0].to_f64(),
            l[1][1].to_f64(),
            self.translation.x.to_f64(),
            self.translation.y.to_f64(),
        ]
    }
}

/// The corners `p1 = (1/2, √3/2)`, `p2 = (0, 0)`, `p3 = (1, 0)`.
pub fn corners() -> [Point; 3] {
    [
        Point::new(Scalar::from_ratio(1, 2), Scalar::sqrt3_ratio(1, 2)),
        Point::new(Scalar::zero(), Scalar::zero()),
        Point::new(Scalar::one(), Scalar::zero()),
    ]
}

/// Centroid of the reference triangle, the common fixed point of `F_4` and `G`.
pub fn centroid() -> Point {
    Point::new(Scalar::from_ratio(1, 2), Scalar::sqrt3_ratio(1, 6))
}

/// A finite word over `{1,2,3,4}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Result<Self> {
        if let Some(bad) = letters.iter().find(|l| !(1..=4).contains(*l)) {
            return Err(Error::Domain(format!("word letter {bad} not in 1..=4")));
        }
        Ok(Word(letters))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, letter: u8) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    /// `r^{#letters in 1..=3} · s^{#letters = 4}`.
    pub fn weight(&self, r: f64, s: f64) -> f64 {
        self.0.iter().map(|&l| if l == 4 { s } else { r }).product()
    }

    /// All words of length `m` in lexicographic order.
    pub fn all(m: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..m {
            out = out
                .iter()
                .flat_map(|w| (1..=4).map(move |l| w.child(l)))
                .collect();
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Accepts `()`, `4`, `(1,4)` or `1,4`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')').trim();
        if t.is_empty() {
            return Ok(Word::empty());
        }
        let letters = t
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<u8>()
                    .map_err(|_| Error::Domain(format!("bad word letter '{x}'")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Word::new(letters)
    }
}

/// Parses `"p/q"` or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Domain(format!("'{s}' is not a rational of the form p/q"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: num::BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: num::BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn rational_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// The four maps `F_1..F_4` for a rational parameter together with the
/// order-three rotation group.
#[derive(Clone, Debug)]
pub struct Ifs {
    lambda: BigRational,
    maps: [Similarity; 4],
    inverses: [Similarity; 4],
    rotations: [Similarity; 2],
    cell_triangles: [[Point; 3]; 4],
}

/// Builds the IFS for `0 < λ < 1/2`.
pub fn make_ifs(lambda: &BigRational) -> Result<Ifs> {
    let half = ratio(1, 2);
    if !lambda.is_positive() || *lambda >= half {
        return Err(Error::Domain(format!(
            "lambda = {} must lie in (0, 1/2)",
            rational_string(lambda)
        )));
    }
    let p = corners();
    let corner_map = |pi: &Point| {
        Similarity::from_parts(
            [
                [Scalar::from_ratio(1, 2), Scalar::zero()],
                [Scalar::zero(), Scalar::from_ratio(1, 2)],
            ],
            Point::new(&pi.x * &Scalar::from_ratio(1, 2), &pi.y * &Scalar::from_ratio(1, 2)),
        )
    };
    let quarter = ratio(1, 4);
    let off = lambda - &quarter;
    let linear4 = [
        [Scalar::rational(quarter.clone()), Scalar::new(BigRational::zero(), off.clone())],
        [Scalar::new(BigRational::zero(), -off), Scalar::rational(quarter)],
    ];
    // F_4(p2) with p2 at the origin
    let t4 = Point::new(
        Scalar::rational(&half - lambda / BigRational::from_integer(2.into())),
        Scalar::new(BigRational::zero(), lambda / BigRational::from_integer(2.into())),
    );
    let f4 = Similarity::from_parts(linear4, t4);
    let maps = [corner_map(&p[0]), corner_map(&p[1]), corner_map(&p[2]), f4];
    let inverses = [
        maps[0].inverse(),
        maps[1].inverse(),
        maps[2].inverse(),
        maps[3].inverse(),
    ];
    let sigma = Similarity::from_parts(
        [
            [Scalar::from_ratio(-1, 2), Scalar::sqrt3_ratio(-1, 2)],
            [Scalar::sqrt3_ratio(1, 2), Scalar::from_ratio(-1, 2)],
        ],
        Point::new(Scalar::one(), Scalar::zero()),
    );
    let sigma2 = sigma.compose(&sigma);
    let cell_triangles = [0, 1, 2, 3].map(|i| p.clone().map(|q| maps[i].apply(&q)));
    Ok(Ifs { lambda: lambda.clone(), maps, inverses, rotations: [sigma, sigma2], cell_triangles })
}

impl Ifs {
    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda.to_f64().unwrap_or(f64::NAN)
    }

    /// `F_i` for `i ∈ 1..=4`.
    pub fn map(&self, i: u8) -> &Similarity {
        &self.maps[usize::from(i) - 1]
    }

    pub fn inverse_map(&self, i: u8) -> &Similarity {
        &self.inverses[usize::from(i) - 1]
    }

    pub fn maps(&self) -> &[Similarity; 4] {
        &self.maps
    }

    /// The rotations by 120° and 240° about the centroid.
    pub fn rotations(&self) -> &[Similarity; 2] {
        &self.rotations
    }

    pub fn cell_triangle(&self, i: u8) -> &[Point; 3] {
        &self.cell_triangles[usize::from(i) - 1]
    }

    /// Contraction ratio of `F_4`, `√(1/16 + 3(1/4 − λ)²)`.
    pub fn rho(&self) -> f64 {
        self.maps[3].ratio
    }

    pub fn rho_squared(&self) -> Scalar {
        self.maps[3].determinant()
    }

    /// Whether λ is a dyadic rational.
    pub fn is_dyadic(&self) -> bool {
        let d = self.lambda.denom();
        d.is_positive() && (d & (d - num::BigInt::one())).is_zero()
    }

    pub fn word_map(&self, w: &Word) -> Similarity {
        w.letters()
            .iter()
            .fold(Similarity::identity(), |acc, &l| acc.compose(self.map(l)))
    }

    pub fn apply_word(&self, w: &Word, p: &Point) -> Point {
        w.letters()
            .iter()
            .rev()
            .fold(p.clone(), |q, &l| self.map(l).apply(&q))
    }
}

/// `F_{w,λ1}(p_i)`, `F_{w,λ2}(p_i)` and their distance. The distance bound
/// `d ≤ 2|λ1 − λ2|` is checked exactly.
pub fn track_point(
    w: &Word,
    corner: usize,
    lambda1: &BigRational,
    lambda2: &BigRational,
) -> Result<(Point, Point, f64)> {
    if !(1..=3).contains(&corner) {
        return Err(Error::Domain(format!("corner index {corner} not in 1..=3")));
    }
    let ifs1 = make_ifs(lambda1)?;
    let ifs2 = make_ifs(lambda2)?;
    let base = &corners()[corner - 1];
    let p = ifs1.apply_word(w, base);
    let q = ifs2.apply_word(w, base);
    let diff = lambda1 - lambda2;
    let bound2 = Scalar::rational(BigRational::from_integer(4.into()) * &diff * &diff);
    if p.dist2(&q) > bound2 {
        return Err(Error::BoundViolation(format!(
            "tracked point distance exceeds 2|Δλ| for word {w}, corner {corner}"
        )));
    }
    let d = p.dist(&q);
    Ok((p, q, d))
}
