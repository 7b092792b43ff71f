//! Exact arithmetic in the quadratic field Q[√3] and planar points over it.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// An element `a + b·√3` with rational `a`, `b`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Scalar {
    pub a: BigRational,
    pub b: BigRational,
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl Scalar {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        Scalar { a, b }
    }

    pub fn rational(a: BigRational) -> Self {
        Scalar { a, b: BigRational::zero() }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::rational(ratio(num, den))
    }

    /// `(num/den)·√3`.
    pub fn sqrt3_ratio(num: i64, den: i64) -> Self {
        Scalar { a: BigRational::zero(), b: ratio(num, den) }
    }

    pub fn zero() -> Self {
        Self::rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Galois conjugate `a − b·√3`.
    pub fn conjugate(&self) -> Self {
        Scalar { a: self.a.clone(), b: -self.b.clone() }
    }

    /// Field norm `a² − 3b²`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(BigInt::from(3)) * &self.b * &self.b
    }

    /// Exact sign of `a + b√3`.
    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&BigRational::zero());
        let sb = self.b.cmp(&BigRational::zero());
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            (sa, _) => {
                // opposite signs: compare a² with 3b²
                let n = self.norm();
                match n.cmp(&BigRational::zero()) {
                    Ordering::Greater => sa,
                    Ordering::Less => sa.reverse(),
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * SQRT3
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        let c = self.conjugate();
        Some(Scalar { a: c.a / &n, b: c.b / n })
    }

    /// The exact form `"(a_num/a_den) + (b_num/b_den)*sqrt3"`.
    pub fn exact_string(&self) -> String {
        format!(
            "({}/{}) + ({}/{})*sqrt3",
            self.a.numer(),
            self.a.denom(),
            self.b.numer(),
            self.b.denom()
        )
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.exact_string())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<'a> $tr<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                let f: fn(&Scalar, &Scalar) -> Scalar = $body;
                f(self, rhs)
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, |x, y| Scalar { a: &x.a + &y.a, b: &x.b + &y.b });
forward_binop!(Sub, sub, |x, y| Scalar { a: &x.a - &y.a, b: &x.b - &y.b });
forward_binop!(Mul, mul, |x, y| {
    let three = BigRational::from_integer(BigInt::from(3));
    Scalar {
        a: &x.a * &y.a + three * &x.b * &y.b,
        b: &x.a * &y.b + &x.b * &y.a,
    }
});
forward_binop!(Div, div, |x, y| {
    let inv = y.recip().expect("division by zero in Q[sqrt3]");
    x * &inv
});

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { a: -self.a, b: -self.b }
    }
}

impl<'a> Neg for &'a Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { a: -self.a.clone(), b: -self.b.clone() }
    }
}

/// A point of the plane with coordinates in Q[√3].
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Point {
    pub x: Scalar,
    pub y: Scalar,
}

impl Point {
    pub fn new(x: Scalar, y: Scalar) -> Self {
        Point { x, y }
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [self.x.to_f64(), self.y.to_f64()]
    }

    pub fn dist(&self, other: &Point) -> f64 {
        let [x0, y0] = self.to_f64();
        let [x1, y1] = other.to_f64();
        (x0 - x1).hypot(y0 - y1)
    }

    /// Exact squared distance.
    pub fn dist2(&self, other: &Point) -> Scalar {
        let dx = &self.x - &other.x;
        let dy = &self.y - &other.y;
        &dx * &dx + &dy * &dy
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point { x: &self.x - &other.x, y: &self.y - &other.y }
    }

    /// Coordinates as `[x_decimal, y_decimal, x_exact, y_exact]`.
    pub fn serialize_fields(&self) -> [String; 4] {
        let [x, y] = self.to_f64();
        [
            format_float(x),
            format_float(y),
            self.x.exact_string(),
            self.y.exact_string(),
        ]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.x, self.y)
    }
}

/// Floats are printed with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Exact point-in-closed-triangle test.
pub fn in_triangle(p: &Point, tri: &[Point; 3]) -> bool {
    let orient = |a: &Point, b: &Point, c: &Point| -> Ordering {
        let ab = b.sub(a);
        let ac = c.sub(a);
        (&ab.x * &ac.y - &ab.y * &ac.x).signum()
    };
    let o = orient(&tri[0], &tri[1], &tri[2]);
    let s0 = orient(&tri[0], &tri[1], p);
    let s1 = orient(&tri[1], &tri[2], p);
    let s2 = orient(&tri[2], &tri[0], p);
    [s0, s1, s2].iter().all(|s| *s == o || *s == Ordering::Equal)
}

/// Exact on-segment test (closed segment).
pub fn on_segment(p: &Point, a: &Point, b: &Point) -> bool {
    let ab = b.sub(a);
    let ap = p.sub(a);
    if !(&ab.x * &ap.y - &ab.y * &ap.x).is_zero() {
        return false;
    }
    let dot = &ab.x * &ap.x + &ab.y * &ap.y;
    let len2 = &ab.x * &ab.x + &ab.y * &ab.y;
    !dot.is_negative() && (dot - len2).signum() != Ordering::Greater
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sc(a: (i64, i64), b: (i64, i64)) -> Scalar {
        Scalar::new(ratio(a.0, a.1), ratio(b.0, b.1))
    }

    #[test]
    fn sign_of_mixed_terms() {
        // 2 - √3 > 0, 1 - √3 < 0, -7 + 4√3 < 0 (49 > 48), -6 + 4√3 > 0
        assert_eq!(sc((2, 1), (-1, 1)).signum(), Ordering::Greater);
        assert_eq!(sc((1, 1), (-1, 1)).signum(), Ordering::Less);
        assert_eq!(sc((-7, 1), (4, 1)).signum(), Ordering::Less);
        assert_eq!(sc((-6, 1), (4, 1)).signum(), Ordering::Greater);
        assert_eq!(Scalar::zero().signum(), Ordering::Equal);
    }

    #[test]
    fn inverse_is_exact() {
        let x = sc((3, 4), (-5, 7));
        let y = x.recip().unwrap();
        assert_eq!(&x * &y, Scalar::one());
        assert!(Scalar::zero().recip().is_none());
    }

    #[test]
    fn exact_string_format() {
        assert_eq!(sc((1, 2), (-3, 4)).exact_string(), "(1/2) + (-3/4)*sqrt3");
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn triangle_and_segment_tests() {
        let tri = [
            Point::new(Scalar::from_ratio(1, 2), Scalar::sqrt3_ratio(1, 2)),
            Point::new(Scalar::zero(), Scalar::zero()),
            Point::new(Scalar::one(), Scalar::zero()),
        ];
        let mid = Point::new(Scalar::from_ratio(1, 2), Scalar::zero());
        assert!(in_triangle(&mid, &tri));
        assert!(on_segment(&mid, &tri[1], &tri[2]));
        let out = Point::new(Scalar::from_ratio(1, 2), Scalar::sqrt3_ratio(-1, 100));
        assert!(!in_triangle(&out, &tri));
        let beyond = Point::new(Scalar::from_ratio(2, 1), Scalar::zero());
        assert!(!on_segment(&beyond, &tri[1], &tri[2]));
    }

    fn small() -> impl Strategy<Value = Scalar> {
        (-20i64..20, 1i64..12, -20i64..20, 1i64..12).prop_map(|(a, b, c, d)| sc((a, b), (c, d)))
    }

    proptest! {
        #[test]
        fn field_axioms(x in small(), y in small(), z in small()) {
            prop_assert_eq!(&(&x + &y) * &z, &(&x * &z) + &(&y * &z));
            if !y.is_zero() {
                prop_assert_eq!(&(&x / &y) * &y, x.clone());
            }
            // order agrees with floating point whenever the gap is visible
            let gap = x.to_f64() - y.to_f64();
            if gap.abs() > 1e-12 {
                prop_assert_eq!(x.cmp(&y), gap.partial_cmp(&0.0).unwrap());
            }
        }
    }
}
