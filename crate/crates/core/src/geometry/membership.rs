use std::collections::{HashMap, HashSet};

use super::{corners, Ifs};
use crate::error::{Error, Result};
use crate::scalar::{in_triangle, on_segment, Point};

pub const DEFAULT_PULLBACK_CAP: usize = 64;

pub(crate) fn on_reference_boundary(p: &Point) -> bool {
    let c = corners();
    on_segment(p, &c[1], &c[2]) || on_segment(p, &c[2], &c[0]) || on_segment(p, &c[0], &c[1])
}

/// Exact membership in the attractor.
pub fn point_in_attractor(ifs: &Ifs, p: &Point) -> Result<bool> {
    point_in_attractor_with_cap(ifs, p, DEFAULT_PULLBACK_CAP)
}

pub fn point_in_attractor_with_cap(ifs: &Ifs, p: &Point, cap: usize) -> Result<bool> {
    if !in_triangle(p, &corners()) {
        return Ok(false);
    }
    let mut search = Descent { ifs, cap, memo: HashMap::new(), path: HashSet::new() };
    search.run(p)
}

struct Descent<'a> {
    ifs: &'a Ifs,
    cap: usize,
    memo: HashMap<Point, bool>,
    path: HashSet<Point>,
}

impl Descent<'_> {
    fn run(&mut self, p: &Point) -> Result<bool> {
        // the boundary of the triangle lies in the gasket of F_1..F_3
        if on_reference_boundary(p) {
            return Ok(true);
        }
        if let Some(&known) = self.memo.get(p) {
            return Ok(known);
        }
        // a repeated pullback is an eventually periodic address
        if self.path.contains(p) {
            return Ok(true);
        }
        if self.memo.len() + self.path.len() >= self.cap {
            return Err(Error::DepthExceeded { cap: self.cap });
        }
        self.path.insert(p.clone());
        let mut found = false;
        for i in 1..=4u8 {
            if in_triangle(p, self.ifs.cell_triangle(i)) {
                let q = self.ifs.inverse_map(i).apply(p);
                if self.run(&q)? {
                    found = true;
                    break;
                }
            }
        }
        self.path.remove(p);
        self.memo.insert(p.clone(), found);
        Ok(found)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{centroid, make_ifs, Word};
    use super::*;
    use crate::scalar::{ratio, Scalar};

    fn cover(ifs: &Ifs, k: usize) -> Vec<[Point; 3]> {
        Word::all(k)
            .iter()
            .map(|w| {
                let f = ifs.word_map(w);
                corners().map(|c| f.apply(&c))
            })
            .collect()
    }

    /// Depth-k cover oracle: is `p` in some `F_w▲` with `|w| = k`?
    fn covered(ifs: &Ifs, p: &Point, k: usize) -> bool {
        cover(ifs, k).iter().any(|tri| in_triangle(p, tri))
    }

    #[test]
    fn bottom_edge_point_is_member() {
        for (a, b) in [(1, 4), (1, 7), (3, 16), (5, 11)] {
            let l = ratio(a, b);
            let ifs = make_ifs(&l).unwrap();
            let p = Point::new(Scalar::rational(&l * ratio(2, 1)), Scalar::zero());
            assert!(point_in_attractor(&ifs, &p).unwrap());
        }
    }

    #[test]
    fn centroid_is_fixed_point_of_f4() {
        let ifs = make_ifs(&ratio(1, 4)).unwrap();
        assert!(point_in_attractor(&ifs, &centroid()).unwrap());
        assert!(covered(&ifs, &centroid(), 6));
    }

    #[test]
    fn hole_point_is_not_member() {
        let ifs = make_ifs(&ratio(1, 4)).unwrap();
        let p = Point::new(Scalar::from_ratio(1, 2), Scalar::sqrt3_ratio(1, 32));
        assert!(!point_in_attractor(&ifs, &p).unwrap());
        assert!(!covered(&ifs, &p, 4));
        let outside = Point::new(Scalar::from_ratio(2, 1), Scalar::zero());
        assert!(!point_in_attractor(&ifs, &outside).unwrap());
    }

    #[test]
    fn f4_images_are_members() {
        let ifs = make_ifs(&ratio(1, 4)).unwrap();
        for c in corners() {
            assert!(point_in_attractor(&ifs, &ifs.map(4).apply(&c)).unwrap());
        }
        let w = Word::new(vec![4, 4, 2, 4]).unwrap();
        let p = ifs.apply_word(&w, &centroid());
        assert!(point_in_attractor(&ifs, &p).unwrap());
    }

    #[test]
    fn membership_agrees_with_cover_oracle() {
        // a spread of exact points on a lattice; non-members must drop out of
        // the depth-5 cover, members must stay covered
        let ifs = make_ifs(&ratio(3, 8)).unwrap();
        let tris = cover(&ifs, 5);
        for i in 1..16 {
            for j in 1..16 {
                let p = Point::new(Scalar::from_ratio(i, 16), Scalar::sqrt3_ratio(j, 32));
                if !in_triangle(&p, &corners()) {
                    continue;
                }
                if point_in_attractor(&ifs, &p).unwrap() {
                    assert!(tris.iter().any(|t| in_triangle(&p, t)), "member {p} not covered");
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let ifs = make_ifs(&ratio(1, 4)).unwrap();
        let p = ifs.apply_word(&Word::new(vec![4, 4, 4]).unwrap(), &Point::new(
            Scalar::from_ratio(1, 3),
            Scalar::sqrt3_ratio(1, 7),
        ));
        assert!(matches!(
            point_in_attractor_with_cap(&ifs, &p, 2),
            Err(Error::DepthExceeded { cap: 2 })
        ));
    }
}
