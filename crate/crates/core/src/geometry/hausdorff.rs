use std::collections::HashMap;

use num::{Signed, ToPrimitive};

use super::{corners, Ifs};
use crate::error::{Error, Result};

pub const HAUSDORFF_DEPTH_CAP: usize = 10;

/// Floating-point cloud `{F_w(p_i) : w ∈ W_k}` (with repetitions).
pub fn vertex_cloud(ifs: &Ifs, k: usize) -> Vec<[f64; 2]> {
    let maps: Vec<[f64; 6]> = ifs.maps().iter().map(|m| m.to_f64()).collect();
    let mut pts: Vec<[f64; 2]> = corners().iter().map(|p| p.to_f64()).collect();
    // F_w(p) for |w| = k is F_{w_1}(F_{w_2..}(p)), so apply maps outermost last
    for _ in 0..k {
        let mut next = Vec::with_capacity(pts.len() * 4);
        for m in &maps {
            for p in &pts {
                next.push([m[0] * p[0] + m[1] * p[1] + m[4], m[2] * p[0] + m[3] * p[1] + m[5]]);
            }
        }
        pts = next;
    }
    pts
}

struct Buckets {
    h: f64,
    cells: HashMap<(i64, i64), Vec<[f64; 2]>>,
    radius_max: i64,
}

impl Buckets {
    fn new(pts: &[[f64; 2]], h: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<[f64; 2]>> = HashMap::new();
        for p in pts {
            cells.entry(Self::key(p, h)).or_default().push(*p);
        }
        Buckets { h, cells, radius_max: (2.0 / h).ceil() as i64 + 2 }
    }

    fn key(p: &[f64; 2], h: f64) -> (i64, i64) {
        ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64)
    }

    /// Distance from `p` to the nearest stored point, searching square rings
    /// until the ring is farther than the best hit.
    fn nearest(&self, p: &[f64; 2]) -> f64 {
        let (cx, cy) = Self::key(p, self.h);
        let mut best = f64::INFINITY;
        for r in 0..=self.radius_max {
            if best.is_finite() && (r as f64 - 1.0) * self.h > best {
                break;
            }
            for gx in cx - r..=cx + r {
                for gy in cy - r..=cy + r {
                    if (gx - cx).abs() != r && (gy - cy).abs() != r {
                        continue;
                    }
                    if let Some(v) = self.cells.get(&(gx, gy)) {
                        for q in v {
                            best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
                        }
                    }
                }
            }
        }
        best
    }
}

fn directed(a: &[[f64; 2]], b: &Buckets) -> f64 {
    a.iter().map(|p| b.nearest(p)).fold(0.0, f64::max)
}

/// Hausdorff distance between the depth-`k` vertex clouds, together with the
/// bound `2|λ1 − λ2|`.
pub fn hausdorff_distance(ifs1: &Ifs, ifs2: &Ifs, k: usize) -> Result<(f64, f64)> {
    if k > HAUSDORFF_DEPTH_CAP {
        return Err(Error::CapExceeded { what: format!("depth {k}"), cap: HAUSDORFF_DEPTH_CAP });
    }
    let bound = 2.0 * (ifs1.lambda() - ifs2.lambda()).abs().to_f64().unwrap_or(f64::NAN);
    let a = vertex_cloud(ifs1, k);
    let b = vertex_cloud(ifs2, k);
    let h = 0.5f64.powi(k as i32).max(1e-4);
    let ba = Buckets::new(&a, h);
    let bb = Buckets::new(&b, h);
    let est = directed(&a, &bb).max(directed(&b, &ba));
    Ok((est, bound))
}

#[cfg(test)]
mod tests {
    use super::super::make_ifs;
    use super::*;
    use crate::scalar::ratio;

    fn brute(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let d = |x: &[[f64; 2]], y: &[[f64; 2]]| {
            x.iter()
                .map(|p| y.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        d(a, b).max(d(b, a))
    }

    #[test]
    fn identical_sets() {
        let ifs = make_ifs(&ratio(1, 4)).unwrap();
        let (e, b) = hausdorff_distance(&ifs, &ifs, 5).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn grid_search_matches_brute_force() {
        let i1 = make_ifs(&ratio(1, 4)).unwrap();
        let i2 = make_ifs(&ratio(3, 8)).unwrap();
        let (e, _) = hausdorff_distance(&i1, &i2, 4).unwrap();
        let exact = brute(&vertex_cloud(&i1, 4), &vertex_cloud(&i2, 4));
        assert!((e - exact).abs() < 1e-15);
    }

    #[test]
    fn bounds_hold() {
        let i1 = make_ifs(&ratio(1, 4)).unwrap();
        let i2 = make_ifs(&ratio(5, 16)).unwrap();
        let (e, b) = hausdorff_distance(&i1, &i2, 7).unwrap();
        assert_eq!(b, 0.125);
        assert!(e <= b + 2.0 * 0.5f64.powi(7));
        let i3 = make_ifs(&ratio(17, 64)).unwrap();
        let (e, b) = hausdorff_distance(&i1, &i3, 8).unwrap();
        assert!(e <= 1.0 / 32.0 + 0.5f64.powi(7));
        assert_eq!(b, 1.0 / 32.0);
        assert!(hausdorff_distance(&i1, &i3, 11).is_err());
    }
}
