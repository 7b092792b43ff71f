//! Finite resistance forms.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::format_float;

mod reduce;
mod resolvent;

pub use reduce::{
    effective_resistance, effective_resistance_to_set, form_comparison, harmonic_extension,
    reduce, resistance_matrix, trace, Reduction,
};
pub use resolvent::{resolvent, ResolventKernel};

/// Negative conductances above this are rounding dust and get dropped.
pub const NEGATIVE_DUST: f64 = -1e-13;

/// Floor used in relative conductance comparisons.
pub const RELATIVE_FLOOR: f64 = 1e-15;

/// Symmetric nonnegative conductances on the vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteForm {
    n: usize,
    cond: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize)]
struct EdgeRecord {
    x: usize,
    y: usize,
    c: f64,
}

#[derive(Serialize)]
struct FormRecord {
    vertices: Vec<usize>,
    edges: Vec<EdgeRecord>,
}

fn key(x: usize, y: usize) -> (usize, usize) {
    (x.min(y), x.max(y))
}

impl FiniteForm {
    pub fn new(n: usize) -> Self {
        FiniteForm { n, cond: BTreeMap::new() }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut f = FiniteForm::new(n);
        for (x, y, c) in edges {
            f.add(x, y, c)?;
        }
        Ok(f)
    }

    /// Complete graph with every conductance equal to `c`.
    pub fn complete(n: usize, c: f64) -> Self {
        let mut f = FiniteForm::new(n);
        for x in 0..n {
            for y in x + 1..n {
                f.cond.insert((x, y), c);
            }
        }
        f
    }

    /// Random connected form: a random spanning tree plus extra edges, with
    /// conductances drawn from `[0.1, 2]`.
    pub fn random_connected<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut f = FiniteForm::new(n);
        for y in 1..n {
            let x = rng.gen_range(0..y);
            f.cond.insert((x, y), rng.gen_range(0.1..2.0));
        }
        for x in 0..n {
            for y in x + 1..n {
                if rng.gen_bool(0.4) {
                    f.cond.insert((x, y), rng.gen_range(0.1..2.0));
                }
            }
        }
        f
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn check_pair(&self, x: usize, y: usize) -> Result<()> {
        if x >= self.n || y >= self.n {
            return Err(Error::UnknownVertex(format!("{} of {}", x.max(y), self.n)));
        }
        if x == y {
            return Err(Error::Domain(format!("self-loop at {x}")));
        }
        Ok(())
    }

    /// Adds `c` to the conductance between `x` and `y`.
    pub fn add(&mut self, x: usize, y: usize, c: f64) -> Result<()> {
        self.check_pair(x, y)?;
        let total = self.conductance(x, y) + c;
        self.store(x, y, total)
    }

    pub fn set(&mut self, x: usize, y: usize, c: f64) -> Result<()> {
        self.check_pair(x, y)?;
        self.store(x, y, c)
    }

    fn store(&mut self, x: usize, y: usize, c: f64) -> Result<()> {
        if !c.is_finite() || c < NEGATIVE_DUST {
            return Err(Error::NegativeConductance { x, y, value: c });
        }
        if c <= 0.0 {
            self.cond.remove(&key(x, y));
        } else {
            self.cond.insert(key(x, y), c);
        }
        Ok(())
    }

    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        self.cond.get(&key(x, y)).copied().unwrap_or(0.0)
    }

    /// Nonzero conductances `(x, y, c)` with `x < y`, in order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cond.iter().map(|(&(x, y), &c)| (x, y, c))
    }

    pub fn edge_count(&self) -> usize {
        self.cond.len()
    }

    pub fn total_conductance(&self) -> f64 {
        self.cond.values().sum()
    }

    /// `½ Σ_{x≠y} c_{xy} (f(x) − f(y))²`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.edges().map(|(x, y, c)| c * (f[x] - f[y]).powi(2)).sum()
    }

    /// Bilinear form `E(f, g)`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.edges().map(|(x, y, c)| c * (f[x] - f[y]) * (g[x] - g[y])).sum()
    }

    pub fn scaled(&self, a: f64) -> FiniteForm {
        FiniteForm { n: self.n, cond: self.cond.iter().map(|(&k, &c)| (k, a * c)).collect() }
    }

    /// Sum of two forms on the same vertices.
    pub fn plus(&self, other: &FiniteForm) -> Result<FiniteForm> {
        if self.n != other.n {
            return Err(Error::MismatchedVertexSets);
        }
        let mut out = self.clone();
        for (x, y, c) in other.edges() {
            out.add(x, y, c)?;
        }
        Ok(out)
    }

    /// The form transported along `perm`: vertex `x` becomes `perm[x]`.
    pub fn permuted(&self, perm: &[usize]) -> FiniteForm {
        FiniteForm {
            n: self.n,
            cond: self.cond.iter().map(|(&(x, y), &c)| (key(perm[x], perm[y]), c)).collect(),
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (x, y, c) in self.edges() {
            adj[x].push((y, c));
            adj[y].push((x, c));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for (x, y, c) in self.edges() {
            l[(x, y)] -= c;
            l[(y, x)] -= c;
            l[(x, x)] += c;
            l[(y, y)] += c;
        }
        l
    }

    /// Largest relative change `|a − b| / max(|a|, |b|, floor)` over all pairs.
    pub fn relative_difference(&self, other: &FiniteForm) -> f64 {
        let mut keys: Vec<(usize, usize)> = self.cond.keys().copied().collect();
        keys.extend(other.cond.keys().copied());
        keys.into_iter()
            .map(|(x, y)| {
                let a = self.conductance(x, y);
                let b = other.conductance(x, y);
                (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
            })
            .fold(0.0, f64::max)
    }

    /// Average of the form over a group of vertex permutations.
    pub fn symmetrized(&self, group: &[Vec<usize>]) -> FiniteForm {
        let mut out = FiniteForm::new(self.n);
        let w = 1.0 / group.len() as f64;
        for perm in group {
            for (x, y, c) in self.edges() {
                *out.cond.entry(key(perm[x], perm[y])).or_insert(0.0) += w * c;
            }
        }
        out
    }

    /// Largest conductance deviation between the form and its images under `group`.
    pub fn asymmetry(&self, group: &[Vec<usize>]) -> f64 {
        group.iter().map(|perm| self.relative_difference(&self.permuted(perm))).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_id,y_id,conductance\n");
        for (x, y, c) in self.edges() {
            out.push_str(&format!("{x},{y},{}\n", format_float(c)));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rec = FormRecord {
            vertices: (0..self.n).collect(),
            edges: self.edges().map(|(x, y, c)| EdgeRecord { x, y, c }).collect(),
        };
        serde_json::to_value(rec).expect("form record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dust_and_negatives() {
        let mut f = FiniteForm::new(3);
        f.add(0, 1, 1.0).unwrap();
        f.add(0, 1, -1.0 - 5e-14).unwrap();
        assert_eq!(f.edge_count(), 0);
        assert!(matches!(f.set(1, 2, -1e-6), Err(Error::NegativeConductance { .. })));
        assert!(f.set(1, 1, 1.0).is_err());
        assert!(f.set(1, 3, 1.0).is_err());
    }

    #[test]
    fn energy_matches_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = FiniteForm::random_connected(7, &mut rng);
        let l = f.laplacian();
        let v: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = nalgebra::DVector::from_vec(v.clone());
        let quad = (x.transpose() * &l * &x)[(0, 0)];
        assert!((quad - f.energy(&v)).abs() < 1e-12);
        assert!(f.is_connected());
    }

    #[test]
    fn serialization() {
        let f = FiniteForm::from_edges(2, [(1, 0, 0.5)]).unwrap();
        assert_eq!(f.to_csv(), "x_id,y_id,conductance\n0,1,5.0000000000000000e-1\n");
        assert_eq!(f.to_json()["edges"][0]["c"], 0.5);
    }

    #[test]
    fn symmetrization() {
        let f = FiniteForm::from_edges(3, [(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let group = vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]];
        let s = f.symmetrized(&group);
        for (_, _, c) in s.edges() {
            assert!((c - 1.0).abs() < 1e-15);
        }
        assert!(s.asymmetry(&group) < 1e-15);
        assert!(f.asymmetry(&group) > 0.5);
    }
}
