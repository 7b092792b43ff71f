use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use super::FiniteForm;
use crate::error::{Error, Result};

const PIVOT_WARNING: f64 = 1e12;

#[derive(Clone, Debug)]
struct Step {
    vertex: usize,
    neighbours: Vec<(usize, f64)>,
    total: f64,
}

/// Star-mesh elimination of every vertex outside `keep`.
///
/// The reduced form lives on `0..keep.len()`, index `i` standing for
/// `keep[i]`. The recorded steps give harmonic extensions by back-substitution.
#[derive(Clone, Debug)]
pub struct Reduction {
    n: usize,
    keep: Vec<usize>,
    form: FiniteForm,
    steps: Vec<Step>,
    pivot_ratio: f64,
}

impl Reduction {
    pub fn form(&self) -> &FiniteForm {
        &self.form
    }

    pub fn into_form(self) -> FiniteForm {
        self.form
    }

    pub fn keep(&self) -> &[usize] {
        &self.keep
    }

    /// Ratio of the largest to the smallest elimination pivot.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    /// Harmonic extension of `values` (indexed like `keep`) to all vertices.
    pub fn extend(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.keep.len() {
            return Err(Error::MismatchedVertexSets);
        }
        let mut u = vec![0.0; self.n];
        for (&k, &v) in self.keep.iter().zip(values) {
            u[k] = v;
        }
        for step in self.steps.iter().rev() {
            u[step.vertex] = step.neighbours.iter().map(|&(a, c)| c * u[a]).sum::<f64>() / step.total;
        }
        Ok(u)
    }
}

pub fn reduce(form: &FiniteForm, keep: &[usize]) -> Result<Reduction> {
    let n = form.size();
    if keep.is_empty() {
        return Err(Error::Domain("trace onto an empty set".into()));
    }
    let mut kept = vec![false; n];
    for &k in keep {
        if k >= n {
            return Err(Error::UnknownVertex(k.to_string()));
        }
        if kept[k] {
            return Err(Error::Domain(format!("vertex {k} kept twice")));
        }
        kept[k] = true;
    }
    if !form.is_connected() {
        return Err(Error::Disconnected);
    }

    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for (x, y, c) in form.edges() {
        adj[x].insert(y, c);
        adj[y].insert(x, c);
    }
    let mut queue: BTreeSet<(usize, usize)> =
        (0..n).filter(|&v| !kept[v]).map(|v| (adj[v].len(), v)).collect();
    let mut steps = Vec::with_capacity(n - keep.len());
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);

    while let Some((_, v)) = queue.pop_first() {
        let star = std::mem::take(&mut adj[v]);
        let total: f64 = star.values().sum();
        if !(total > 0.0) {
            return Err(Error::SingularInterior);
        }
        pmin = pmin.min(total);
        pmax = pmax.max(total);
        let nbrs: Vec<(usize, f64)> = star.into_iter().collect();
        for &(a, _) in &nbrs {
            if !kept[a] {
                queue.remove(&(adj[a].len(), a));
            }
            adj[a].remove(&v);
        }
        for (i, &(a, ca)) in nbrs.iter().enumerate() {
            for &(b, cb) in &nbrs[i + 1..] {
                let c = ca * cb / total;
                *adj[a].entry(b).or_insert(0.0) += c;
                *adj[b].entry(a).or_insert(0.0) += c;
            }
        }
        for &(a, _) in &nbrs {
            if !kept[a] {
                queue.insert((adj[a].len(), a));
            }
        }
        steps.push(Step { vertex: v, neighbours: nbrs, total });
    }

    let mut pos = vec![usize::MAX; n];
    for (i, &k) in keep.iter().enumerate() {
        pos[k] = i;
    }
    let mut reduced = FiniteForm::new(keep.len());
    for &k in keep {
        for (&a, &c) in &adj[k] {
            if k < a {
                reduced.add(pos[k], pos[a], c)?;
            }
        }
    }
    let pivot_ratio = if steps.is_empty() { 1.0 } else { pmax / pmin };
    if pivot_ratio > PIVOT_WARNING {
        log::warn!("elimination pivot ratio {pivot_ratio:e} exceeds {PIVOT_WARNING:e}");
    }
    Ok(Reduction { n, keep: keep.to_vec(), form: reduced, steps, pivot_ratio })
}

/// The trace of `form` onto `keep`, on indices `0..keep.len()`.
pub fn trace(form: &FiniteForm, keep: &[usize]) -> Result<FiniteForm> {
    reduce(form, keep).map(Reduction::into_form)
}

pub fn harmonic_extension(form: &FiniteForm, boundary: &[usize], values: &[f64]) -> Result<Vec<f64>> {
    reduce(form, boundary)?.extend(values)
}

pub fn effective_resistance(form: &FiniteForm, x: usize, y: usize) -> Result<f64> {
    if x == y {
        if x >= form.size() {
            return Err(Error::UnknownVertex(x.to_string()));
        }
        return Ok(0.0);
    }
    let c = trace(form, &[x, y])?.conductance(0, 1);
    if c > 0.0 {
        Ok(1.0 / c)
    } else {
        Err(Error::Disconnected)
    }
}

/// Resistance between `x` and the set `target` shorted to a single node.
pub fn effective_resistance_to_set(form: &FiniteForm, x: usize, target: &[usize]) -> Result<f64> {
    let n = form.size();
    if target.contains(&x) {
        return Err(Error::BadTarget);
    }
    if target.is_empty() {
        return Err(Error::Domain("empty target set".into()));
    }
    let mut in_target = vec![false; n];
    for &t in target {
        if t >= n {
            return Err(Error::UnknownVertex(t.to_string()));
        }
        in_target[t] = true;
    }
    let mut index = vec![0usize; n];
    let mut next = 0;
    for v in 0..n {
        if !in_target[v] {
            index[v] = next;
            next += 1;
        }
    }
    let merged = next;
    for v in 0..n {
        if in_target[v] {
            index[v] = merged;
        }
    }
    let mut collapsed = FiniteForm::new(merged + 1);
    for (a, b, c) in form.edges() {
        if index[a] != index[b] {
            collapsed.add(index[a], index[b], c)?;
        }
    }
    effective_resistance(&collapsed, index[x], merged)
}

/// All pairwise effective resistances, via the inverse of the Laplacian
/// grounded at vertex 0.
pub fn resistance_matrix(form: &FiniteForm) -> Result<DMatrix<f64>> {
    let n = form.size();
    if !form.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut r = DMatrix::zeros(n, n);
    if n < 2 {
        return Ok(r);
    }
    let l = form.laplacian();
    let grounded = l.view((1, 1), (n - 1, n - 1)).into_owned();
    let g = grounded.cholesky().ok_or(Error::SingularInterior)?.inverse();
    let at = |x: usize, y: usize| if x == 0 || y == 0 { 0.0 } else { g[(x - 1, y - 1)] };
    for x in 0..n {
        for y in x + 1..n {
            let v = at(x, x) + at(y, y) - 2.0 * at(x, y);
            r[(x, y)] = v;
            r[(y, x)] = v;
        }
    }
    Ok(r)
}

/// Constants `(lower, upper)` with `lower·E1 ≤ E2 ≤ upper·E1`, from the extreme
/// resistance ratios `R1/R2` scaled by `2/(N(N−1))` and `N(N−1)/2`.
pub fn form_comparison(form1: &FiniteForm, form2: &FiniteForm) -> Result<(f64, f64)> {
    let n = form1.size();
    if n != form2.size() {
        return Err(Error::MismatchedVertexSets);
    }
    if n < 2 {
        return Err(Error::Domain("comparison needs at least two vertices".into()));
    }
    let r1 = resistance_matrix(form1)?;
    let r2 = resistance_matrix(form2)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for x in 0..n {
        for y in x + 1..n {
            let q = r1[(x, y)] / r2[(x, y)];
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    let pairs = (n * (n - 1)) as f64 / 2.0;
    Ok((lo / pairs, hi * pairs))
}
