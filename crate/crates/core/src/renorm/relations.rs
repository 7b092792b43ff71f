use serde::Serialize;

use super::RenormContext;
use crate::error::{Error, Result};

pub const DEFAULT_RELATION_GUARD: usize = 12;

/// An equivalence relation on boundary indices, as sorted blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub blocks: Vec<Vec<usize>>,
    pub g_invariant: bool,
    pub preserved: bool,
}

impl Relation {
    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1 || self.blocks.iter().all(|b| b.len() == 1)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Canonical labels: blocks numbered by first occurrence.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn blocks(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (x, &l) in labels.iter().enumerate() {
        out[l].push(x);
    }
    out
}

/// One refinement step: the relation induced on the boundary set by the
/// components of `∪_i F_i(G_J)`.
fn refine(ctx: &RenormContext, labels: &[usize]) -> Vec<usize> {
    let n0 = labels.len();
    let mut uf = UnionFind::new(ctx.glued_points().len());
    let bl = blocks(labels);
    for i in 1..=4u8 {
        for block in &bl {
            for w in block.windows(2) {
                uf.union(ctx.copy_index(i, w[0]), ctx.copy_index(i, w[1]));
            }
        }
    }
    canonical(&(0..n0).map(|x| uf.find(x)).collect::<Vec<_>>())
}

/// `J^(k)` restricted to the boundary set, for the relation given by `labels`.
pub fn preserved_closure(ctx: &RenormContext, labels: &[usize], k: usize) -> Vec<usize> {
    let mut cur = canonical(labels);
    for _ in 0..k {
        cur = refine(ctx, &cur);
    }
    cur
}

/// Restricted-growth enumeration of set partitions, pruned to those mapped to
/// themselves by the rotation.
struct Enumerator<'a> {
    rot: &'a [usize],
    labels: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl Enumerator<'_> {
    fn consistent(&self, k: usize) -> bool {
        let assigned = |x: usize| x <= k;
        for x in 0..=k {
            for y in x + 1..=k {
                let (sx, sy) = (self.rot[x], self.rot[y]);
                if assigned(sx) && assigned(sy) {
                    let same = self.labels[x] == self.labels[y];
                    if same != (self.labels[sx] == self.labels[sy]) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn run(&mut self, k: usize, used: usize) {
        let n = self.labels.len();
        if k == n {
            self.out.push(self.labels.clone());
            return;
        }
        for l in 0..=used {
            self.labels[k] = l;
            if self.consistent(k) {
                self.run(k + 1, used.max(l + 1));
            }
        }
    }
}

/// All rotation-invariant partitions of the boundary set, as canonical labels.
pub fn invariant_partitions(ctx: &RenormContext) -> Vec<Vec<usize>> {
    let n = ctx.boundary_size();
    let rot = &ctx.group()[1];
    let mut e = Enumerator { rot, labels: vec![0; n], out: Vec::new() };
    if n > 0 {
        e.run(1, 1);
    }
    e.out
}

/// Every preserved rotation-invariant relation; with `depth > 1` the
/// relation must also be reproduced by each deeper refinement.
pub fn enumerate_preserved_relations(
    ctx: &RenormContext,
    depth: usize,
    guard: usize,
) -> Result<Vec<Relation>> {
    let n = ctx.boundary_size();
    if n > guard {
        return Err(Error::GuardExceeded { size: n, guard });
    }
    let mut out = Vec::new();
    for labels in invariant_partitions(ctx) {
        let mut preserved = refine(ctx, &labels) == labels;
        let mut cur = labels.clone();
        for _ in 1..depth.max(1) {
            if !preserved {
                break;
            }
            cur = refine(ctx, &cur);
            preserved = cur == labels;
        }
        if preserved {
            out.push(Relation { blocks: blocks(&labels), g_invariant: true, preserved });
        }
    }
    Ok(out)
}
