use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{corners, point_in_attractor, Ifs, Similarity, Word};
use crate::error::{Error, Result};
use crate::scalar::{in_triangle, Point};

pub const DEFAULT_LEVEL_CAP: usize = 10;

/// One level-`m` cell `F_w(AG)` and the ids of the level-`m` vertices it contains.
#[derive(Clone, Debug)]
pub struct Cell {
    pub word: Word,
    pub vertices: Vec<usize>,
}

/// The approximating graph `G_m = (V_m, E_m)`.
#[derive(Clone, Debug)]
pub struct GraphApprox {
    pub level: usize,
    pub vertices: Vec<Point>,
    pub edges: BTreeSet<(usize, usize)>,
    pub cells: Vec<Cell>,
    maps: Vec<Similarity>,
    index: HashMap<Point, usize>,
}

impl GraphApprox {
    pub fn vertex_id(&self, p: &Point) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// `F_w` of the `k`-th cell.
    pub fn cell_map(&self, k: usize) -> &Similarity {
        &self.maps[k]
    }

    /// Id of `F_w(p_i)`, `i ∈ 1..=3`.
    pub fn address_id(&self, ifs: &Ifs, w: &Word, corner: usize) -> Option<usize> {
        let p = ifs.apply_word(w, &corners()[corner - 1]);
        self.vertex_id(&p)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }

    /// Edge list as CSV with header `vertex_id_1,vertex_id_2`.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("vertex_id_1,vertex_id_2\n");
        for (a, b) in &self.edges {
            out.push_str(&format!("{a},{b}\n"));
        }
        out
    }
}

/// Buckets vertices on a square grid for candidate lookup.
struct Grid {
    h: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[[f64; 2]], h: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, h)).or_default().push(i);
        }
        Grid { h, buckets }
    }

    fn key(p: &[f64; 2], h: f64) -> (i64, i64) {
        ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64)
    }

    fn query(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<usize> {
        let (x0, y0) = Self::key(&lo, self.h);
        let (x1, y1) = Self::key(&hi, self.h);
        let mut out = Vec::new();
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                if let Some(v) = self.buckets.get(&(gx, gy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Builds `G_m`: vertices `∪_{w∈W_m} F_w(V_0)` identified exactly, and an edge
/// between every pair of vertices lying in a common cell `F_w(AG)`.
pub fn approximation_graph(ifs: &Ifs, m: usize) -> Result<GraphApprox> {
    approximation_graph_with_cap(ifs, m, DEFAULT_LEVEL_CAP)
}

pub fn approximation_graph_with_cap(ifs: &Ifs, m: usize, cap: usize) -> Result<GraphApprox> {
    if m > cap {
        return Err(Error::CapExceeded { what: format!("level {m}"), cap });
    }
    let mut words = vec![Word::empty()];
    let mut maps = vec![Similarity::identity()];
    for _ in 0..m {
        let mut next_words = Vec::with_capacity(words.len() * 4);
        let mut next_maps = Vec::with_capacity(maps.len() * 4);
        for (w, f) in words.iter().zip(&maps) {
            for l in 1..=4u8 {
                next_words.push(w.child(l));
                next_maps.push(f.compose(ifs.map(l)));
            }
        }
        words = next_words;
        maps = next_maps;
    }

    let base = corners();
    let mut vertices = Vec::new();
    let mut index: HashMap<Point, usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(maps.len());
    for f in &maps {
        let tri: [usize; 3] = [0, 1, 2].map(|i| {
            let p = f.apply(&base[i]);
            *index.entry(p.clone()).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            })
        });
        triangles.push(tri);
    }

    let coords: Vec<[f64; 2]> = vertices.iter().map(Point::to_f64).collect();
    let h = 0.5f64.powi(m as i32);
    let grid = Grid::new(&coords, h);
    let pad = 1e-9;
    let mut cells = Vec::with_capacity(maps.len());
    let mut edges = BTreeSet::new();
    for ((w, f), tri) in words.into_iter().zip(&maps).zip(&triangles) {
        let tri_pts = tri.map(|i| vertices[i].clone());
        let lo = [0, 1].map(|k| tri.iter().map(|&i| coords[i][k]).fold(f64::INFINITY, f64::min) - pad);
        let hi = [0, 1].map(|k| tri.iter().map(|&i| coords[i][k]).fold(f64::NEG_INFINITY, f64::max) + pad);
        let mut members: Vec<usize> = tri.to_vec();
        let mut inverse = None;
        for c in grid.query(lo, hi) {
            if tri.contains(&c) || !in_triangle(&vertices[c], &tri_pts) {
                continue;
            }
            let inv = inverse.get_or_insert_with(|| f.inverse());
            if point_in_attractor(ifs, &inv.apply(&vertices[c]))? {
                members.push(c);
            }
        }
        members.sort_unstable();
        members.dedup();
        for (a, &x) in members.iter().enumerate() {
            for &y in &members[a + 1..] {
                edges.insert((x, y));
            }
        }
        cells.push(Cell { word: w, vertices: members });
    }

    let graph = GraphApprox { level: m, vertices, edges, cells, maps, index };
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(graph)
}
