use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rand::Rng;

use super::{parse_floats, HadamardSpace, POINT_EQ_TOL};
use crate::error::{Error, Result};

/// A point of a metric tree: an edge and the offset from the edge's first vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePoint {
    pub edge: usize,
    pub offset: f64,
}

impl TreePoint {
    pub fn new(edge: usize, offset: f64) -> Self {
        Self { edge, offset }
    }
}

#[derive(Debug, Clone)]
struct Edge {
    u: usize,
    v: usize,
    len: f64,
}

/// A finite metric tree (ℝ-tree) given by a weighted edge list.
#[derive(Debug, Clone)]
pub struct MetricTree {
    edges: Vec<Edge>,
    vertex_count: usize,
    labels: Vec<u64>,
    // rooted at vertex 0
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
    root_dist: Vec<f64>,
    // canonical representative (edge, offset) of each vertex
    vertex_point: Vec<TreePoint>,
    total_length: f64,
    source: String,
}

/// Endpoint of an edge as seen from a point on it.
#[derive(Debug, Clone, Copy)]
struct Exit {
    vertex: usize,
    cost: f64,
}

impl MetricTree {
    /// Builds a tree from `(u, v, length)` triples over dense vertex ids `0..V`.
    pub fn from_edges(edges: &[(usize, usize, f64)]) -> Result<Self> {
        let labels: Vec<u64> = {
            let max = edges.iter().map(|&(u, v, _)| u.max(v)).max().unwrap_or(0);
            (0..=max as u64).collect()
        };
        Self::build(edges, labels, "tree:<edges>".into())
    }

    /// A star with `legs` edges of equal `length` joined at vertex 0 (the hub).
    /// Leg `k` (0-based) is edge `k`, with offsets measured from the hub.
    pub fn star(legs: usize, length: f64) -> Result<Self> {
        if legs < 1 {
            return Err(Error::Domain("a star needs at least one leg".into()));
        }
        let edges: Vec<_> = (0..legs).map(|k| (0, k + 1, length)).collect();
        let mut t = Self::from_edges(&edges)?;
        t.source = format!("star-tree:{legs}:{length}");
        Ok(t)
    }

    /// Parses the edge-list text format: one `u v length` triple per line,
    /// `#` starts a comment. Vertex labels are arbitrary nonnegative integers.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected `u v length`", lineno + 1)));
            }
            let u: u64 = parts[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex `{}`", lineno + 1, parts[0])))?;
            let v: u64 = parts[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex `{}`", lineno + 1, parts[1])))?;
            let len: f64 = parts[2]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad length `{}`", lineno + 1, parts[2])))?;
            raw.push((u, v, len));
        }
        let mut index = BTreeMap::new();
        for &(u, v, _) in &raw {
            for x in [u, v] {
                let next = index.len();
                index.entry(x).or_insert(next);
            }
        }
        let mut labels = vec![0; index.len()];
        for (&label, &i) in &index {
            labels[i] = label;
        }
        let edges: Vec<_> = raw.iter().map(|&(u, v, l)| (index[&u], index[&v], l)).collect();
        Self::build(&edges, labels, "tree:<text>".into())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut t = Self::parse_edge_list(&text)?;
        t.source = format!("tree:{}", path.display());
        Ok(t)
    }

    fn build(edges: &[(usize, usize, f64)], labels: Vec<u64>, source: String) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Domain("a tree needs at least one edge".into()));
        }
        let vertex_count = labels.len();
        let mut adj = vec![Vec::new(); vertex_count];
        let mut stored = Vec::with_capacity(edges.len());
        for (i, &(u, v, len)) in edges.iter().enumerate() {
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::Domain(format!("edge {i} has non-positive length {len}")));
            }
            if u == v {
                return Err(Error::Domain(format!("edge {i} is a loop")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::Domain(format!("edge {i} references an unknown vertex")));
            }
            adj[u].push((v, i));
            adj[v].push((u, i));
            stored.push(Edge { u, v, len });
        }
        if stored.len() + 1 != vertex_count {
            return Err(Error::Domain(format!(
                "{} edges on {} vertices cannot form a tree",
                stored.len(),
                vertex_count
            )));
        }
        let mut parent = vec![None; vertex_count];
        let mut depth = vec![0; vertex_count];
        let mut root_dist = vec![0.0; vertex_count];
        let mut seen = vec![false; vertex_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for &(y, e) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some((x, e));
                    depth[y] = depth[x] + 1;
                    root_dist[y] = root_dist[x] + stored[e].len;
                    queue.push_back(y);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Domain("edge list is not connected".into()));
        }
        let vertex_point = (0..vertex_count)
            .map(|x| {
                let e = adj[x].iter().map(|&(_, e)| e).min().expect("connected vertex has an edge");
                let off = if stored[e].u == x { 0.0 } else { stored[e].len };
                TreePoint::new(e, off)
            })
            .collect();
        let total_length = stored.iter().map(|e| e.len).sum();
        Ok(Self {
            edges: stored,
            vertex_count,
            labels,
            parent,
            depth,
            root_dist,
            vertex_point,
            total_length,
            source,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.edges[e].len
    }

    /// Endpoints of edge `e` as dense vertex indices.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        (self.edges[e].u, self.edges[e].v)
    }

    /// Original label of a dense vertex index.
    pub fn vertex_label(&self, x: usize) -> u64 {
        self.labels[x]
    }

    /// Canonical point located at vertex `x`.
    pub fn vertex(&self, x: usize) -> TreePoint {
        self.vertex_point[x]
    }

    /// Snaps offsets within `1e-12` of an endpoint to the vertex's canonical representative.
    pub fn canonicalize(&self, p: TreePoint) -> TreePoint {
        let e = &self.edges[p.edge];
        if p.offset <= POINT_EQ_TOL {
            self.vertex_point[e.u]
        } else if p.offset >= e.len - POINT_EQ_TOL {
            self.vertex_point[e.v]
        } else {
            p
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has a parent").0;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent").0;
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent").0;
            b = self.parent[b].expect("non-root has a parent").0;
        }
        a
    }

    pub fn vertex_distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let c = self.lca(a, b);
        (self.root_dist[a] - self.root_dist[c]) + (self.root_dist[b] - self.root_dist[c])
    }

    /// Vertices on the path from `a` to `b`, inclusive, with the edges between them.
    fn vertex_path(&self, a: usize, b: usize) -> (Vec<usize>, Vec<usize>) {
        let c = self.lca(a, b);
        let mut up = vec![a];
        let mut up_edges = Vec::new();
        let mut x = a;
        while x != c {
            let (px, e) = self.parent[x].expect("non-root has a parent");
            up_edges.push(e);
            up.push(px);
            x = px;
        }
        let mut down = Vec::new();
        let mut down_edges = Vec::new();
        let mut y = b;
        while y != c {
            let (py, e) = self.parent[y].expect("non-root has a parent");
            down.push(y);
            down_edges.push(e);
            y = py;
        }
        down.reverse();
        down_edges.reverse();
        up.extend(down);
        up_edges.extend(down_edges);
        (up, up_edges)
    }

    fn check_index(&self, p: &TreePoint) -> Result<()> {
        if p.edge >= self.edges.len() {
            return Err(Error::Shape(format!("edge {} not in tree with {} edges", p.edge, self.edges.len())));
        }
        Ok(())
    }

    fn exits(&self, p: &TreePoint) -> [Exit; 2] {
        let e = &self.edges[p.edge];
        [
            Exit { vertex: e.u, cost: p.offset },
            Exit { vertex: e.v, cost: e.len - p.offset },
        ]
    }

    /// Shortest route between points on different edges: exit vertices and total length.
    fn route(&self, a: &TreePoint, b: &TreePoint) -> (Exit, Exit, f64) {
        let mut best: Option<(Exit, Exit, f64)> = None;
        for xa in self.exits(a) {
            for xb in self.exits(b) {
                let d = xa.cost + self.vertex_distance(xa.vertex, xb.vertex) + xb.cost;
                if best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((xa, xb, d));
                }
            }
        }
        best.expect("four candidate routes")
    }

    /// Point at distance `s` from vertex `from` along edge `e`.
    fn along_edge(&self, e: usize, from: usize, s: f64) -> TreePoint {
        let edge = &self.edges[e];
        let off = if edge.u == from { s } else { edge.len - s };
        self.canonicalize(TreePoint::new(e, off.clamp(0.0, edge.len)))
    }
}

impl HadamardSpace for MetricTree {
    type Point = TreePoint;

    fn describe(&self) -> String {
        self.source.clone()
    }

    fn check_point(&self, p: &TreePoint) -> Result<()> {
        self.check_index(p)?;
        let len = self.edges[p.edge].len;
        if !(p.offset >= 0.0 && p.offset <= len) {
            return Err(Error::Domain(format!("offset {} outside [0, {len}] on edge {}", p.offset, p.edge)));
        }
        Ok(())
    }

    fn distance(&self, a: &TreePoint, b: &TreePoint) -> Result<f64> {
        self.check_index(a)?;
        self.check_index(b)?;
        if a.edge == b.edge {
            return Ok((a.offset - b.offset).abs());
        }
        Ok(self.route(a, b).2)
    }

    fn geodesic_unchecked(&self, a: &TreePoint, b: &TreePoint, t: f64) -> Result<TreePoint> {
        self.check_index(a)?;
        self.check_index(b)?;
        if t == 0.0 {
            return Ok(*a);
        }
        if t == 1.0 {
            return Ok(*b);
        }
        if a.edge == b.edge {
            return Ok(self.canonicalize(TreePoint::new(a.edge, a.offset + t * (b.offset - a.offset))));
        }
        let (xa, xb, total) = self.route(a, b);
        let mut s = t * total;
        if s <= xa.cost {
            let e = &self.edges[a.edge];
            let off = if xa.vertex == e.u { a.offset - s } else { a.offset + s };
            return Ok(self.canonicalize(TreePoint::new(a.edge, off.clamp(0.0, e.len))));
        }
        s -= xa.cost;
        let (verts, path_edges) = self.vertex_path(xa.vertex, xb.vertex);
        for (k, &e) in path_edges.iter().enumerate() {
            let len = self.edges[e].len;
            if s <= len {
                return Ok(self.along_edge(e, verts[k], s));
            }
            s -= len;
        }
        // remaining distance runs along b's edge from its exit vertex
        let s = s.min(xb.cost);
        Ok(self.along_edge(b.edge, xb.vertex, s))
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, _scale: f64) -> TreePoint {
        let mut u = rng.random::<f64>() * self.total_length;
        for (i, e) in self.edges.iter().enumerate() {
            if u < e.len || i + 1 == self.edges.len() {
                let off = (u / e.len).clamp(0.0, 1.0) * e.len;
                return TreePoint::new(i, off);
            }
            u -= e.len;
        }
        unreachable!("tree has at least one edge")
    }

    fn parse_point(&self, fields: &[&str]) -> Result<TreePoint> {
        if fields.len() != 2 {
            return Err(Error::Shape(format!("expected `edge,offset`, found {} columns", fields.len())));
        }
        let edge: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad edge id `{}`", fields[0])))?;
        let offset = parse_floats(&fields[1..])?[0];
        let p = TreePoint::new(edge, offset);
        self.check_point(&p)?;
        Ok(p)
    }

    fn format_point(&self, p: &TreePoint) -> Vec<String> {
        vec![p.edge.to_string(), p.offset.to_string()]
    }
}
