//! Finite metric measure spaces: model graph geometries with graph metric,
//! positive measure, balls/annuli, and volume-doubling diagnostics.

use crate::fit::linfit;
use crate::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Geometry selector with size parameters; this plus a measure kind fully
/// determines a space, and is what gets serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Cycle { n: usize },
    Path { n: usize },
    GridTorus { nx: usize, ny: usize },
    BinaryTree { levels: usize },
    Sierpinski { level: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Counting,
    Degree,
}

/// A finite metric measure space: connected graph with shortest-path metric,
/// strictly positive measure, and smooth per-point coordinate features that
/// symbol expressions can reference.
#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    pub spec: SpaceSpec,
    pub measure_kind: MeasureKind,
    pub n: usize,
    /// Edges as (u, v) with u < v, sorted.
    pub edges: Vec<(usize, usize)>,
    pub measure: Vec<f64>,
    /// Full shortest-path distance matrix.
    pub dist: Array2<f64>,
    pub diameter: f64,
    /// Per-point feature vector, constant length across points.
    pub features: Vec<Vec<f64>>,
}

/// Open metric ball: members satisfy d(center, y) < radius.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

/// Dyadic annulus around a ball: 2^i r <= d < 2^{i+1} r.
#[derive(Debug, Clone)]
pub struct Annulus {
    pub center: usize,
    pub inner: f64,
    pub outer: f64,
    pub members: Vec<usize>,
}

/// Log-log volume growth fit over a radius grid.
#[derive(Debug, Clone)]
pub struct DoublingProfile {
    pub radii: Vec<f64>,
    /// Mean over centers of log volume, one entry per radius.
    pub mean_log_volume: Vec<f64>,
    /// Fitted growth exponent n in V(r) ~ r^n.
    pub n_fit: f64,
    pub r2: f64,
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

fn bfs_all_pairs(n: usize, edges: &[(usize, usize)]) -> Result<Array2<f64>> {
    let adj = adjacency(n, edges);
    let mut dist = Array2::from_elem((n, n), f64::INFINITY);
    let mut work = vec![usize::MAX; n];
    for src in 0..n {
        work.iter_mut().for_each(|w| *w = usize::MAX);
        work[src] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if work[v] == usize::MAX {
                    work[v] = work[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (v, &d) in work.iter().enumerate() {
            if d == usize::MAX {
                return Err(Error::Invalid("graph is not connected".into()));
            }
            dist[[src, v]] = d as f64;
        }
    }
    Ok(dist)
}

/// Build the Sierpinski gasket graph at the given subdivision level.
/// Vertices live on the integer triangular lattice (coordinates (a, b) map to
/// the plane point a*(1,0) + b*(1/2, sqrt(3)/2)); they are canonically
/// re-indexed in lexicographic (a, b) order.
fn sierpinski_graph(level: usize) -> (Vec<(i64, i64)>, Vec<(usize, usize)>) {
    type P = (i64, i64);
    fn mid(p: P, q: P) -> P {
        ((p.0 + q.0) / 2, (p.1 + q.1) / 2)
    }
    fn rec(p0: P, p1: P, p2: P, k: usize, tris: &mut Vec<[P; 3]>) {
        if k == 0 {
            tris.push([p0, p1, p2]);
            return;
        }
        let m01 = mid(p0, p1);
        let m12 = mid(p1, p2);
        let m02 = mid(p0, p2);
        rec(p0, m01, m02, k - 1, tris);
        rec(m01, p1, m12, k - 1, tris);
        rec(m02, m12, p2, k - 1, tris);
    }
    let side = 1i64 << level;
    let mut tris = Vec::new();
    rec((0, 0), (side, 0), (0, side), level, &mut tris);

    let mut verts: BTreeMap<P, usize> = BTreeMap::new();
    for t in &tris {
        for p in t {
            let next = verts.len();
            verts.entry(*p).or_insert(next);
        }
    }
    // BTreeMap iteration is lex order already; rebuild the index accordingly.
    let coords: Vec<P> = verts.keys().copied().collect();
    let index: BTreeMap<P, usize> = coords.iter().copied().zip(0..).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for t in &tris {
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let u = index[&t[a]];
            let v = index[&t[b]];
            let e = (u.min(v), u.max(v));
            edges.push(e);
        }
    }
    edges.sort_unstable();
    edges.dedup();
    (coords, edges)
}

impl MetricMeasureSpace {
    pub fn build(spec: SpaceSpec, measure_kind: MeasureKind) -> Result<Self> {
        let (n, edges, features) = match &spec {
            SpaceSpec::Cycle { n } => {
                let n = *n;
                if n < 3 {
                    return Err(Error::Invalid("cycle needs n >= 3".into()));
                }
                let edges: Vec<_> = (0..n)
                    .map(|i| {
                        let j = (i + 1) % n;
                        (i.min(j), i.max(j))
                    })
                    .collect();
                let feats = (0..n)
                    .map(|j| {
                        let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect();
                (n, edges, feats)
            }
            SpaceSpec::Path { n } => {
                let n = *n;
                if n < 2 {
                    return Err(Error::Invalid("path needs n >= 2".into()));
                }
                let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
                let feats = (0..n).map(|j| vec![j as f64 / (n - 1) as f64]).collect();
                (n, edges, feats)
            }
            SpaceSpec::GridTorus { nx, ny } => {
                let (nx, ny) = (*nx, *ny);
                if nx < 3 || ny < 3 {
                    return Err(Error::Invalid("grid torus needs nx, ny >= 3".into()));
                }
                let n = nx * ny;
                let id = |x: usize, y: usize| y * nx + x;
                let mut edges = Vec::with_capacity(2 * n);
                for y in 0..ny {
                    for x in 0..nx {
                        let u = id(x, y);
                        for v in [id((x + 1) % nx, y), id(x, (y + 1) % ny)] {
                            edges.push((u.min(v), u.max(v)));
                        }
                    }
                }
                edges.sort_unstable();
                edges.dedup();
                let tau = 2.0 * std::f64::consts::PI;
                let feats = (0..n)
                    .map(|i| {
                        let (x, y) = (i % nx, i / nx);
                        let a = tau * x as f64 / nx as f64;
                        let b = tau * y as f64 / ny as f64;
                        vec![a.cos(), a.sin(), b.cos(), b.sin()]
                    })
                    .collect();
                (n, edges, feats)
            }
            SpaceSpec::BinaryTree { levels } => {
                let levels = *levels;
                if levels == 0 {
                    return Err(Error::Invalid("binary tree needs levels >= 1".into()));
                }
                let n = (1usize << (levels + 1)) - 1;
                let edges: Vec<_> = (1..n).map(|i| ((i - 1) / 2, i)).map(|(p, c)| (p.min(c), p.max(c))).collect();
                let mut edges = edges;
                edges.sort_unstable();
                let feats = (0..n)
                    .map(|i| {
                        let depth = (usize::BITS - (i + 1).leading_zeros() - 1) as usize;
                        let pos = i + 1 - (1 << depth);
                        let width = 1usize << depth;
                        vec![
                            depth as f64 / levels as f64,
                            (pos as f64 + 0.5) / width as f64,
                        ]
                    })
                    .collect();
                (n, edges, feats)
            }
            SpaceSpec::Sierpinski { level } => {
                let level = *level;
                if level == 0 {
                    return Err(Error::Invalid("sierpinski needs level >= 1".into()));
                }
                if level > 7 {
                    return Err(Error::Invalid("sierpinski level > 7 exceeds the desk-scale cap".into()));
                }
                let (coords, edges) = sierpinski_graph(level);
                let side = (1u64 << level) as f64;
                let feats = coords
                    .iter()
                    .map(|&(a, b)| {
                        let px = (a as f64 + 0.5 * b as f64) / side;
                        let py = (b as f64 * 3.0f64.sqrt() / 2.0) / side;
                        vec![px, py]
                    })
                    .collect();
                (coords.len(), edges, feats)
            }
        };

        let adj = adjacency(n, &edges);
        let measure: Vec<f64> = match measure_kind {
            MeasureKind::Counting => vec![1.0; n],
            MeasureKind::Degree => adj.iter().map(|a| a.len() as f64).collect(),
        };
        let dist = bfs_all_pairs(n, &edges)?;
        let diameter = dist.iter().fold(0.0f64, |m, &d| m.max(d));
        Ok(MetricMeasureSpace { spec, measure_kind, n, edges, measure, dist, diameter, features })
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn degree(&self, x: usize) -> usize {
        self.edges.iter().filter(|&&(u, v)| u == x || v == x).count()
    }

    /// Open ball; member list ascending.
    pub fn ball(&self, center: usize, radius: f64) -> Ball {
        let members = (0..self.n).filter(|&y| self.dist[[center, y]] < radius).collect();
        Ball { center, radius, members }
    }

    pub fn volume(&self, members: &[usize]) -> f64 {
        members.iter().map(|&y| self.measure[y]).sum()
    }

    /// The ball plus dyadic annuli 2^i r <= d < 2^{i+1} r for i = 0..i_max.
    pub fn ball_and_annuli(&self, center: usize, radius: f64, i_max: usize) -> (Ball, Vec<Annulus>) {
        let ball = self.ball(center, radius);
        let annuli = (0..=i_max)
            .map(|i| {
                let inner = radius * (1u64 << i) as f64;
                let outer = radius * (1u64 << (i + 1)) as f64;
                let members = (0..self.n)
                    .filter(|&y| {
                        let d = self.dist[[center, y]];
                        d >= inner && d < outer
                    })
                    .collect();
                Annulus { center, inner, outer, members }
            })
            .collect();
        (ball, annuli)
    }

    /// Minimal distance between two member sets.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in a {
            for &y in b {
                best = best.min(self.dist[[x, y]]);
            }
        }
        best
    }

    /// Volume growth exponent over the given radii, averaged over all centers.
    pub fn doubling_profile(&self, radii: &[f64]) -> Result<DoublingProfile> {
        if radii.len() < 2 {
            return Err(Error::Invalid("doubling profile needs at least two radii".into()));
        }
        let mut mean_log_volume = Vec::with_capacity(radii.len());
        for &r in radii {
            if !(r > 0.0) {
                return Err(Error::Invalid("radii must be positive".into()));
            }
            let mut acc = 0.0;
            for c in 0..self.n {
                let v: f64 = (0..self.n)
                    .filter(|&y| self.dist[[c, y]] < r)
                    .map(|y| self.measure[y])
                    .sum();
                acc += v.ln();
            }
            mean_log_volume.push(acc / self.n as f64);
        }
        let logs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let fit = linfit(&logs, &mean_log_volume);
        Ok(DoublingProfile { radii: radii.to_vec(), mean_log_volume, n_fit: fit.slope, r2: fit.r2 })
    }

    /// Default doubling radius grid: 2.5 * 2^i while within half the diameter.
    pub fn default_doubling_radii(&self) -> Vec<f64> {
        let mut radii = Vec::new();
        let mut r = 2.5;
        while r <= self.diameter / 2.0 {
            radii.push(r);
            r *= 2.0;
        }
        radii
    }

    /// Verify metric axioms on the stored distance matrix. Full triangle scan
    /// is O(n^3); callers gate it to desk-scale n.
    pub fn check_metric(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.dist[[i, i]] != 0.0 {
                return Err(Error::Invalid(format!("d({i},{i}) != 0")));
            }
            for j in 0..n {
                let d = self.dist[[i, j]];
                if d != self.dist[[j, i]] {
                    return Err(Error::Invalid(format!("asymmetric at ({i},{j})")));
                }
                if i != j && !(d > 0.0) {
                    return Err(Error::Invalid(format!("non-positive distance at ({i},{j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.dist[[i, j]] > self.dist[[i, k]] + self.dist[[k, j]] {
                        return Err(Error::Invalid(format!("triangle inequality fails at ({i},{j},{k})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Deterministic representative point at (approximately) the requested
    /// distance from `from`: nearest achievable distance, lowest index wins.
    pub fn point_at_distance(&self, from: usize, target: f64) -> usize {
        let mut best = (f64::INFINITY, 0usize);
        for y in 0..self.n {
            let gap = (self.dist[[from, y]] - target).abs();
            if gap < best.0 {
                best = (gap, y);
            }
        }
        best.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cycle_c4_distances() {
        let s = MetricMeasureSpace::build(SpaceSpec::Cycle { n: 4 }, MeasureKind::Counting).unwrap();
        let expect = [[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s.dist[[i, j]], expect[i][j] as f64);
            }
        }
        assert_eq!(s.diameter, 2.0);
        assert_eq!(s.edges.len(), 4);
    }

    #[test]
    fn torus_metric_is_l1_wraparound() {
        let s = MetricMeasureSpace::build(SpaceSpec::GridTorus { nx: 5, ny: 4 }, MeasureKind::Counting).unwrap();
        let id = |x: usize, y: usize| y * 5 + x;
        let wrap = |a: i64, n: i64| {
            let d = (a % n + n) % n;
            d.min(n - d)
        };
        for x1 in 0..5i64 {
            for y1 in 0..4i64 {
                for x2 in 0..5i64 {
                    for y2 in 0..4i64 {
                        let d = wrap(x1 - x2, 5) + wrap(y1 - y2, 4);
                        assert_eq!(s.dist[[id(x1 as usize, y1 as usize), id(x2 as usize, y2 as usize)]], d as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn binary_tree_counts_and_diameter() {
        let s = MetricMeasureSpace::build(SpaceSpec::BinaryTree { levels: 4 }, MeasureKind::Counting).unwrap();
        assert_eq!(s.n, 31);
        assert_eq!(s.edges.len(), 30);
        assert_eq!(s.diameter, 8.0); // leaf to leaf through the root
    }

    #[test]
    fn sierpinski_level_counts() {
        // frozen closed forms: N = (3^{k+1} + 3)/2, E = 3^{k+1}
        for (level, n, e, diam) in [(1usize, 6usize, 9usize, 2.0), (2, 15, 27, 4.0), (3, 42, 81, 8.0)] {
            let s = MetricMeasureSpace::build(SpaceSpec::Sierpinski { level }, MeasureKind::Counting).unwrap();
            assert_eq!(s.n, n, "level {level} vertex count");
            assert_eq!(s.edges.len(), e, "level {level} edge count");
            assert_eq!(s.diameter, diam, "level {level} diameter");
        }
    }

    #[test]
    fn metric_axioms_small_spaces() {
        for spec in [
            SpaceSpec::Cycle { n: 17 },
            SpaceSpec::Path { n: 9 },
            SpaceSpec::GridTorus { nx: 4, ny: 6 },
            SpaceSpec::BinaryTree { levels: 3 },
            SpaceSpec::Sierpinski { level: 3 },
        ] {
            let s = MetricMeasureSpace::build(spec, MeasureKind::Counting).unwrap();
            s.check_metric().unwrap();
        }
    }

    #[test]
    fn degree_measure_totals() {
        let s = MetricMeasureSpace::build(SpaceSpec::Cycle { n: 10 }, MeasureKind::Degree).unwrap();
        assert_eq!(s.total_measure(), 20.0); // 2|E|
    }

    #[test]
    fn cycle_doubling_exponent_exact() {
        // open balls of half-integer radius on a cycle have volume exactly 2r,
        // so the log-log fit is an exact line of slope 1
        let s = MetricMeasureSpace::build(SpaceSpec::Cycle { n: 256 }, MeasureKind::Counting).unwrap();
        let radii = [2.5, 4.5, 8.5, 16.5, 32.5];
        let prof = s.doubling_profile(&radii).unwrap();
        assert!((prof.n_fit - 1.0).abs() < 1e-9, "n_fit = {}", prof.n_fit);
        assert!(prof.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn ball_and_annuli_partition_reachable_range() {
        let s = MetricMeasureSpace::build(SpaceSpec::Cycle { n: 64 }, MeasureKind::Counting).unwrap();
        let (ball, annuli) = s.ball_and_annuli(0, 2.0, 4);
        let mut seen = vec![false; s.n];
        for &m in &ball.members {
            seen[m] = true;
        }
        for a in &annuli {
            for &m in &a.members {
                assert!(!seen[m], "overlap at {m}");
                seen[m] = true;
            }
        }
        // outer annulus reaches 2 * 2^5 = 64 > diameter, so everything is covered
        assert!(seen.iter().all(|&b| b));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_space_metric_and_volume(n in 4usize..24, torus in proptest::bool::ANY) {
            let spec = if torus {
                SpaceSpec::GridTorus { nx: 3 + n % 4, ny: 3 + n % 3 }
            } else {
                SpaceSpec::Cycle { n }
            };
            let s = MetricMeasureSpace::build(spec, MeasureKind::Counting).unwrap();
            s.check_metric().unwrap();
            // balls are monotone in radius and exhaust the space
            let b1 = s.ball(0, 1.5);
            let b2 = s.ball(0, 2.5);
            prop_assert!(b1.members.len() <= b2.members.len());
            let all = s.ball(0, s.diameter + 1.0);
            prop_assert_eq!(all.members.len(), s.n);
        }
    }
}
