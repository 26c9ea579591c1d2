//! Soft random geometric graph sampling, isolated-node counting,
//! connectivity, and the edge-removal truncation coupling.

use std::collections::VecDeque;
use std::io::Write;

use petgraph::unionfind::UnionFind;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::connection::{ConnectionFunction, ScalingRegime};
use crate::error::{Error, Result};
use crate::geometry::PointConfiguration;
use crate::output::format_f64;

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    /// Every pair is considered.
    Exact,
    /// Pairs whose connection probability is below `epsilon` are skipped.
    Windowed { epsilon: f64 },
}

impl Default for SamplingMode {
    fn default() -> Self {
        SamplingMode::Windowed {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub length: f64,
}

/// A sampled graph. Edges are kept in lexicographic `(u, v)` order with
/// `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    config: PointConfiguration,
    edges: Vec<Edge>,
    degrees: Vec<u32>,
}

/// Per-trial counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n_nodes: u64,
    pub n_iso: u64,
    pub n_iso_truncated: Option<u64>,
    pub connected: bool,
}

impl TrialSummary {
    /// Violations of `connected ∧ n ≥ 2 ⇒ N_iso = 0` and `Ñ_iso ≥ N_iso`.
    pub fn violations(&self) -> u64 {
        let mut v = 0;
        if self.connected && self.n_nodes >= 2 && self.n_iso > 0 {
            v += 1;
        }
        if self.n_iso > self.n_nodes {
            v += 1;
        }
        if let Some(t) = self.n_iso_truncated {
            if t < self.n_iso {
                v += 1;
            }
        }
        v
    }
}

// SplitMix64 finaliser.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` attached to the unordered pair `{i, j}` (`i < j`)
/// under the per-graph key. Every pair owns its own draw, so the edge set
/// does not depend on which pairs a sampling mode visits.
#[inline]
fn pair_uniform(key: u64, i: u32, j: u32) -> f64 {
    let pair = ((i as u64) << 32) | j as u64;
    let bits = mix64(key ^ mix64(pair.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl GraphSample {
    /// Assemble from an explicit edge list; lengths are recomputed.
    pub fn from_edges(config: PointConfiguration, pairs: &[(u32, u32)]) -> Result<Self> {
        let n = config.len();
        let mut edges: Vec<Edge> = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let (u, v) = (a.min(b), a.max(b));
            if u == v || v as usize >= n {
                return Err(Error::InvalidParameter {
                    name: "edges",
                    reason: format!("invalid pair ({a}, {b}) for {n} vertices"),
                });
            }
            let p = config.positions();
            let length = config
                .torus()
                .distance_unchecked(p[u as usize], p[v as usize]);
            edges.push(Edge { u, v, length });
        }
        edges.sort_by_key(|e| (e.u, e.v));
        if edges
            .windows(2)
            .any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v))
        {
            return Err(Error::InvalidParameter {
                name: "edges",
                reason: "duplicate pair".into(),
            });
        }
        Ok(Self::with_edges(config, edges))
    }

    fn with_edges(config: PointConfiguration, edges: Vec<Edge>) -> Self {
        let mut degrees = vec![0u32; config.len()];
        for e in &edges {
            degrees[e.u as usize] += 1;
            degrees[e.v as usize] += 1;
        }
        GraphSample {
            config,
            edges,
            degrees,
        }
    }

    pub fn config(&self) -> &PointConfiguration {
        &self.config
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn node_count(&self) -> usize {
        self.config.len()
    }

    /// Dump as `u,v,length` CSV.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,length")?;
        for e in &self.edges {
            writeln!(out, "{},{},{}", e.u, e.v, format_f64(e.length))?;
        }
        Ok(())
    }
}

/// Sample the soft RGG on `config` with edge probabilities `H(ρ / R_L)`.
///
/// One `u64` key is drawn from `rng`; each pair's Bernoulli draw is a keyed
/// hash of its indices, so exact and windowed sampling agree on every pair
/// the window keeps.
pub fn sample_edges<R: Rng + ?Sized>(
    config: PointConfiguration,
    cf: &ConnectionFunction,
    regime: &ScalingRegime,
    rng: &mut R,
    mode: SamplingMode,
) -> Result<GraphSample> {
    if (regime.length - config.torus().length()).abs() > 1e-9 * regime.length {
        return Err(Error::InvalidParameter {
            name: "regime",
            reason: format!(
                "regime length {} does not match torus length {}",
                regime.length,
                config.torus().length()
            ),
        });
    }
    let window = match mode {
        SamplingMode::Exact => None,
        SamplingMode::Windowed { epsilon } => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("must lie in (0, 1), got {epsilon}"),
                });
            }
            Some(cf.window_radius(regime.radius, epsilon))
        }
    };
    let key: u64 = rng.random();
    let half = config.torus().length() / 2.0;
    let edges = match window {
        Some(w) if w < half => {
            let rule = EdgeRule::new(cf, regime, key, w, config.len());
            windowed_edges(&config, &rule, w)
        }
        _ => {
            let rule = EdgeRule::new(cf, regime, key, half, config.len());
            exact_edges(&config, &rule)
        }
    };
    Ok(GraphSample::with_edges(config, edges))
}

/// Edge decision `u < H(d / R)`. For nonincreasing `H`, values at the
/// edges of a distance grid bracket `H` on each cell, which settles most
/// pairs without evaluating `H` itself.
struct EdgeRule<'a> {
    cf: &'a ConnectionFunction,
    inv_radius: f64,
    key: u64,
    /// `H` at `k / cell_scale`, for `k = 0..=cells`.
    grid: Vec<f64>,
    cell_scale: f64,
}

impl<'a> EdgeRule<'a> {
    fn new(
        cf: &'a ConnectionFunction,
        regime: &ScalingRegime,
        key: u64,
        reach: f64,
        nodes: usize,
    ) -> Self {
        let inv_radius = 1.0 / regime.radius;
        let cells = (4 * nodes).clamp(16, 4096);
        let (grid, cell_scale) = if cf.is_nonincreasing() && reach > 0.0 {
            let scale = cells as f64 / reach;
            let grid = (0..=cells + 1)
                .map(|k| cf.eval(k as f64 / scale * inv_radius))
                .collect();
            (grid, scale)
        } else {
            (Vec::new(), 0.0)
        };
        EdgeRule {
            cf,
            inv_radius,
            key,
            grid,
            cell_scale,
        }
    }

    #[inline]
    fn connects(&self, i: u32, j: u32, length: f64) -> bool {
        let u = pair_uniform(self.key, i, j);
        let cell = (length * self.cell_scale) as usize;
        if cell + 1 < self.grid.len() {
            if u >= self.grid[cell] {
                return false;
            }
            if u < self.grid[cell + 1] {
                return true;
            }
        }
        u < self.cf.eval(length * self.inv_radius)
    }

    #[inline]
    fn try_edge(&self, edges: &mut Vec<Edge>, i: usize, j: usize, length: f64) {
        let (i, j) = (i as u32, j as u32);
        if self.connects(i, j, length) {
            edges.push(Edge { u: i, v: j, length });
        }
    }
}

fn exact_edges(config: &PointConfiguration, rule: &EdgeRule) -> Vec<Edge> {
    let pos = config.positions();
    let torus = config.torus();
    let mut edges = Vec::new();
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let d = torus.distance_unchecked(pos[i], pos[j]);
            rule.try_edge(&mut edges, i, j, d);
        }
    }
    edges
}

/// Pairs within circular distance `window` (< L/2), visited in
/// lexicographic order: for each `i`, the forward run `i+1..` and then the
/// wrap-around run at the top of the index range.
fn windowed_edges(config: &PointConfiguration, rule: &EdgeRule, window: f64) -> Vec<Edge> {
    let pos = config.positions();
    let n = pos.len();
    let length = config.torus().length();
    let mut edges = Vec::new();
    // first index whose gap ahead of i is at least L - window
    let mut wrap_start = 0usize;
    for i in 0..n {
        let x = pos[i];
        let mut j = i + 1;
        while j < n && pos[j] - x <= window {
            rule.try_edge(&mut edges, i, j, pos[j] - x);
            j += 1;
        }
        // pos[j] - x >= L - window  <=>  pos[j] >= x + L - window, nondecreasing in i
        let threshold = x + length - window;
        while wrap_start < n && pos[wrap_start] < threshold {
            wrap_start += 1;
        }
        for (k, &y) in pos.iter().enumerate().skip(wrap_start.max(j)) {
            rule.try_edge(&mut edges, i, k, length - (y - x));
        }
    }
    edges
}

pub fn isolated_count(g: &GraphSample) -> u64 {
    g.degrees.iter().filter(|&&d| d == 0).count() as u64
}

/// One connected component; graphs with at most one vertex count as
/// connected.
pub fn is_connected(g: &GraphSample) -> bool {
    let n = g.node_count();
    if n <= 1 {
        return true;
    }
    if g.edges.len() < n - 1 || g.degrees.contains(&0) {
        return false;
    }
    let mut uf = UnionFind::<u32>::new(n);
    let mut components = n;
    for e in &g.edges {
        if uf.union(e.u, e.v) {
            components -= 1;
            if components == 1 {
                return true;
            }
        }
    }
    components == 1
}

/// Breadth-first search reference for [`is_connected`].
pub fn is_connected_bfs(g: &GraphSample) -> bool {
    let n = g.node_count();
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.u as usize].push(e.v as usize);
        adj[e.v as usize].push(e.u as usize);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    reached == n
}

/// The coupled truncated graph: every edge longer than `cutoff` removed.
pub fn truncate_edges(g: &GraphSample, cutoff: f64) -> GraphSample {
    let edges = g
        .edges
        .iter()
        .copied()
        .filter(|e| e.length <= cutoff)
        .collect();
    GraphSample::with_edges(g.config.clone(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::ConnectionFunction;
    use crate::geometry::{sample_ppp, Torus};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize, length: f64) -> PointConfiguration {
        let t = Torus::new(length).unwrap();
        PointConfiguration::new(t, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    fn regime(length: f64, radius: f64, cutoff: f64) -> ScalingRegime {
        ScalingRegime {
            tau: 1.0,
            length,
            alpha: 1.0,
            radius,
            cutoff,
        }
    }

    #[test]
    fn single_node_has_no_edges() {
        let cf = ConnectionFunction::rayleigh();
        let g = sample_edges(
            line(1, 10.0),
            &cf,
            &regime(10.0, 2.0, 4.0),
            &mut ChaCha8Rng::seed_from_u64(1),
            SamplingMode::Exact,
        )
        .unwrap();
        assert!(g.edges().is_empty());
        assert!(is_connected(&g));
        assert_eq!(isolated_count(&g), 1);
    }

    #[test]
    fn hard_function_is_deterministic() {
        let cf = ConnectionFunction::hard(1.0).unwrap();
        let t = Torus::new(40.0).unwrap();
        let cfg = sample_ppp(&t, &mut ChaCha8Rng::seed_from_u64(3));
        let reg = regime(40.0, 3.0, 9.0);
        for mode in [SamplingMode::Exact, SamplingMode::default()] {
            let g = sample_edges(
                cfg.clone(),
                &cf,
                &reg,
                &mut ChaCha8Rng::seed_from_u64(4),
                mode,
            )
            .unwrap();
            let p = cfg.positions();
            let mut expected = 0;
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    if t.distance_unchecked(p[i], p[j]) <= 3.0 {
                        expected += 1;
                    }
                }
            }
            assert_eq!(g.edges().len(), expected);
            assert!(g.edges().iter().all(|e| e.length <= 3.0));
        }
    }

    #[test]
    fn windowed_rejects_epsilon_one() {
        let cf = ConnectionFunction::rayleigh();
        let r = sample_edges(
            line(3, 10.0),
            &cf,
            &regime(10.0, 1.0, 1.0),
            &mut ChaCha8Rng::seed_from_u64(1),
            SamplingMode::Windowed { epsilon: 1.0 },
        );
        assert!(r.is_err());
    }

    #[test]
    fn isolated_count_examples() {
        let g = GraphSample::from_edges(line(3, 10.0), &[(0, 1)]).unwrap();
        assert_eq!(isolated_count(&g), 1);
        let g = GraphSample::from_edges(line(4, 10.0), &[]).unwrap();
        assert_eq!(isolated_count(&g), 4);
        let all: Vec<(u32, u32)> = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
            .collect();
        let g = GraphSample::from_edges(line(5, 10.0), &all).unwrap();
        assert_eq!(isolated_count(&g), 0);
    }

    #[test]
    fn from_edges_rejects_loops_and_duplicates() {
        assert!(GraphSample::from_edges(line(3, 10.0), &[(1, 1)]).is_err());
        assert!(GraphSample::from_edges(line(3, 10.0), &[(0, 1), (1, 0)]).is_err());
        assert!(GraphSample::from_edges(line(3, 10.0), &[(0, 3)]).is_err());
    }

    #[test]
    fn connectivity_examples() {
        let path = GraphSample::from_edges(line(3, 10.0), &[(0, 1), (1, 2)]).unwrap();
        assert!(is_connected(&path));
        let pair = GraphSample::from_edges(line(2, 10.0), &[]).unwrap();
        assert!(!is_connected(&pair));
        let empty = GraphSample::from_edges(line(0, 10.0), &[]).unwrap();
        assert!(is_connected(&empty));
        let two = GraphSample::from_edges(line(4, 10.0), &[(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&two));
    }

    #[test]
    fn truncation_examples() {
        let cf = ConnectionFunction::rayleigh();
        let t = Torus::new(30.0).unwrap();
        let cfg = sample_ppp(&t, &mut ChaCha8Rng::seed_from_u64(9));
        let g = sample_edges(
            cfg,
            &cf,
            &regime(30.0, 3.0, 9.0),
            &mut ChaCha8Rng::seed_from_u64(10),
            SamplingMode::Exact,
        )
        .unwrap();
        assert_eq!(truncate_edges(&g, 15.0), g);
        let none = truncate_edges(&g, 0.0);
        assert!(none.edges().is_empty());
        assert_eq!(isolated_count(&none), g.node_count() as u64);
    }

    #[test]
    fn wraparound_pairs_are_found() {
        let t = Torus::new(10.0).unwrap();
        let cfg = PointConfiguration::new(t, vec![0.2, 5.0, 9.9]).unwrap();
        let cf = ConnectionFunction::hard(1.0).unwrap();
        let g = sample_edges(
            cfg,
            &cf,
            &regime(10.0, 1.0, 1.0),
            &mut ChaCha8Rng::seed_from_u64(0),
            SamplingMode::default(),
        )
        .unwrap();
        assert_eq!(g.edges().len(), 1);
        let e = g.edges()[0];
        assert_eq!((e.u, e.v), (0, 2));
        assert!((e.length - 0.3).abs() < 1e-12);
    }

    #[test]
    fn edge_csv_dump() {
        let g = GraphSample::from_edges(line(3, 10.0), &[(0, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("u,v,length"));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("0,2,2.0000000000000000e0"));
    }

    fn random_graph(seed: u64, length: f64, mode: SamplingMode) -> GraphSample {
        let cf = ConnectionFunction::rayleigh();
        let reg = ScalingRegime::new(1.0, length, &cf, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = sample_ppp(&Torus::new(length).unwrap(), &mut rng);
        sample_edges(cfg, &cf, &reg, &mut rng, mode).unwrap()
    }

    proptest! {
        #[test]
        fn sample_invariants(seed in any::<u64>(), length in 3.0..120.0f64) {
            let g = random_graph(seed, length, SamplingMode::default());
            let deg_sum: u64 = g.degrees().iter().map(|&d| d as u64).sum();
            prop_assert_eq!(deg_sum, 2 * g.edges().len() as u64);
            prop_assert!(g.edges().windows(2).all(|w| (w[0].u, w[0].v) < (w[1].u, w[1].v)));
            let p = g.config().positions();
            for e in g.edges() {
                prop_assert!(e.u < e.v);
                let d = g.config().torus().distance_unchecked(p[e.u as usize], p[e.v as usize]);
                prop_assert!((d - e.length).abs() < 1e-9);
            }
            if is_connected(&g) && g.node_count() >= 2 {
                prop_assert_eq!(isolated_count(&g), 0);
            }
        }

        #[test]
        fn truncation_never_reduces_isolation(seed in any::<u64>(), cutoff in 0.0..30.0f64) {
            let g = random_graph(seed, 60.0, SamplingMode::Exact);
            let t = truncate_edges(&g, cutoff);
            prop_assert!(isolated_count(&t) >= isolated_count(&g));
            prop_assert!(t.edges().iter().all(|e| e.length <= cutoff));
        }

        #[test]
        fn windowed_matches_exact(seed in any::<u64>(), length in 5.0..150.0f64) {
            let a = random_graph(seed, length, SamplingMode::Exact);
            let b = random_graph(seed, length, SamplingMode::default());
            prop_assert_eq!(isolated_count(&a), isolated_count(&b));
            prop_assert_eq!(a.edges().len(), b.edges().len());
        }
    }
}
