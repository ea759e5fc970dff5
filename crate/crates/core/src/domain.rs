//! Grids on the unit interval and serrated domains built from interval covers.
//!
//! A serrated domain is the union of squares `I_j × I_j` along the diagonal of
//! the unit square. Everything here is grid resident: intervals are stored as
//! inclusive ranges of node indices.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_i = i / (n - 1)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(n));
        }
        let last = (n - 1) as f64;
        let nodes = (0..n).map(|i| i as f64 / last).collect();
        Ok(Grid { nodes })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Distance between neighbouring nodes, `1 / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n() - 1) as f64
    }

    /// Per-node quadrature weight used for every integral over the grid.
    ///
    /// Rectangle rule with weight `1 / n`, so a double integral is the mean
    /// over the `n × n` node pairs.
    pub fn weight(&self) -> f64 {
        1.0 / self.n() as f64
    }

    /// Index of the node nearest to `x`, ties toward the lower index.
    pub fn snap(&self, x: f64) -> usize {
        let scaled = x * (self.n() - 1) as f64;
        let idx = (scaled - 0.5).ceil().max(0.0) as usize;
        idx.min(self.n() - 1)
    }
}

/// Shorthand for [`Grid::new`].
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

/// Inclusive range of grid indices `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalIdx {
    pub a: usize,
    pub b: usize,
}

impl IntervalIdx {
    pub fn new(a: usize, b: usize) -> Self {
        debug_assert!(a <= b);
        IntervalIdx { a, b }
    }

    pub fn len(&self) -> usize {
        self.b - self.a + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> Range<usize> {
        self.a..self.b + 1
    }

    pub fn contains(&self, i: usize) -> bool {
        self.a <= i && i <= self.b
    }
}

/// Ordered, overlapping, non-nested interval cover of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SerratedDomain {
    grid: Grid,
    intervals: Vec<IntervalIdx>,
}

/// Index sets attached to merge step `p` (1-based): the separator `J`, the
/// new part `D` of `I_{p+1}`, and the accumulated part `S` of earlier
/// intervals lying outside `I_{p+1}`. The unknown block is `S × D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Regions {
    pub p: usize,
    pub j: Range<usize>,
    pub d: Range<usize>,
    pub s: Range<usize>,
}

#[derive(Serialize)]
struct RegionsDump {
    p: usize,
    #[serde(rename = "J")]
    j: Vec<usize>,
    #[serde(rename = "D")]
    d: Vec<usize>,
    #[serde(rename = "S")]
    s: Vec<usize>,
}

impl Regions {
    pub fn to_json(&self) -> serde_json::Value {
        let dump = RegionsDump {
            p: self.p,
            j: self.j.clone().collect(),
            d: self.d.clone().collect(),
            s: self.s.clone().collect(),
        };
        serde_json::to_value(dump).expect("index arrays serialize")
    }
}

impl SerratedDomain {
    /// Builds a domain from index intervals: sorts, drops nested or duplicate
    /// intervals, then validates the cover.
    pub fn from_indices(grid: Grid, mut intervals: Vec<IntervalIdx>) -> Result<Self> {
        let n = grid.n();
        if intervals.is_empty() {
            return Err(Error::InvalidDomain("no intervals given".into()));
        }
        for iv in &intervals {
            if iv.a > iv.b || iv.b >= n {
                return Err(Error::InvalidDomain(format!(
                    "interval [{}, {}] is not a valid index range on a grid of {n} nodes",
                    iv.a, iv.b
                )));
            }
        }
        intervals.sort_by(|x, y| x.a.cmp(&y.a).then(y.b.cmp(&x.b)));
        let mut kept: Vec<IntervalIdx> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match kept.last() {
                Some(last) if iv.b <= last.b => {}
                _ => kept.push(iv),
            }
        }

        if kept[0].a != 0 {
            return Err(Error::InvalidDomain(format!(
                "cover starts at node {} (t = {}), not at 0",
                kept[0].a,
                grid.node(kept[0].a)
            )));
        }
        let last = kept[kept.len() - 1];
        if last.b != n - 1 {
            return Err(Error::InvalidDomain(format!(
                "cover ends at node {} (t = {}), not at 1",
                last.b,
                grid.node(last.b)
            )));
        }
        for (k, pair) in kept.windows(2).enumerate() {
            if pair[1].a > pair[0].b {
                return Err(Error::InvalidDomain(format!(
                    "intervals {} [{}, {}] and {} [{}, {}] do not overlap on the grid",
                    k + 1,
                    grid.node(pair[0].a),
                    grid.node(pair[0].b),
                    k + 2,
                    grid.node(pair[1].a),
                    grid.node(pair[1].b),
                )));
            }
        }
        Ok(SerratedDomain {
            grid,
            intervals: kept,
        })
    }

    /// Builds a domain from real interval endpoints, snapping them to the
    /// nearest grid node.
    pub fn from_endpoints(grid: Grid, intervals: &[(f64, f64)]) -> Result<Self> {
        let mut idx = Vec::with_capacity(intervals.len());
        for &(l, r) in intervals {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&r) || l >= r {
                return Err(Error::InvalidDomain(format!(
                    "interval [{l}, {r}] must satisfy 0 <= l < r <= 1"
                )));
            }
            idx.push(IntervalIdx::new(grid.snap(l), grid.snap(r)));
        }
        Self::from_indices(grid, idx)
    }

    /// The full square `[0, 1]²` as a one-interval domain.
    pub fn full(grid: Grid) -> Self {
        let n = grid.n();
        SerratedDomain {
            grid,
            intervals: vec![IntervalIdx::new(0, n - 1)],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn intervals(&self) -> &[IntervalIdx] {
        &self.intervals
    }

    /// Number of intervals in the cover.
    pub fn m(&self) -> usize {
        self.intervals.len()
    }

    /// Interval endpoints as grid node values.
    pub fn endpoints(&self) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .map(|iv| (self.grid.node(iv.a), self.grid.node(iv.b)))
            .collect()
    }

    pub fn regions(&self, p: usize) -> Result<Regions> {
        if p == 0 || p >= self.m() {
            return Err(Error::Index {
                index: p,
                valid: if self.m() > 1 {
                    format!("1..={}", self.m() - 1)
                } else {
                    "none (single interval)".into()
                },
            });
        }
        let prev = self.intervals[p - 1];
        let next = self.intervals[p];
        Ok(Regions {
            p,
            j: next.a..prev.b + 1,
            d: prev.b + 1..next.b + 1,
            s: 0..next.a,
        })
    }

    /// All merge steps `1..m`.
    pub fn all_regions(&self) -> Vec<Regions> {
        (1..self.m())
            .map(|p| self.regions(p).expect("p in range"))
            .collect()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.intervals.iter().any(|iv| iv.a <= lo && hi <= iv.b)
    }

    /// Boolean membership matrix of the domain on the grid.
    pub fn mask(&self) -> DMatrix<bool> {
        let n = self.grid.n();
        let mut mask = DMatrix::from_element(n, n, false);
        for iv in &self.intervals {
            for i in iv.range() {
                for j in iv.range() {
                    mask[(i, j)] = true;
                }
            }
        }
        mask
    }

    pub fn to_spec(&self) -> DomainSpec {
        DomainSpec {
            grid_n: self.grid.n(),
            intervals: self.endpoints().into_iter().map(|(l, r)| [l, r]).collect(),
        }
    }
}

/// Shorthand for [`SerratedDomain::from_endpoints`].
pub fn make_serrated_domain(grid: Grid, intervals: &[(f64, f64)]) -> Result<SerratedDomain> {
    SerratedDomain::from_endpoints(grid, intervals)
}

/// Shorthand for [`SerratedDomain::regions`].
pub fn derived_regions(domain: &SerratedDomain, p: usize) -> Result<Regions> {
    domain.regions(p)
}

pub fn membership(domain: &SerratedDomain, i: usize, j: usize) -> bool {
    domain.contains(i, j)
}

/// Serrated inner approximation of the band `{|s - t| <= delta}` by `m` equal
/// squares of side `delta`.
///
/// Endpoints are rounded inward to the grid so every square stays inside the
/// band.
pub fn inscribe_band(grid: Grid, delta: f64, m: usize) -> Result<SerratedDomain> {
    const EPS: f64 = 1e-9;
    if !(delta > 0.0 && delta <= 1.0) || m == 0 {
        return Err(Error::InvalidInput(format!(
            "band half-width must lie in (0, 1] and m >= 1 (got delta = {delta}, m = {m})"
        )));
    }
    let min_feasible_m = minimal_band_m(delta);
    if m == 1 {
        if delta < 1.0 - EPS {
            return Err(Error::Infeasible {
                delta,
                m,
                min_feasible_m,
            });
        }
        return Ok(SerratedDomain::full(grid));
    }
    let step = (1.0 - delta) / (m - 1) as f64;
    if step >= delta - EPS {
        return Err(Error::Infeasible {
            delta,
            m,
            min_feasible_m,
        });
    }
    let scale = (grid.n() - 1) as f64;
    let last = grid.n() - 1;
    let intervals = (0..m)
        .map(|j| {
            let left = j as f64 * step;
            let a = if j == 0 {
                0
            } else {
                ((left * scale) - EPS).ceil() as usize
            };
            let b = if j + 1 == m {
                last
            } else {
                (((left + delta) * scale) + EPS).floor() as usize
            };
            IntervalIdx::new(a.min(last), b.min(last))
        })
        .collect();
    SerratedDomain::from_indices(grid, intervals).map_err(|_| Error::Infeasible {
        delta,
        m,
        min_feasible_m,
    })
}

fn minimal_band_m(delta: f64) -> usize {
    if delta >= 1.0 - 1e-9 {
        return 1;
    }
    // smallest m with (1 - delta) / (m - 1) < delta, same test as inscribe_band
    let mut m = ((1.0 - delta) / delta).floor().max(0.0) as usize + 1;
    while (1.0 - delta) / (m.max(2) - 1) as f64 >= delta - 1e-9 {
        m += 1;
    }
    m.max(2)
}

/// JSON form of a domain: `{"grid_n": int, "intervals": [[l, r], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub grid_n: usize,
    pub intervals: Vec<[f64; 2]>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<SerratedDomain> {
        let grid = Grid::new(self.grid_n)?;
        let ivs: Vec<(f64, f64)> = self.intervals.iter().map(|iv| (iv[0], iv[1])).collect();
        SerratedDomain::from_endpoints(grid, &ivs)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
