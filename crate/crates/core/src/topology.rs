//! Network geometry on a wrap-around (torus) square.
//!
//! APs are placed by rejection sampling under a pairwise minimum wrap-distance
//! constraint; UEs are i.i.d. uniform. All link distances in the simulator use
//! the torus metric.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Full restarts allowed before AP placement is declared infeasible.
pub const PLACEMENT_RESTARTS: usize = 10_000;
/// Candidate draws per AP inside one restart.
const CANDIDATES_PER_AP: usize = 1_000;
/// Densest circle packing in the plane; no layout can beat it.
const HEX_PACKING_DENSITY: f64 = 0.906_899_682_117_108_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Torus distance between `p` and `q` on a square of side `side`.
pub fn wrap_distance(p: Point, q: Point, side: f64) -> Result<f64> {
    if ![p.x, p.y, q.x, q.y, side].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    if side <= 0.0 {
        return Err(Error::InvalidInput(format!("side must be positive, got {side}")));
    }
    Ok(wrap_distance_unchecked(p, q, side))
}

#[inline]
pub(crate) fn wrap_distance_unchecked(p: Point, q: Point, side: f64) -> f64 {
    let axis = |a: f64, b: f64| {
        let d = (a - b).abs().rem_euclid(side);
        d.min(side - d)
    };
    axis(p.x, q.x).hypot(axis(p.y, q.y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub side: f64,
    pub aps: Vec<Point>,
    pub dl_ues: Vec<Point>,
    pub ul_ues: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Ap,
    DlUe,
    UlUe,
}

impl NodeKind {
    fn label(self) -> &'static str {
        match self {
            NodeKind::Ap => "ap",
            NodeKind::DlUe => "dl_ue",
            NodeKind::UlUe => "ul_ue",
        }
    }
}

impl NetworkTopology {
    pub fn new(side: f64, aps: Vec<Point>, dl_ues: Vec<Point>, ul_ues: Vec<Point>) -> Result<Self> {
        let topo = NetworkTopology {
            side,
            aps,
            dl_ues,
            ul_ues,
        };
        topo.validate(0.0)?;
        Ok(topo)
    }

    pub fn m(&self) -> usize {
        self.aps.len()
    }

    pub fn k_d(&self) -> usize {
        self.dl_ues.len()
    }

    pub fn k_u(&self) -> usize {
        self.ul_ues.len()
    }

    pub fn distance(&self, p: Point, q: Point) -> f64 {
        wrap_distance_unchecked(p, q, self.side)
    }

    /// Smallest wrap distance over all AP pairs (infinite for a single AP).
    pub fn min_ap_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, &p) in self.aps.iter().enumerate() {
            for &q in &self.aps[i + 1..] {
                best = best.min(self.distance(p, q));
            }
        }
        best
    }

    pub fn validate(&self, min_ap_dist: f64) -> Result<()> {
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::InvalidInput(format!("side must be positive, got {}", self.side)));
        }
        if self.aps.is_empty() {
            return Err(Error::InvalidInput("at least one AP is required".into()));
        }
        if self.dl_ues.is_empty() && self.ul_ues.is_empty() {
            return Err(Error::InvalidInput("at least one UE is required".into()));
        }
        for (kind, p) in self.nodes() {
            let inside = |v: f64| v.is_finite() && (0.0..self.side).contains(&v);
            if !inside(p.x) || !inside(p.y) {
                return Err(Error::InvalidInput(format!(
                    "{} at ({}, {}) lies outside [0, {})",
                    kind.label(),
                    p.x,
                    p.y,
                    self.side
                )));
            }
        }
        if self.min_ap_spacing() < min_ap_dist {
            return Err(Error::InvalidInput(format!(
                "AP spacing {} below minimum {min_ap_dist}",
                self.min_ap_spacing()
            )));
        }
        Ok(())
    }

    fn nodes(&self) -> impl Iterator<Item = (NodeKind, Point)> + '_ {
        let tag = |kind: NodeKind| move |p: &Point| (kind, *p);
        self.aps.iter().map(tag(NodeKind::Ap))
            .chain(self.dl_ues.iter().map(tag(NodeKind::DlUe)))
            .chain(self.ul_ues.iter().map(tag(NodeKind::UlUe)))
    }

    /// Plain-text table, one node per row: `kind index x y`.
    pub fn to_table(&self) -> String {
        let mut out = format!("# side {}\nkind index x y\n", self.side);
        for (kind, pts) in [
            (NodeKind::Ap, &self.aps),
            (NodeKind::DlUe, &self.dl_ues),
            (NodeKind::UlUe, &self.ul_ues),
        ] {
            for (i, p) in pts.iter().enumerate() {
                let _ = writeln!(out, "{} {} {:?} {:?}", kind.label(), i, p.x, p.y);
            }
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::InvalidInput(format!("malformed topology row `{line}`"));
        let mut side = None;
        let (mut aps, mut dl, mut ul) = (Vec::new(), Vec::new(), Vec::new());
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("# side") {
                side = Some(rest.trim().parse::<f64>().map_err(|_| bad(line))?);
                continue;
            }
            if line.starts_with('#') || line.starts_with("kind") {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(bad(line));
            }
            let idx: usize = cols[1].parse().map_err(|_| bad(line))?;
            let x: f64 = cols[2].parse().map_err(|_| bad(line))?;
            let y: f64 = cols[3].parse().map_err(|_| bad(line))?;
            let target = match cols[0] {
                "ap" => &mut aps,
                "dl_ue" => &mut dl,
                "ul_ue" => &mut ul,
                _ => return Err(bad(line)),
            };
            if idx != target.len() {
                return Err(bad(line));
            }
            target.push(Point::new(x, y));
        }
        let side = side.ok_or_else(|| Error::InvalidInput("missing `# side` header".into()))?;
        NetworkTopology::new(side, aps, dl, ul)
    }
}

/// Random topology: uniform UEs, APs uniform subject to pairwise
/// wrap-distance ≥ `min_ap_dist`. Deterministic in `seed`.
pub fn generate_topology(
    m: usize,
    k_d: usize,
    k_u: usize,
    side: f64,
    min_ap_dist: f64,
    seed: u64,
) -> Result<NetworkTopology> {
    if m == 0 {
        return Err(Error::InvalidInput("M must be at least 1".into()));
    }
    if k_d + k_u == 0 {
        return Err(Error::InvalidInput("K_d + K_u must be at least 1".into()));
    }
    if !(side.is_finite() && side > 0.0) || !(min_ap_dist.is_finite() && min_ap_dist >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "side ({side}) must be positive and min_ap_dist ({min_ap_dist}) non-negative"
        )));
    }
    let disc_area = std::f64::consts::PI * (min_ap_dist / 2.0).powi(2);
    if m > 1 && m as f64 * disc_area > HEX_PACKING_DENSITY * side * side {
        return Err(Error::Placement {
            attempts: 0,
            constraint: format!(
                "{m} APs with pairwise spacing {min_ap_dist} m cannot fit in a {side} m square"
            ),
        });
    }

    let aps = place_aps(m, side, min_ap_dist, seed)?;
    let mut rng = rng::stream(seed, Purpose::UePlacement, 0);
    let mut uniform = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
            .collect()
    };
    let dl_ues = uniform(k_d);
    let ul_ues = uniform(k_u);
    Ok(NetworkTopology {
        side,
        aps,
        dl_ues,
        ul_ues,
    })
}

fn place_aps(m: usize, side: f64, min_ap_dist: f64, seed: u64) -> Result<Vec<Point>> {
    let mut rng = rng::stream(seed, Purpose::ApPlacement, 0);
    let mut aps = Vec::with_capacity(m);
    'restart: for _ in 0..PLACEMENT_RESTARTS {
        aps.clear();
        while aps.len() < m {
            let placed = (0..CANDIDATES_PER_AP).find_map(|_| {
                let c = Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
                aps.iter()
                    .all(|&p| wrap_distance_unchecked(p, c, side) >= min_ap_dist)
                    .then_some(c)
            });
            match placed {
                Some(c) => aps.push(c),
                None => continue 'restart,
            }
        }
        return Ok(aps);
    }
    Err(Error::Placement {
        attempts: PLACEMENT_RESTARTS,
        constraint: format!("pairwise AP wrap-distance >= {min_ap_dist} m for {m} APs in a {side} m square"),
    })
}
