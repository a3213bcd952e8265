//! Per-boundary-vertex census of the (z,k)-freezing processes embedded in
//! one branching random walk.
//!
//! For a particle at vertex `v` at time `t`, the number of away steps its
//! ancestral path made with respect to a boundary vertex `z` of `B(r)` is
//! `(t + d(v, z) - r) / 2`, whatever the path. A particle therefore only
//! matters for the (z,k)-freezes with `k <= k_max` while this quantity is
//! below `k_max` for some `z`; such particles are simulated individually and
//! kept in a genealogy, everything else goes to the bulk [`CoverField`].
//! `Y`, `F` and `S` are then read off the genealogy by a depth-first search
//! per `z`, independently of the hitting times recorded by the field.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{CoverField, HittingRecord, DEFAULT_MEMORY_BUDGET, DEFAULT_SLACK};
use crate::offspring::OffspringDist;
use crate::sampling::{Count, SamplingPolicy};
use crate::tree::Tree;

/// Largest radius accepted by the census.
pub const CENSUS_MAX_R: u32 = 8;

/// Position of a tracked particle relative to `B(r_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    /// Vertex of the ball, by depth and dense shell index.
    Interior { depth: u32, idx: u32 },
    /// `h >= 1` levels below boundary vertex `z` (dense index at `r_max`).
    Exterior { z: u32, h: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    /// `u32::MAX` for initial particles.
    pub parent: u32,
    pub loc: Loc,
    pub t: u32,
    pub first_child: u32,
    pub n_children: u32,
}

/// Tracked particles and their untracked children.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Genealogy {
    pub nodes: Vec<Node>,
    pub roots: u32,
}

impl Genealogy {
    pub fn children(&self, i: usize) -> std::ops::Range<usize> {
        let n = &self.nodes[i];
        n.first_child as usize..(n.first_child + n.n_children) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusConfig {
    pub radii: Vec<u32>,
    pub k_max: u32,
    pub n0: Count,
    pub slack: u32,
    pub budget: u64,
    pub policy: SamplingPolicy,
}

impl CensusConfig {
    pub fn new(radii: Vec<u32>, k_max: u32) -> Self {
        CensusConfig {
            radii,
            k_max,
            n0: 1,
            slack: DEFAULT_SLACK,
            budget: DEFAULT_MEMORY_BUDGET,
            policy: SamplingPolicy::default(),
        }
    }
}

/// Freeze counts for one boundary vertex; entry `k - 1` is for the (z,k)-freeze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZCensus {
    pub y: Vec<Count>,
    pub f: Vec<Count>,
    pub s: Vec<Count>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadiusCensus {
    pub r: u32,
    /// Indexed by dense shell index of `z`.
    pub zs: Vec<ZCensus>,
}

impl RadiusCensus {
    /// Some `z` with `Y^(k) = 0` and `F^(k) <= n_k`.
    pub fn has_slow(&self, k: u32, n_k: f64) -> bool {
        k == 0 || self.zs.iter().any(|z| is_slow(z, k, n_k))
    }

    /// Some `z` with `Y^(k) = 0`.
    pub fn has_unreached(&self, k: u32) -> bool {
        k == 0 || self.zs.iter().any(|z| z.y[k as usize - 1] == 0)
    }
}

pub fn is_slow(z: &ZCensus, k: u32, n_k: f64) -> bool {
    k == 0 || (z.y[k as usize - 1] == 0 && (z.f[k as usize - 1] as f64) <= n_k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusRecord {
    pub radii: Vec<RadiusCensus>,
    pub k_max: u32,
    /// Hitting times over `B(r_max)` from the same run.
    pub hitting: HittingRecord,
    pub tracked: usize,
}

impl CensusRecord {
    pub fn radius(&self, r: u32) -> Option<&RadiusCensus> {
        self.radii.iter().find(|c| c.r == r)
    }
}

struct Walker {
    tree: Tree,
    d: u32,
    r_max: u32,
}

impl Walker {
    fn depth(&self, loc: Loc) -> u32 {
        match loc {
            Loc::Interior { depth, .. } => depth,
            Loc::Exterior { h, .. } => self.r_max + h,
        }
    }

    /// Move to neighbour `c` (0 = parent when there is one).
    fn step(&self, loc: Loc, c: u32) -> Loc {
        match loc {
            Loc::Interior { depth: 0, .. } => {
                if self.r_max == 0 {
                    Loc::Exterior { z: 0, h: 1 }
                } else {
                    Loc::Interior { depth: 1, idx: c }
                }
            }
            Loc::Interior { depth, idx } => {
                if c == 0 {
                    let p = if depth == 1 { 0 } else { idx / (self.d - 1) };
                    Loc::Interior { depth: depth - 1, idx: p }
                } else if depth == self.r_max {
                    Loc::Exterior { z: idx, h: 1 }
                } else {
                    Loc::Interior {
                        depth: depth + 1,
                        idx: idx * (self.d - 1) + c - 1,
                    }
                }
            }
            Loc::Exterior { z, h } => {
                if c != 0 {
                    Loc::Exterior { z, h: h + 1 }
                } else if h == 1 {
                    Loc::Interior { depth: self.r_max, idx: z }
                } else {
                    Loc::Exterior { z, h: h - 1 }
                }
            }
        }
    }

    /// Distance from `loc` to the ball vertex `(r, zi)` with `r <= r_max`.
    fn distance(&self, loc: Loc, r: u32, zi: u32) -> u32 {
        match loc {
            Loc::Interior { depth, idx } => self.tree.dense_distance((depth, idx as u64), (r, zi as u64)),
            Loc::Exterior { z, h } => h + self.tree.dense_distance((self.r_max, z as u64), (r, zi as u64)),
        }
    }

    fn away(&self, loc: Loc, t: u32, r: u32, zi: u32) -> u32 {
        (t + self.distance(loc, r, zi) - r) / 2
    }

    /// Smallest away count over all boundary vertices of all radii.
    fn min_away(&self, loc: Loc, t: u32, radii: &[u32]) -> u32 {
        let depth = self.depth(loc);
        radii
            .iter()
            .map(|&r| (t + depth.abs_diff(r) - r) / 2)
            .min()
            .unwrap_or(u32::MAX)
    }
}

fn validate(cfg: &CensusConfig) -> Result<u32> {
    let r_max = *cfg
        .radii
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("empty radius list".into()))?;
    if r_max > CENSUS_MAX_R {
        return Err(Error::CensusLimit {
            r: r_max,
            limit: CENSUS_MAX_R,
        });
    }
    if cfg.n0 == 0 || cfg.n0 > u32::MAX as Count {
        return Err(Error::InvalidParameter(format!("n0 = {} out of range", cfg.n0)));
    }
    Ok(r_max)
}

/// Census run with the genealogy returned alongside.
pub fn census_with_genealogy<R: Rng + ?Sized>(
    cfg: &CensusConfig,
    dist: &OffspringDist,
    d: u32,
    rng: &mut R,
) -> Result<(CensusRecord, Genealogy)> {
    let r_max = validate(cfg)?;
    let horizon = r_max + cfg.slack;
    let walker = Walker {
        tree: Tree::new(d)?,
        d,
        r_max,
    };
    let mut field = CoverField::new(d, r_max, horizon, cfg.budget)?;
    let mut gen = Genealogy::default();
    let root = Loc::Interior { depth: 0, idx: 0 };
    let tracked0 = cfg.k_max > 0;
    if tracked0 {
        for _ in 0..cfg.n0 {
            gen.nodes.push(Node {
                parent: u32::MAX,
                loc: root,
                t: 0,
                first_child: 0,
                n_children: 0,
            });
        }
        gen.roots = cfg.n0 as u32;
        field.mark_hit(0, 0);
        field.note_external_mass();
    } else {
        field.seed_root(cfg.n0);
    }
    field.finish_step();
    let mut frontier: Vec<u32> = (0..gen.roots).collect();
    let mut tracked = frontier.len();
    let mut extinct = false;
    while !(field.covered() && frontier.is_empty()) && field.time() < horizon {
        let t = field.time();
        field.advance(dist, rng, &cfg.policy);
        let mut next = Vec::new();
        for &i in &frontier {
            let loc = gen.nodes[i as usize].loc;
            let kids = dist.sample(rng);
            let first = gen.nodes.len() as u32;
            for _ in 0..kids {
                let c = rng.random_range(0..d);
                let cl = walker.step(loc, c);
                let id = gen.nodes.len() as u32;
                gen.nodes.push(Node {
                    parent: i,
                    loc: cl,
                    t: t + 1,
                    first_child: 0,
                    n_children: 0,
                });
                if walker.min_away(cl, t + 1, &cfg.radii) < cfg.k_max {
                    next.push(id);
                    field.note_external_mass();
                    if let Loc::Interior { depth, idx } = cl {
                        field.mark_hit(depth, idx as usize);
                    }
                } else {
                    match cl {
                        Loc::Interior { depth, idx } => field.add_at(depth, idx as usize, 1),
                        Loc::Exterior { z, h } => field.add_exterior(z as usize, h as usize, 1),
                    }
                }
            }
            let node = &mut gen.nodes[i as usize];
            node.first_child = first;
            node.n_children = kids as u32;
        }
        tracked += next.len();
        frontier = next;
        field.finish_step();
        if !field.has_mass() {
            extinct = !field.pruned();
            break;
        }
    }
    if !frontier.is_empty() {
        // horizon reached while tracked particles were alive; they have no
        // recorded children, which matches a run truncated at the horizon
        frontier.clear();
    }
    let hitting = field.into_record(extinct);
    let mut radii = Vec::with_capacity(cfg.radii.len());
    for &r in &cfg.radii {
        let n_z = walker.tree.shell_size(r)? as u32;
        let zs = (0..n_z)
            .map(|zi| dfs_counts(&gen, &walker, r, zi, cfg.k_max))
            .collect();
        radii.push(RadiusCensus { r, zs });
    }
    Ok((
        CensusRecord {
            radii,
            k_max: cfg.k_max,
            hitting,
            tracked,
        },
        gen,
    ))
}

/// Census run of the branching random walk from `n0` particles at the root.
pub fn census<R: Rng + ?Sized>(cfg: &CensusConfig, dist: &OffspringDist, d: u32, rng: &mut R) -> Result<CensusRecord> {
    census_with_genealogy(cfg, dist, d, rng).map(|(c, _)| c)
}

fn dfs_counts(gen: &Genealogy, w: &Walker, r: u32, zi: u32, k_max: u32) -> ZCensus {
    let km = k_max as usize;
    let mut z = ZCensus {
        y: vec![0; km],
        f: vec![0; km],
        s: vec![0; km],
    };
    let at_z = |loc: Loc| loc == Loc::Interior { depth: r, idx: zi };
    let mut stack: Vec<(usize, u32)> = Vec::new();
    for i in 0..gen.roots as usize {
        for s in z.s.iter_mut() {
            *s += 1;
        }
        let a = w.away(gen.nodes[i].loc, 0, r, zi);
        if a < k_max {
            stack.push((i, a));
        }
    }
    while let Some((i, a)) = stack.pop() {
        let node = gen.nodes[i];
        if at_z(node.loc) {
            for k in a + 1..=k_max {
                z.y[k as usize - 1] += 1;
            }
            continue;
        }
        for c in gen.children(i) {
            let ac = w.away(gen.nodes[c].loc, node.t + 1, r, zi);
            debug_assert!(ac == a || ac == a + 1);
            for k in a + 1..=k_max {
                z.s[k as usize - 1] += 1;
            }
            if ac == a + 1 && ac <= k_max {
                z.f[ac as usize - 1] += 1;
            }
            if ac < k_max {
                stack.push((c, ac));
            }
        }
    }
    z
}
