//! Count-field simulation of the branching random walk started at the root.
//!
//! Two engines share the same dynamics:
//!
//! * [`ParticleField`] keeps one count per vertex up to the depth reachable
//!   by the horizon, optionally pruned. It is small and transparent and is
//!   the reference for the second engine.
//! * [`CoverField`] keeps dense counts only inside `B(r)`. Everything below a
//!   boundary vertex `z` is lumped by height `h` under `z`: from height
//!   `h >= 1` a particle moves up with probability `1/d` and down otherwise,
//!   whatever its exact position, so the heights form a Markov chain and the
//!   hitting times inside the ball keep their law. Once a vertex and its whole
//!   subtree in the ball are hit, the subtree is merged into a single lump
//!   rooted at that vertex.
//!
//! Both engines use one array per structure: at time `t` only cells whose
//! depth has the parity of `t` are occupied, so a step reads one parity
//! class and writes the other.
//!
//! Pruning: a particle at depth `j > r` needs `j - r` steps to re-enter the
//! ball, so if `j - r > horizon - t` nothing it or its descendants do can be
//! observed by the horizon. Dropping it changes no recorded hitting time.

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::sampling::{binomial, multinomial_uniform, Count, SamplingPolicy};
use crate::tree::{Tree, VertexId};

/// Marker for a vertex not hit by the horizon.
pub const UNHIT: u32 = u32::MAX;
/// Default horizon slack beyond `r`.
pub const DEFAULT_SLACK: u32 = 60;
/// Default memory budget for one run, in bytes.
pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

fn shell_sizes(d: u32, r: u32) -> Result<Vec<usize>> {
    let tree = Tree::new(d)?;
    (0..=r)
        .map(|j| {
            let s = tree.shell_size(j)?;
            usize::try_from(s).map_err(|_| Error::Overflow(format!("shell {j} of the {d}-regular tree")))
        })
        .collect()
}

fn prefix_offsets(shells: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(shells.len() + 1);
    let mut acc = 0usize;
    off.push(0);
    for s in shells {
        acc += s;
        off.push(acc);
    }
    off
}

#[inline]
fn parent_index(d: u32, depth: u32, idx: usize) -> usize {
    if depth <= 1 {
        0
    } else {
        idx / (d as usize - 1)
    }
}

#[inline]
fn child_index(d: u32, depth: u32, idx: usize, c: usize) -> usize {
    if depth == 0 {
        c
    } else {
        idx * (d as usize - 1) + c
    }
}

#[inline]
fn add_sat(cell: &mut Count, n: Count, approx: &mut bool) {
    match cell.checked_add(n) {
        Some(v) => *cell = v,
        None => {
            *cell = Count::MAX;
            *approx = true;
        }
    }
}

/// First hitting times over `B(r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HittingRecord {
    d: u32,
    r: u32,
    horizon: u32,
    offsets: Vec<usize>,
    hits: Vec<u32>,
    extinct: bool,
    approximate: bool,
}

impl HittingRecord {
    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.r
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// The process died out before covering the ball.
    pub fn extinct(&self) -> bool {
        self.extinct
    }

    pub fn approximate(&self) -> bool {
        self.approximate
    }

    /// Raw hitting times at one depth, [`UNHIT`] for unhit vertices.
    pub fn hits_at_depth(&self, depth: u32) -> &[u32] {
        let j = depth as usize;
        &self.hits[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn hit_time(&self, depth: u32, idx: usize) -> Option<u32> {
        let h = self.hits_at_depth(depth)[idx];
        (h != UNHIT).then_some(h)
    }

    pub fn hit_time_of(&self, v: &VertexId) -> Option<u32> {
        let tree = Tree::new(self.d).ok()?;
        if v.depth() > self.r || !tree.contains(v) {
            return None;
        }
        self.hit_time(v.depth(), tree.shell_index(v) as usize)
    }

    /// `max H(x)` over `B(r')`, or `None` if some vertex there is unhit.
    pub fn cover_time_at(&self, r: u32) -> Option<u32> {
        assert!(r <= self.r, "radius {r} outside the recorded ball {}", self.r);
        let mut max = 0;
        for &h in &self.hits[..self.offsets[r as usize + 1]] {
            if h == UNHIT {
                return None;
            }
            max = max.max(h);
        }
        Some(max)
    }

    pub fn cover_time(&self) -> Option<u32> {
        self.cover_time_at(self.r)
    }

    /// Not covered by the horizon and not extinct.
    pub fn censored_at(&self, r: u32) -> bool {
        !self.extinct && self.cover_time_at(r).is_none()
    }

    pub fn censored(&self) -> bool {
        self.censored_at(self.r)
    }

    pub fn unhit(&self, r: u32) -> Vec<VertexId> {
        let tree = Tree::new(self.d).expect("validated degree");
        let mut out = Vec::new();
        for j in 0..=r {
            for (i, &h) in self.hits_at_depth(j).iter().enumerate() {
                if h == UNHIT {
                    out.push(tree.vertex_at(j, i as u64));
                }
            }
        }
        out
    }

    /// Hit vertices with `H(x)` of the wrong parity.
    pub fn parity_violations(&self) -> usize {
        (0..=self.r)
            .map(|j| {
                self.hits_at_depth(j)
                    .iter()
                    .filter(|&&h| h != UNHIT && h % 2 != j % 2)
                    .count()
            })
            .sum()
    }

    /// Hit vertices with `H(x) < depth(x)`, plus one if the cover time is below `r`.
    pub fn floor_violations(&self) -> usize {
        let mut v: usize = (0..=self.r)
            .map(|j| self.hits_at_depth(j).iter().filter(|&&h| h != UNHIT && h < j).count())
            .sum();
        if self.cover_time().is_some_and(|c| c < self.r) {
            v += 1;
        }
        v + usize::from(self.hits[0] != 0 && self.hits[0] != UNHIT)
    }

    /// `(H(z) - r) / 2` for a boundary vertex: the away steps of its first visitor.
    pub fn min_away_steps(&self, z_idx: usize) -> Option<u32> {
        self.hit_time(self.r, z_idx).map(|h| (h - self.r) / 2)
    }
}

/// Dense per-vertex counts down to the deepest level reachable by the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleField {
    d: u32,
    r: u32,
    horizon: u32,
    prune: bool,
    t: u32,
    levels: Vec<Vec<Count>>,
    approximate: bool,
}

impl ParticleField {
    pub fn new(d: u32, r: u32, horizon: u32, prune: bool, budget: u64) -> Result<Self> {
        if horizon < r {
            return Err(Error::InvalidParameter(format!("horizon {horizon} below radius {r}")));
        }
        // with pruning, depth <= min(t, r + horizon - t)
        let depth = if prune { (r + horizon) / 2 } else { horizon };
        let tree = Tree::new(d)?;
        let cells = tree.ball_size(depth)?;
        let required = cells.saturating_mul(std::mem::size_of::<Count>() as u128);
        if required > budget as u128 {
            return Err(Error::MemoryBudget {
                required: u64::try_from(required).unwrap_or(u64::MAX),
                budget,
            });
        }
        let shells = shell_sizes(d, depth)?;
        Ok(ParticleField {
            d,
            r,
            horizon,
            prune,
            t: 0,
            levels: shells.iter().map(|&s| vec![0; s]).collect(),
            approximate: false,
        })
    }

    pub fn seed_root(&mut self, n: Count) {
        self.levels[0][0] += n;
    }

    pub fn time(&self) -> u32 {
        self.t
    }

    pub fn approximate(&self) -> bool {
        self.approximate
    }

    pub fn level(&self, depth: u32) -> &[Count] {
        &self.levels[depth as usize]
    }

    pub fn count(&self, depth: u32, idx: usize) -> Count {
        self.levels[depth as usize][idx]
    }

    pub fn total(&self) -> Count {
        self.levels.iter().flatten().fold(0, |a: Count, &c| a.saturating_add(c))
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().flatten().all(|&c| c == 0)
    }

    /// Deepest level allowed to carry particles at time `t`.
    fn band_limit(&self, t: u32) -> u32 {
        let cap = self.levels.len() as u32 - 1;
        if self.prune {
            (self.r + self.horizon.saturating_sub(t)).min(cap)
        } else {
            cap
        }
    }

    /// Occupied levels all have the parity of `t`.
    pub fn parity_ok(&self) -> bool {
        self.levels
            .iter()
            .enumerate()
            .all(|(j, lvl)| j as u32 % 2 == self.t % 2 || lvl.iter().all(|&c| c == 0))
    }

    /// No particles outside the pruning band.
    pub fn band_ok(&self) -> bool {
        let lim = self.band_limit(self.t) as usize;
        self.levels.iter().skip(lim + 1).all(|lvl| lvl.iter().all(|&c| c == 0))
    }

    pub fn step<R: Rng + ?Sized>(&mut self, dist: &OffspringDist, rng: &mut R, policy: &SamplingPolicy) -> Result<()> {
        if self.t >= self.horizon {
            return Err(Error::InvalidParameter(format!("time {} already at the horizon", self.t)));
        }
        let d = self.d;
        let next = self.t + 1;
        let limit = self.band_limit(next);
        let mut split = vec![0 as Count; d as usize];
        let mut approx = false;
        let mut j = self.t % 2;
        while j as usize <= self.levels.len() - 1 && j <= self.t {
            for idx in 0..self.levels[j as usize].len() {
                let n = std::mem::take(&mut self.levels[j as usize][idx]);
                if n == 0 {
                    continue;
                }
                let kids = dist.sample_sum(rng, n, policy);
                approx |= kids.approximate;
                if kids.value == 0 {
                    continue;
                }
                approx |= multinomial_uniform(rng, kids.value, &mut split, policy);
                let children = if j == 0 {
                    &split[..]
                } else {
                    let p = parent_index(d, j, idx);
                    add_sat(&mut self.levels[j as usize - 1][p], split[0], &mut approx);
                    &split[1..]
                };
                if j + 1 > limit {
                    continue;
                }
                for (c, &m) in children.iter().enumerate() {
                    if m > 0 {
                        let ci = child_index(d, j, idx, c);
                        add_sat(&mut self.levels[j as usize + 1][ci], m, &mut approx);
                    }
                }
            }
            j += 2;
        }
        self.t = next;
        self.approximate |= approx;
        Ok(())
    }
}

/// Run the dense engine from `n0` particles at the root until `B(r)` is
/// covered, the process dies out, or the horizon is reached.
#[allow(clippy::too_many_arguments)]
pub fn run_cover_explicit<R: Rng + ?Sized>(
    d: u32,
    r: u32,
    horizon: u32,
    prune: bool,
    n0: Count,
    dist: &OffspringDist,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<HittingRecord> {
    let mut field = ParticleField::new(d, r, horizon, prune, DEFAULT_MEMORY_BUDGET)?;
    field.seed_root(n0);
    let shells = shell_sizes(d, r)?;
    let offsets = prefix_offsets(&shells);
    let mut hits = vec![UNHIT; offsets[r as usize + 1]];
    let mut unhit = hits.len();
    let mut extinct = false;
    loop {
        for j in 0..=r.min(field.t) {
            for (i, &c) in field.level(j).iter().enumerate() {
                let slot = &mut hits[offsets[j as usize] + i];
                if c > 0 && *slot == UNHIT {
                    *slot = field.t;
                    unhit -= 1;
                }
            }
        }
        if unhit == 0 || field.t >= horizon {
            break;
        }
        if field.is_empty() {
            extinct = true;
            break;
        }
        field.step(dist, rng, policy)?;
    }
    Ok(HittingRecord {
        d,
        r,
        horizon,
        offsets,
        hits,
        extinct,
        approximate: field.approximate,
    })
}

const EXPLICIT: u8 = 0;
const LUMP: u8 = 1;
const ABSORBED: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Lump {
    vertex: usize,
    depth: u32,
    /// The whole subtree of `vertex` inside the ball has been hit.
    complete: bool,
    cells: Vec<Count>,
}

/// Exact lumped engine for hitting times inside `B(r)`.
///
/// A step is split into [`CoverField::advance`] (sampling) and
/// [`CoverField::finish_step`] (hit bookkeeping and merging) so callers can
/// inject extra particles in between.
#[derive(Debug, Clone)]
pub struct CoverField {
    d: u32,
    r: u32,
    horizon: u32,
    t: u32,
    shells: Vec<usize>,
    offsets: Vec<usize>,
    cnt: Vec<Count>,
    kind: Vec<u8>,
    slot: Vec<u32>,
    pending: Vec<u32>,
    hits: Vec<u32>,
    unhit: usize,
    lumps: Vec<Option<Lump>>,
    free: Vec<u32>,
    fresh: Vec<usize>,
    approximate: bool,
    wrote_mass: bool,
    pruned: bool,
}

/// Worst-case bytes used by a [`CoverField`].
pub fn memory_estimate(d: u32, r: u32, horizon: u32) -> Result<u64> {
    let tree = Tree::new(d)?;
    let ball = tree.ball_size(r)?;
    let shell = tree.shell_size(r)?;
    let per_vertex = (std::mem::size_of::<Count>() + 1 + 4 + 4 + 4) as u128;
    let lump_cells = (horizon.saturating_sub(r) as u128 + 2) * std::mem::size_of::<Count>() as u128 + 64;
    let total = ball
        .saturating_mul(per_vertex)
        .saturating_add(shell.saturating_mul(lump_cells));
    Ok(u64::try_from(total).unwrap_or(u64::MAX))
}

impl CoverField {
    pub fn new(d: u32, r: u32, horizon: u32, budget: u64) -> Result<Self> {
        if horizon < r {
            return Err(Error::InvalidParameter(format!("horizon {horizon} below radius {r}")));
        }
        let required = memory_estimate(d, r, horizon)?;
        if required > budget {
            return Err(Error::MemoryBudget { required, budget });
        }
        let shells = shell_sizes(d, r)?;
        let offsets = prefix_offsets(&shells);
        let n = offsets[r as usize + 1];
        let mut f = CoverField {
            d,
            r,
            horizon,
            t: 0,
            cnt: vec![0; n],
            kind: vec![EXPLICIT; n],
            slot: vec![u32::MAX; n],
            pending: vec![0; n],
            hits: vec![UNHIT; n],
            unhit: n,
            lumps: Vec::with_capacity(shells[r as usize]),
            free: Vec::new(),
            fresh: Vec::new(),
            approximate: false,
            wrote_mass: false,
            pruned: false,
            shells,
            offsets,
        };
        for j in 0..r {
            let kids = if j == 0 { d } else { d - 1 };
            let (a, b) = (f.offsets[j as usize], f.offsets[j as usize + 1]);
            f.pending[a..b].fill(kids);
        }
        let (a, b) = (f.offsets[r as usize], f.offsets[r as usize + 1]);
        for id in a..b {
            f.kind[id] = LUMP;
            f.slot[id] = f.lumps.len() as u32;
            f.lumps.push(Some(Lump {
                vertex: id,
                depth: r,
                complete: false,
                cells: Vec::new(),
            }));
        }
        Ok(f)
    }

    pub fn time(&self) -> u32 {
        self.t
    }

    pub fn radius(&self) -> u32 {
        self.r
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn covered(&self) -> bool {
        self.unhit == 0
    }

    pub fn approximate(&self) -> bool {
        self.approximate
    }

    /// Some particle was placed during the last step (or seeding).
    pub fn has_mass(&self) -> bool {
        self.wrote_mass
    }

    /// Particles were dropped by the pruning rule at some point.
    pub fn pruned(&self) -> bool {
        self.pruned
    }

    pub fn hit_time(&self, depth: u32, idx: usize) -> Option<u32> {
        let h = self.hits[self.offsets[depth as usize] + idx];
        (h != UNHIT).then_some(h)
    }

    fn depth_of(&self, id: usize) -> u32 {
        (self.offsets.partition_point(|&o| o <= id) - 1) as u32
    }

    fn parent_id(&self, id: usize) -> usize {
        let j = self.depth_of(id);
        let idx = id - self.offsets[j as usize];
        self.offsets[j as usize - 1] + parent_index(self.d, j, idx)
    }

    fn register(&mut self, id: usize, time: u32) {
        if self.hits[id] == UNHIT {
            self.hits[id] = time;
            self.unhit -= 1;
            self.fresh.push(id);
        }
    }

    /// A lump cell at height `h` can still matter at `time`.
    fn useful(&self, h: usize, complete: bool, time: u32) -> bool {
        let rem = self.horizon.saturating_sub(time) as usize;
        time <= self.horizon && h + usize::from(complete) <= rem
    }

    fn lump_add(&mut self, s: usize, h: usize, n: Count, time: u32) {
        let complete = self.lumps[s].as_ref().expect("live lump").complete;
        if !self.useful(h, complete, time) {
            self.pruned = true;
            return;
        }
        let lump = self.lumps[s].as_mut().expect("live lump");
        if lump.cells.len() <= h {
            lump.cells.resize(h + 1, 0);
        }
        add_sat(&mut lump.cells[h], n, &mut self.approximate);
        self.wrote_mass = true;
    }

    /// Deliver `n` particles to ball vertex `id` at `time`.
    fn deliver(&mut self, id: usize, n: Count, time: u32) {
        match self.kind[id] {
            EXPLICIT => {
                add_sat(&mut self.cnt[id], n, &mut self.approximate);
                self.wrote_mass = true;
            }
            LUMP => self.lump_add(self.slot[id] as usize, 0, n, time),
            _ => {
                // inside a merged subtree: find the lump root above
                let mut y = id;
                let mut h = 0;
                while self.kind[y] == ABSORBED {
                    y = self.parent_id(y);
                    h += 1;
                }
                debug_assert_eq!(self.kind[y], LUMP);
                self.lump_add(self.slot[y] as usize, h, n, time);
            }
        }
        self.register(id, time);
    }

    /// Place `n` particles at a ball vertex at the current time.
    pub fn add_at(&mut self, depth: u32, idx: usize, n: Count) {
        if n > 0 {
            let id = self.offsets[depth as usize] + idx;
            self.deliver(id, n, self.t);
        }
    }

    /// Place `n` particles `h >= 1` levels below boundary vertex `z_idx`.
    pub fn add_exterior(&mut self, z_idx: usize, h: usize, n: Count) {
        if n == 0 {
            return;
        }
        let mut y = self.offsets[self.r as usize] + z_idx;
        let mut hh = h;
        while self.kind[y] == ABSORBED {
            y = self.parent_id(y);
            hh += 1;
        }
        self.lump_add(self.slot[y] as usize, hh, n, self.t);
    }

    /// Record a visit at a ball vertex by a particle held outside the field.
    pub fn mark_hit(&mut self, depth: u32, idx: usize) {
        let id = self.offsets[depth as usize] + idx;
        self.register(id, self.t);
    }

    /// Record mass held outside the field, for extinction detection.
    pub fn note_external_mass(&mut self) {
        self.wrote_mass = true;
    }

    pub fn seed_root(&mut self, n: Count) {
        self.add_at(0, 0, n);
    }

    /// Sample one step of the dynamics; time advances by one.
    pub fn advance<R: Rng + ?Sized>(&mut self, dist: &OffspringDist, rng: &mut R, policy: &SamplingPolicy) {
        let d = self.d;
        let t = self.t;
        let next = t + 1;
        self.wrote_mass = false;
        let mut split = vec![0 as Count; d as usize];
        let mut j = t % 2;
        while j < self.r && j <= t {
            let off = self.offsets[j as usize];
            let child_off = self.offsets[j as usize + 1];
            for idx in 0..self.shells[j as usize] {
                let id = off + idx;
                if self.kind[id] != EXPLICIT {
                    continue;
                }
                let n = std::mem::take(&mut self.cnt[id]);
                if n == 0 {
                    continue;
                }
                let kids = dist.sample_sum(rng, n, policy);
                self.approximate |= kids.approximate;
                if kids.value == 0 {
                    continue;
                }
                self.approximate |= multinomial_uniform(rng, kids.value, &mut split, policy);
                let first_child = if j == 0 {
                    0
                } else {
                    if split[0] > 0 {
                        let p = self.offsets[j as usize - 1] + parent_index(d, j, idx);
                        self.deliver(p, split[0], next);
                    }
                    1
                };
                for c in first_child..d as usize {
                    let m = split[c];
                    if m > 0 {
                        let ci = child_off + child_index(d, j, idx, c - first_child);
                        self.deliver(ci, m, next);
                    }
                }
            }
            j += 2;
        }
        let up_p = 1.0 / d as f64;
        for s in 0..self.lumps.len() {
            let Some(mut lump) = self.lumps[s].take() else {
                continue;
            };
            let parent = (lump.vertex != 0).then(|| self.parent_id(lump.vertex));
            let len = lump.cells.len();
            let mut h = ((t + lump.depth) % 2) as usize;
            // writes below go to the other parity class, never read in this loop
            let mut up_out: Count = 0;
            let mut writes: Vec<(usize, Count)> = Vec::new();
            while h < len {
                let n = std::mem::take(&mut lump.cells[h]);
                if n > 0 && self.useful(h, lump.complete, t) {
                    let kids = dist.sample_sum(rng, n, policy);
                    self.approximate |= kids.approximate;
                    if kids.value > 0 {
                        if h == 0 && parent.is_none() {
                            writes.push((1, kids.value));
                        } else {
                            let up = binomial(rng, kids.value, up_p, policy);
                            self.approximate |= up.approximate;
                            if up.value > 0 {
                                if h == 0 {
                                    up_out = up.value;
                                } else {
                                    writes.push((h - 1, up.value));
                                }
                            }
                            if kids.value > up.value {
                                writes.push((h + 1, kids.value - up.value));
                            }
                        }
                    }
                } else if n > 0 {
                    self.pruned = true;
                }
                h += 2;
            }
            self.lumps[s] = Some(lump);
            for (hh, n) in writes {
                self.lump_add(s, hh, n, next);
                if hh == 0 {
                    let v = self.lumps[s].as_ref().expect("live lump").vertex;
                    self.register(v, next);
                }
            }
            if up_out > 0 {
                let p = parent.expect("h = 0 outflow needs a parent");
                self.deliver(p, up_out, next);
            }
        }
        self.t = next;
    }

    /// Merge subtrees that became fully hit during the last step.
    pub fn finish_step(&mut self) {
        let fresh = std::mem::take(&mut self.fresh);
        for id in fresh {
            match self.kind[id] {
                LUMP => {
                    let s = self.slot[id] as usize;
                    let lump = self.lumps[s].as_mut().expect("live lump");
                    if !lump.complete {
                        lump.complete = true;
                        self.propagate(id);
                    }
                }
                EXPLICIT if self.pending[id] == 0 => self.merge(id),
                _ => {}
            }
        }
    }

    fn propagate(&mut self, mut id: usize) {
        while id != 0 {
            let p = self.parent_id(id);
            self.pending[p] -= 1;
            if self.pending[p] == 0 && self.hits[p] != UNHIT {
                self.merge_only(p);
                id = p;
            } else {
                break;
            }
        }
    }

    fn merge(&mut self, id: usize) {
        self.merge_only(id);
        self.propagate(id);
    }

    fn merge_only(&mut self, p: usize) {
        let j = self.depth_of(p);
        let idx = p - self.offsets[j as usize];
        let nkids = if j == 0 { self.d } else { self.d - 1 } as usize;
        let mut cells = vec![std::mem::take(&mut self.cnt[p])];
        for c in 0..nkids {
            let cid = self.offsets[j as usize + 1] + child_index(self.d, j, idx, c);
            debug_assert_eq!(self.kind[cid], LUMP);
            let s = self.slot[cid] as usize;
            let child = self.lumps[s].take().expect("live lump");
            self.free.push(s as u32);
            self.kind[cid] = ABSORBED;
            if cells.len() < child.cells.len() + 1 {
                cells.resize(child.cells.len() + 1, 0);
            }
            for (h, &n) in child.cells.iter().enumerate() {
                add_sat(&mut cells[h + 1], n, &mut self.approximate);
            }
        }
        let lump = Lump {
            vertex: p,
            depth: j,
            complete: true,
            cells,
        };
        let s = match self.free.pop() {
            Some(s) => {
                self.lumps[s as usize] = Some(lump);
                s
            }
            None => {
                self.lumps.push(Some(lump));
                self.lumps.len() as u32 - 1
            }
        };
        self.kind[p] = LUMP;
        self.slot[p] = s;
    }

    /// Number of lumps currently alive.
    pub fn lump_count(&self) -> usize {
        self.lumps.iter().filter(|l| l.is_some()).count()
    }

    /// Total particles held by the field.
    pub fn total_mass(&self) -> Count {
        let dense = self.cnt.iter().fold(0 as Count, |a, &c| a.saturating_add(c));
        self.lumps
            .iter()
            .flatten()
            .flat_map(|l| l.cells.iter())
            .fold(dense, |a, &c| a.saturating_add(c))
    }

    pub fn into_record(self, extinct: bool) -> HittingRecord {
        HittingRecord {
            d: self.d,
            r: self.r,
            horizon: self.horizon,
            offsets: self.offsets,
            hits: self.hits,
            extinct,
            approximate: self.approximate,
        }
    }
}

/// Options for [`run_cover`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverOptions {
    pub slack: u32,
    pub n0: Count,
    pub budget: u64,
    pub policy: SamplingPolicy,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            slack: DEFAULT_SLACK,
            n0: 1,
            budget: DEFAULT_MEMORY_BUDGET,
            policy: SamplingPolicy::default(),
        }
    }
}

/// Cover run of `B(r)` with horizon `r + slack`.
///
/// The run is marked extinct when every particle is gone before covering and
/// nothing was pruned; otherwise an uncovered ball is censored.
pub fn run_cover<R: Rng + ?Sized>(
    r: u32,
    dist: &OffspringDist,
    d: u32,
    opts: &CoverOptions,
    rng: &mut R,
) -> Result<HittingRecord> {
    let horizon = r
        .checked_add(opts.slack)
        .ok_or_else(|| Error::Overflow("horizon".into()))?;
    let mut field = CoverField::new(d, r, horizon, opts.budget)?;
    field.seed_root(opts.n0);
    field.finish_step();
    let mut extinct = false;
    while !field.covered() && field.time() < horizon {
        field.advance(dist, rng, &opts.policy);
        field.finish_step();
        if !field.has_mass() {
            extinct = !field.pruned();
            break;
        }
    }
    Ok(field.into_record(extinct))
}

/// One sample of `H(y)` from the band-limited projected chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HitSample {
    /// `None` when the band never reached `y`.
    pub time: Option<u32>,
    pub approximate: bool,
}

/// Hitting time of a vertex at distance `l` from the start, keeping only
/// particles with at most `k_band` away steps. Exact on `{H <= l + 2 k_band}`;
/// otherwise censored.
pub fn run_hitting_single<R: Rng + ?Sized>(
    l: u32,
    k_band: u32,
    dist: &OffspringDist,
    d: u32,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<HitSample> {
    if l == 0 {
        return Err(Error::InvalidParameter("distance must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!("degree must be at least 2, got {d}")));
    }
    let kb = k_band as usize;
    let width = l as usize + kb + 1;
    // cells[m][a]: distance m to y, a away steps
    let mut cells = vec![vec![0 as Count; kb + 1]; width];
    let mut next = cells.clone();
    cells[l as usize][0] = 1;
    let mut approx = false;
    let p = 1.0 / d as f64;
    for t in 0..l + 2 * k_band {
        let mut any = false;
        for row in next.iter_mut() {
            row.fill(0);
        }
        for m in 1..width {
            for a in 0..=kb {
                let n = cells[m][a];
                if n == 0 {
                    continue;
                }
                let kids = dist.sample_sum(rng, n, policy);
                approx |= kids.approximate;
                let up = binomial(rng, kids.value, p, policy);
                approx |= up.approximate;
                if up.value > 0 {
                    if m == 1 {
                        return Ok(HitSample {
                            time: Some(t + 1),
                            approximate: approx,
                        });
                    }
                    add_sat(&mut next[m - 1][a], up.value, &mut approx);
                    any = true;
                }
                let away = kids.value - up.value;
                if away > 0 && a < kb {
                    add_sat(&mut next[m + 1][a + 1], away, &mut approx);
                    any = true;
                }
            }
        }
        std::mem::swap(&mut cells, &mut next);
        if !any {
            break;
        }
    }
    Ok(HitSample {
        time: None,
        approximate: approx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stats::{compare_laws, histogram};

    fn det(d: u64) -> OffspringDist {
        OffspringDist::point_mass(d)
    }

    #[test]
    fn radius_zero_is_covered_at_once() {
        let mut rng = rng_from_seed(1);
        let rec = run_cover(0, &det(3), 3, &CoverOptions::default(), &mut rng).unwrap();
        assert_eq!(rec.cover_time(), Some(0));
        let rec = run_cover_explicit(3, 0, 5, true, 1, &det(3), &mut rng, &SamplingPolicy::default()).unwrap();
        assert_eq!(rec.cover_time(), Some(0));
    }

    #[test]
    fn single_step_from_root() {
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let mut f = ParticleField::new(3, 2, 4, true, DEFAULT_MEMORY_BUDGET).unwrap();
            f.seed_root(1);
            f.step(&det(3), &mut rng, &SamplingPolicy::default()).unwrap();
            assert_eq!(f.level(1).iter().sum::<Count>(), 3);
            assert_eq!(f.total(), 3);
        }
    }

    #[test]
    fn empty_field_stays_empty() {
        let mut rng = rng_from_seed(3);
        let mut f = ParticleField::new(3, 2, 4, true, DEFAULT_MEMORY_BUDGET).unwrap();
        f.step(&det(3), &mut rng, &SamplingPolicy::default()).unwrap();
        assert!(f.is_empty());
        assert_eq!(f.time(), 1);
    }

    #[test]
    fn parity_and_band_hold_every_step() {
        let mut rng = rng_from_seed(4);
        let pol = SamplingPolicy::default();
        let pois = OffspringDist::poisson(3.0).unwrap();
        for dist in [det(3), pois] {
            for _ in 0..200 {
                let mut f = ParticleField::new(3, 4, 8, true, DEFAULT_MEMORY_BUDGET).unwrap();
                f.seed_root(1);
                for _ in 0..8 {
                    f.step(&dist, &mut rng, &pol).unwrap();
                    assert!(f.parity_ok());
                    assert!(f.band_ok());
                }
            }
        }
    }

    #[test]
    fn mass_conservation_without_pruning() {
        let mut rng = rng_from_seed(5);
        let mut f = ParticleField::new(3, 4, 6, false, DEFAULT_MEMORY_BUDGET).unwrap();
        f.seed_root(1);
        for t in 1..=6u32 {
            f.step(&det(3), &mut rng, &SamplingPolicy::default()).unwrap();
            assert_eq!(f.total(), 3u128.pow(t));
        }
    }

    #[test]
    fn step_past_horizon_is_an_error() {
        let mut rng = rng_from_seed(6);
        let mut f = ParticleField::new(3, 1, 1, true, DEFAULT_MEMORY_BUDGET).unwrap();
        f.seed_root(1);
        f.step(&det(3), &mut rng, &SamplingPolicy::default()).unwrap();
        assert!(f.step(&det(3), &mut rng, &SamplingPolicy::default()).is_err());
    }

    /// Law of the cover time of `B(1)`, d = 3, three children each: up to
    /// time 3 by enumeration, the rest lumped.
    fn radius_one_oracle() -> [f64; 3] {
        // unhit neighbours after one step: 3 particles in 3 cells
        let p_u = [6.0 / 27.0, 18.0 / 27.0, 3.0 / 27.0];
        // particles back at the root at time 2: Binomial(9, 1/3)
        let binom = |m: u32| -> f64 {
            let c = (0..m).fold(1.0, |a, i| a * (9 - i) as f64 / (i + 1) as f64);
            c * (1.0f64 / 3.0).powi(m as i32) * (2.0f64 / 3.0).powi(9 - m as i32)
        };
        let mut p3 = p_u[0];
        for (u, pu) in p_u.iter().enumerate().skip(1) {
            let mut acc = 0.0;
            for m in 0..=9u32 {
                // inclusion-exclusion over the unhit set
                let mut all_hit = 0.0;
                for s in 0..=u {
                    let choose = if s == 0 || s == u { 1.0 } else { u as f64 };
                    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                    all_hit += sign * choose * ((3 - s) as f64 / 3.0).powi(3 * m as i32);
                }
                acc += binom(m) * all_hit;
            }
            p3 += pu * acc;
        }
        [p_u[0], p3 - p_u[0], 1.0 - p3]
    }

    #[test]
    fn radius_one_matches_enumeration() {
        let oracle = radius_one_oracle();
        assert!((oracle.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = rng_from_seed(7);
        let reps = 40_000;
        let mut freq = [0.0; 3];
        for _ in 0..reps {
            let rec = run_cover(1, &det(3), 3, &CoverOptions::default(), &mut rng).unwrap();
            let c = rec.cover_time().unwrap();
            freq[match c {
                1 => 0,
                3 => 1,
                _ => 2,
            }] += 1.0 / reps as f64;
        }
        let tv: f64 = freq.iter().zip(oracle).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "{freq:?} vs {oracle:?}");
    }

    #[test]
    fn lumped_agrees_with_dense() {
        let mut rng = rng_from_seed(8);
        let pol = SamplingPolicy::default();
        let pois = OffspringDist::poisson(3.0).unwrap();
        let (r, horizon) = (3, 9);
        let reps = 20_000;
        for dist in [det(3), pois] {
            let opts = CoverOptions {
                slack: horizon - r,
                ..CoverOptions::default()
            };
            let key = |rec: &HittingRecord| {
                (
                    rec.cover_time().unwrap_or(UNHIT),
                    rec.hit_time(3, 0).unwrap_or(UNHIT),
                    rec.hit_time(2, 5).unwrap_or(UNHIT),
                )
            };
            let a: Vec<_> = (0..reps)
                .map(|_| key(&run_cover(r, &dist, 3, &opts, &mut rng).unwrap()))
                .collect();
            let b: Vec<_> = (0..reps)
                .map(|_| key(&run_cover_explicit(3, r, horizon, false, 1, &dist, &mut rng, &pol).unwrap()))
                .collect();
            let c = compare_laws(&histogram(&a), &histogram(&b), 0.01).unwrap();
            assert!(c.tv < 0.03 && c.p_value > 1e-4, "{dist}: {c:?}");
        }
    }

    #[test]
    fn records_satisfy_invariants() {
        let mut rng = rng_from_seed(9);
        let pois = OffspringDist::poisson(3.0).unwrap();
        let mut extinct = 0;
        for _ in 0..300 {
            let rec = run_cover(6, &pois, 3, &CoverOptions::default(), &mut rng).unwrap();
            assert_eq!(rec.parity_violations(), 0);
            assert_eq!(rec.floor_violations(), 0);
            assert_eq!(rec.hit_time(0, 0), Some(0));
            extinct += usize::from(rec.extinct());
            if let Some(c) = rec.cover_time() {
                let mut prev = 0;
                for rr in 0..=6 {
                    let ct = rec.cover_time_at(rr).unwrap();
                    assert!(ct >= prev && ct >= rr);
                    prev = ct;
                }
                assert_eq!(prev, c);
            }
        }
        // P(extinction) = 0.0595... for Poisson(3)
        assert!(extinct > 3 && extinct < 45, "{extinct}");
    }

    #[test]
    fn deterministic_given_seed() {
        let run = |seed| {
            let mut rng = rng_from_seed(seed);
            run_cover(8, &det(3), 3, &CoverOptions::default(), &mut rng).unwrap()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn lumps_collapse_after_cover() {
        let mut rng = rng_from_seed(10);
        let mut f = CoverField::new(3, 5, 65, DEFAULT_MEMORY_BUDGET).unwrap();
        f.seed_root(1);
        f.finish_step();
        assert_eq!(f.lump_count(), 48);
        while !f.covered() {
            f.advance(&det(3), &mut rng, &SamplingPolicy::default());
            f.finish_step();
        }
        assert_eq!(f.lump_count(), 1);
        // no pruning yet: every particle is still present
        assert_eq!(f.total_mass(), 3u128.pow(f.time()));
    }

    #[test]
    fn memory_budget_refusal() {
        match CoverField::new(3, 20, 80, 1 << 20) {
            Err(Error::MemoryBudget { required, budget }) => {
                assert!(required > budget);
                assert_eq!(budget, 1 << 20);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_hit_one_step() {
        let mut rng = rng_from_seed(12);
        let pol = SamplingPolicy::default();
        let reps = 50_000;
        let hits = (0..reps)
            .filter(|_| run_hitting_single(1, 0, &det(3), 3, &mut rng, &pol).unwrap().time == Some(1))
            .count();
        let p = 1.0 - (2.0f64 / 3.0).powi(3);
        assert!((hits as f64 / reps as f64 - p).abs() < 0.01);
    }

    #[test]
    fn single_hit_parity() {
        let mut rng = rng_from_seed(13);
        let pol = SamplingPolicy::default();
        for l in [1u32, 2, 5, 9] {
            for _ in 0..500 {
                if let Some(h) = run_hitting_single(l, 3, &det(3), 3, &mut rng, &pol).unwrap().time {
                    assert_eq!(h % 2, l % 2);
                    assert!(h >= l && h <= l + 6);
                }
            }
        }
    }
}
