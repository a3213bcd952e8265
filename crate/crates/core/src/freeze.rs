//! The (x,k)-freezing processes.
//!
//! Particles branch and move as in the branching random walk, but a particle
//! stops for good when it reaches the target `x` or when it takes its k-th
//! step away from `x`. `Y` counts particles frozen at the target, `F` those
//! frozen by their k-th away step and `S` every particle ever present.
//!
//! Runs advance one generation at a time over aggregated counts per
//! (position, away steps) cell. Frozen particles never interact with the
//! rest, so the order in which cells are processed does not affect the law.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::sampling::{binomial, multinomial_uniform, Count, SamplingPolicy};
use crate::tree::{Tree, VertexId};

/// Upper bound on cell updates per run.
pub const EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FreezeOutcome {
    pub y: Count,
    pub f: Count,
    pub s: Count,
    pub terminated: bool,
    pub approximate: bool,
}

/// Particles frozen by the away rule, with the target they were frozen against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrozenConfig {
    target: VertexId,
    /// (position, away steps, count); away steps equal `k` of the run.
    away: Vec<(VertexId, u32, Count)>,
    at_target: Count,
}

impl FrozenConfig {
    /// A configuration built by hand, e.g. `n` particles parked at one vertex.
    pub fn from_particles(target: VertexId, away: Vec<(VertexId, u32, Count)>) -> Self {
        FrozenConfig {
            target,
            away,
            at_target: 0,
        }
    }

    pub fn target(&self) -> &VertexId {
        &self.target
    }

    pub fn away(&self) -> &[(VertexId, u32, Count)] {
        &self.away
    }

    pub fn at_target(&self) -> Count {
        self.at_target
    }

    pub fn total_away(&self) -> Count {
        self.away.iter().map(|(_, _, c)| c).sum()
    }
}

/// Full output of a tree freeze, including arrivals at an optional watch vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeRun {
    pub outcome: FreezeOutcome,
    pub frozen: FrozenConfig,
    /// Particles that occupied the watch vertex with zero away steps.
    pub watch_hits: Count,
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// (target, k)-freeze on the tree from the given counts per vertex.
pub fn freeze_tree<R: Rng + ?Sized>(
    tree: &Tree,
    initial: &[(VertexId, Count)],
    target: &VertexId,
    k: u32,
    dist: &OffspringDist,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<(FreezeOutcome, FrozenConfig)> {
    let run = freeze_tree_watched(tree, initial, target, k, None, dist, rng, policy, EVENT_CAP)?;
    Ok((run.outcome, run.frozen))
}

/// As [`freeze_tree`], also counting zero-away arrivals at `watch` and with
/// an explicit event cap.
#[allow(clippy::too_many_arguments)]
pub fn freeze_tree_watched<R: Rng + ?Sized>(
    tree: &Tree,
    initial: &[(VertexId, Count)],
    target: &VertexId,
    k: u32,
    watch: Option<&VertexId>,
    dist: &OffspringDist,
    rng: &mut R,
    policy: &SamplingPolicy,
    event_cap: u64,
) -> Result<FreezeRun> {
    check_k(k)?;
    let d = tree.degree();
    let mut out = FreezeOutcome::default();
    let mut frozen = FrozenConfig {
        target: target.clone(),
        away: Vec::new(),
        at_target: 0,
    };
    let mut watch_hits: Count = 0;
    let mut cells: BTreeMap<VertexId, Vec<Count>> = BTreeMap::new();
    for (v, n) in initial {
        if !tree.contains(v) {
            return Err(Error::InvalidParameter(format!("{v} is not a vertex of the {d}-regular tree")));
        }
        out.s += n;
        if v == target {
            out.y += n;
        } else {
            if watch == Some(v) {
                watch_hits += n;
            }
            cells.entry(v.clone()).or_insert_with(|| vec![0; k as usize])[0] += n;
        }
    }
    let mut events = 0u64;
    let mut split = vec![0 as Count; d as usize - 1];
    while !cells.is_empty() {
        let mut next: BTreeMap<VertexId, Vec<Count>> = BTreeMap::new();
        for (v, per_away) in &cells {
            let toward = tree.neighbor_toward(v, target)?;
            let away_nbrs: Vec<VertexId> = tree.neighbors(v).into_iter().filter(|w| *w != toward).collect();
            for (a, &n) in per_away.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                events += 1;
                if events > event_cap {
                    return Err(Error::EventCap { cap: event_cap });
                }
                let kids = dist.sample_sum(rng, n, policy);
                out.approximate |= kids.approximate;
                out.s += kids.value;
                let t = binomial(rng, kids.value, 1.0 / d as f64, policy);
                out.approximate |= t.approximate;
                if t.value > 0 {
                    if toward == *target {
                        out.y += t.value;
                    } else {
                        if a == 0 && watch == Some(&toward) {
                            watch_hits += t.value;
                        }
                        next.entry(toward.clone()).or_insert_with(|| vec![0; k as usize])[a] += t.value;
                    }
                }
                let rest = kids.value - t.value;
                if rest == 0 {
                    continue;
                }
                out.approximate |= multinomial_uniform(rng, rest, &mut split, policy);
                for (w, &c) in away_nbrs.iter().zip(&split) {
                    if c == 0 {
                        continue;
                    }
                    // an away step never lands on the target
                    debug_assert!(w != target);
                    if a + 1 == k as usize {
                        out.f += c;
                        frozen.away.push((w.clone(), k, c));
                    } else {
                        next.entry(w.clone()).or_insert_with(|| vec![0; k as usize])[a + 1] += c;
                    }
                }
            }
        }
        cells = next;
    }
    frozen.at_target = out.y;
    out.terminated = true;
    Ok(FreezeRun {
        outcome: out,
        frozen,
        watch_hits,
    })
}

/// The freeze projected onto (distance to target, away steps), started from
/// `n0` particles at distance `l`.
#[allow(clippy::too_many_arguments)]
pub fn freeze_1d<R: Rng + ?Sized>(
    l: u32,
    k: u32,
    n0: Count,
    dist: &OffspringDist,
    d: u32,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<FreezeOutcome> {
    check_k(k)?;
    if d < 2 {
        return Err(Error::InvalidParameter(format!("degree must be at least 2, got {d}")));
    }
    if n0 == 0 {
        return Err(Error::InvalidParameter("n0 must be at least 1".into()));
    }
    let mut out = FreezeOutcome {
        s: n0,
        ..FreezeOutcome::default()
    };
    if l == 0 {
        out.y = n0;
        out.terminated = true;
        return Ok(out);
    }
    let k = k as usize;
    // cells[m][a], m up to l + k
    let width = l as usize + k + 1;
    let mut cells = vec![vec![0 as Count; k]; width];
    let mut next = cells.clone();
    cells[l as usize][0] = n0;
    let mut events = 0u64;
    loop {
        let mut any = false;
        for row in next.iter_mut() {
            row.fill(0);
        }
        for m in 1..width {
            for a in 0..k {
                let n = cells[m][a];
                if n == 0 {
                    continue;
                }
                events += 1;
                if events > EVENT_CAP {
                    return Err(Error::EventCap { cap: EVENT_CAP });
                }
                let kids = dist.sample_sum(rng, n, policy);
                out.approximate |= kids.approximate;
                out.s += kids.value;
                let t = binomial(rng, kids.value, 1.0 / d as f64, policy);
                out.approximate |= t.approximate;
                if m == 1 {
                    out.y += t.value;
                } else if t.value > 0 {
                    next[m - 1][a] += t.value;
                    any = true;
                }
                let rest = kids.value - t.value;
                if a + 1 == k {
                    out.f += rest;
                } else if rest > 0 {
                    next[m + 1][a + 1] += rest;
                    any = true;
                }
            }
        }
        std::mem::swap(&mut cells, &mut next);
        if !any {
            break;
        }
    }
    out.terminated = true;
    Ok(out)
}

/// Continue a finished freeze by a (new_target, 1)-freeze started from its
/// away-frozen particles. Requires that nothing was frozen at the old target
/// and that `new_target` lies in the subtree of the old target.
pub fn freeze_chain<R: Rng + ?Sized>(
    tree: &Tree,
    frozen: &FrozenConfig,
    new_target: &VertexId,
    dist: &OffspringDist,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<FreezeOutcome> {
    if frozen.at_target > 0 {
        return Err(Error::NonEmptyTarget(frozen.at_target));
    }
    if !frozen.target.is_ancestor_of(new_target) {
        return Err(Error::InvalidParameter(format!(
            "{new_target} is not in the subtree of {}",
            frozen.target
        )));
    }
    if frozen.away.is_empty() {
        return Ok(FreezeOutcome {
            terminated: true,
            ..FreezeOutcome::default()
        });
    }
    let initial: Vec<(VertexId, Count)> = frozen.away.iter().map(|(v, _, c)| (v.clone(), *c)).collect();
    freeze_tree(tree, &initial, new_target, 1, dist, rng, policy).map(|(o, _)| o)
}
