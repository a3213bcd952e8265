//! Experiment drivers.
//!
//! Every driver runs its replicas through [`run_replicas`] with the stream of
//! replica `i` derived from `(seed, i)`, so rows come back in replica order
//! and do not depend on the worker count.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::census::{census, is_slow, CensusConfig, CensusRecord, CENSUS_MAX_R};
use crate::config::{Command, ExperimentConfig, FreezeMode};
use crate::error::{Error, Result};
use crate::field::{run_cover, run_hitting_single, CoverOptions, DEFAULT_MEMORY_BUDGET};
use crate::freeze::{freeze_1d, freeze_tree};
use crate::gw::{progeny_tail_counts, survival_curve, tail_estimates, TailCounts};
use crate::harness::try_run_replicas;
use crate::offspring::OffspringDist;
use crate::pakes::{pakes_tail_with, InversionParams, PakesLaw};
use crate::report::{self, Chart, Output, Series, Table};
use crate::rng::{replica_rng, replica_seed};
use crate::sampling::{Count, SamplingPolicy};
use crate::scales::{lower_table, upper_table, ScaleTable};
use crate::stats::{c_hat, summarize, wilson, Summary, Z_95, Z_99};
use crate::tree::{Tree, VertexId};

const C_HAT_NOTE: &str = "finite-size, not the limit";

/// Replica count, seeding and sampling mode shared by all drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub seed: u64,
    pub replicas: u64,
    pub threads: usize,
    pub strict: bool,
}

impl Plan {
    pub fn new(seed: u64, replicas: u64, threads: usize) -> Self {
        Plan {
            seed,
            replicas,
            threads,
            strict: false,
        }
    }

    pub fn policy(&self) -> SamplingPolicy {
        if self.strict {
            SamplingPolicy::strict()
        } else {
            SamplingPolicy::default()
        }
    }

    fn check(&self, approximate: bool) -> Result<()> {
        if self.strict && approximate {
            Err(Error::ApproximationRefused)
        } else {
            Ok(())
        }
    }

    fn run<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, u64, &mut crate::rng::SimRng) -> Result<T> + Sync + Send,
    {
        try_run_replicas(self.replicas, self.threads, |i| {
            let mut rng = replica_rng(self.seed, i);
            f(i, replica_seed(self.seed, i), &mut rng)
        })
    }
}

impl From<&ExperimentConfig> for Plan {
    fn from(c: &ExperimentConfig) -> Self {
        Plan {
            seed: c.seed,
            replicas: c.replicas,
            threads: c.threads,
            strict: c.strict_exact,
        }
    }
}

/// Estimated frequency with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Frequency {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(successes, trials, Z_95);
        let estimate = if trials == 0 { f64::NAN } else { successes as f64 / trials as f64 };
        Frequency {
            successes,
            trials,
            estimate,
            lo,
            hi,
        }
    }
}

/// Summary statistics, or the reason there are none.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Stats {
    Ok(Summary),
    Unavailable { error: String },
}

impl Stats {
    fn of(samples: &[f64]) -> Self {
        match summarize(samples) {
            Ok(s) => Stats::Ok(s),
            Err(e) => Stats::Unavailable { error: e.to_string() },
        }
    }

    pub fn summary(&self) -> Option<&Summary> {
        match self {
            Stats::Ok(s) => Some(s),
            Stats::Unavailable { .. } => None,
        }
    }
}

fn sorted_radii(radii: &[u32]) -> Result<Vec<u32>> {
    let mut r = radii.to_vec();
    r.sort_unstable();
    r.dedup();
    if r.is_empty() {
        return Err(Error::InvalidParameter("empty radius list".into()));
    }
    Ok(r)
}

// ---------------------------------------------------------------- cover

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverRow {
    pub replica: u64,
    pub r: u32,
    pub cover_time: Option<u32>,
    pub censored: bool,
    pub extinct: bool,
    pub approx_flag: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverSummary {
    pub r: u32,
    pub replicas: u64,
    /// Covered runs of surviving processes.
    pub used: u64,
    pub censored: u64,
    pub extinct: u64,
    pub censored_fraction: f64,
    pub approximate: u64,
    /// Statistics of `T_cov(r) - r` over the used runs.
    pub excess: Stats,
    pub c_hat: Option<f64>,
    pub c_hat_note: &'static str,
    pub histogram: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    pub radii: Vec<u32>,
    pub slack: u32,
    #[serde(skip)]
    pub rows: Vec<CoverRow>,
    pub summaries: Vec<CoverSummary>,
    /// Mean excess nondecreasing in `r` over radii with statistics.
    pub trend_nondecreasing: bool,
    pub parity_violations: u64,
    pub floor_violations: u64,
    /// Replicas whose cover time decreased with `r`.
    pub monotonicity_violations: u64,
}

/// Cover times of nested balls from one coupled run per replica. Each radius
/// is censored at its own horizon `r + slack`; extinct replicas are reported
/// and excluded from the statistics.
pub fn cover_experiment(
    radii: &[u32],
    dist: &OffspringDist,
    d: u32,
    slack: u32,
    n0: Count,
    plan: &Plan,
) -> Result<CoverReport> {
    let radii = sorted_radii(radii)?;
    let r_max = *radii.last().expect("nonempty");
    let opts = CoverOptions {
        slack,
        n0,
        budget: DEFAULT_MEMORY_BUDGET,
        policy: plan.policy(),
    };
    let per = plan.run(|i, seed, rng| {
        let rec = run_cover(r_max, dist, d, &opts, rng)?;
        plan.check(rec.approximate())?;
        let rows: Vec<CoverRow> = radii
            .iter()
            .map(|&r| {
                let ct = rec.cover_time_at(r).filter(|&c| c <= r + slack);
                CoverRow {
                    replica: i,
                    r,
                    cover_time: ct,
                    censored: ct.is_none() && !rec.extinct(),
                    extinct: rec.extinct(),
                    approx_flag: rec.approximate(),
                    seed,
                }
            })
            .collect();
        Ok((rows, rec.parity_violations() as u64, rec.floor_violations() as u64))
    })?;
    let mut rows = Vec::with_capacity(per.len() * radii.len());
    let (mut parity, mut floors, mut mono) = (0, 0, 0);
    for (rs, p, f) in per {
        parity += p;
        floors += f;
        let times: Vec<u32> = rs.iter().map_while(|row| row.cover_time).collect();
        mono += u64::from(times.windows(2).any(|w| w[1] < w[0]));
        rows.extend(rs);
    }
    let summaries: Vec<CoverSummary> = radii
        .iter()
        .map(|&r| {
            let of_r: Vec<&CoverRow> = rows.iter().filter(|row| row.r == r).collect();
            let used: Vec<u32> = of_r
                .iter()
                .filter(|row| !row.extinct)
                .filter_map(|row| row.cover_time)
                .collect();
            let censored = of_r.iter().filter(|row| row.censored).count() as u64;
            let extinct = of_r.iter().filter(|row| row.extinct).count() as u64;
            let excess: Vec<f64> = used.iter().map(|&c| c as f64 - r as f64).collect();
            let stats = Stats::of(&excess);
            let c = stats
                .summary()
                .and_then(|s| c_hat(s.mean + r as f64, r as f64).ok());
            let survivors = of_r.len() as u64 - extinct;
            CoverSummary {
                r,
                replicas: of_r.len() as u64,
                used: used.len() as u64,
                censored,
                extinct,
                censored_fraction: if survivors == 0 { 0.0 } else { censored as f64 / survivors as f64 },
                approximate: of_r.iter().filter(|row| row.approx_flag).count() as u64,
                excess: stats,
                c_hat: c,
                c_hat_note: C_HAT_NOTE,
                histogram: crate::stats::histogram(&used),
            }
        })
        .collect();
    let means: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.excess.summary().map(|x| x.mean))
        .collect();
    Ok(CoverReport {
        radii,
        slack,
        rows,
        trend_nondecreasing: means.windows(2).all(|w| w[1] >= w[0]),
        summaries,
        parity_violations: parity,
        floor_violations: floors,
        monotonicity_violations: mono,
    })
}

// ---------------------------------------------------------------- hit

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HitRow {
    pub replica: u64,
    #[serde(rename = "L")]
    pub l: u32,
    pub k: u32,
    pub hit_time: Option<u32>,
    pub censored: bool,
    pub approx_flag: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitReport {
    #[serde(rename = "L")]
    pub l: u32,
    pub k: u32,
    #[serde(skip)]
    pub rows: Vec<HitRow>,
    /// `P(H <= L + 2k)`.
    pub hit_by_band: Frequency,
    pub hit_time: Stats,
    pub histogram: BTreeMap<u32, u64>,
    pub parity_violations: u64,
    pub floor_violations: u64,
}

/// Hitting time of a vertex at distance `l`, exact up to `l + 2k`.
pub fn hit_experiment(l: u32, k: u32, dist: &OffspringDist, d: u32, plan: &Plan) -> Result<HitReport> {
    let policy = plan.policy();
    let rows = plan.run(|i, seed, rng| {
        let s = run_hitting_single(l, k, dist, d, rng, &policy)?;
        plan.check(s.approximate)?;
        Ok(HitRow {
            replica: i,
            l,
            k,
            hit_time: s.time,
            censored: s.time.is_none(),
            approx_flag: s.approximate,
            seed,
        })
    })?;
    let times: Vec<u32> = rows.iter().filter_map(|r| r.hit_time).collect();
    let samples: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    Ok(HitReport {
        l,
        k,
        hit_by_band: Frequency::new(times.len() as u64, rows.len() as u64),
        hit_time: Stats::of(&samples),
        histogram: crate::stats::histogram(&times),
        parity_violations: times.iter().filter(|&&t| t % 2 != l % 2).count() as u64,
        floor_violations: times.iter().filter(|&&t| t < l).count() as u64,
        rows,
    })
}

// ---------------------------------------------------------------- freeze

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FreezeRow {
    pub replica: u64,
    #[serde(rename = "L")]
    pub l: u32,
    pub k: u32,
    pub y: Count,
    pub f: Count,
    pub s: Count,
    pub terminated: bool,
    pub approx_flag: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreezeReport {
    pub mode: FreezeMode,
    #[serde(rename = "L")]
    pub l: u32,
    pub k: u32,
    pub n0: Count,
    #[serde(skip)]
    pub rows: Vec<FreezeRow>,
    pub y: Stats,
    pub f: Stats,
    pub s: Stats,
    /// `(mean Y - n0) / SE`; the expectation of `Y` is the initial count.
    pub y_z_score: Option<f64>,
    pub y_zero: Frequency,
    pub all_terminated: bool,
}

/// (x,k)-freeze of `n0` particles started at distance `l` from the target.
pub fn freeze_experiment(
    mode: FreezeMode,
    l: u32,
    k: u32,
    n0: Count,
    dist: &OffspringDist,
    d: u32,
    plan: &Plan,
) -> Result<FreezeReport> {
    let policy = plan.policy();
    let tree = Tree::new(d)?;
    let target = tree.vertex_at(l, 0);
    let initial = [(VertexId::root(), n0)];
    let rows = plan.run(|i, seed, rng| {
        let out = match mode {
            FreezeMode::Projected => freeze_1d(l, k, n0, dist, d, rng, &policy)?,
            FreezeMode::Tree => freeze_tree(&tree, &initial, &target, k, dist, rng, &policy)?.0,
        };
        plan.check(out.approximate)?;
        Ok(FreezeRow {
            replica: i,
            l,
            k,
            y: out.y,
            f: out.f,
            s: out.s,
            terminated: out.terminated,
            approx_flag: out.approximate,
            seed,
        })
    })?;
    let col = |g: fn(&FreezeRow) -> Count| rows.iter().map(|r| g(r) as f64).collect::<Vec<f64>>();
    let y = Stats::of(&col(|r| r.y));
    let y_z_score = y
        .summary()
        .filter(|s| s.std_error > 0.0)
        .map(|s| (s.mean - n0 as f64) / s.std_error);
    Ok(FreezeReport {
        mode,
        l,
        k,
        n0,
        y,
        f: Stats::of(&col(|r| r.f)),
        s: Stats::of(&col(|r| r.s)),
        y_z_score,
        y_zero: Frequency::new(rows.iter().filter(|r| r.y == 0).count() as u64, rows.len() as u64),
        all_terminated: rows.iter().all(|r| r.terminated),
        rows,
    })
}

// ---------------------------------------------------------------- census

fn boundary_hits(rec: &CensusRecord, r: u32, zi: usize) -> Option<u32> {
    rec.hitting.hit_time(r, zi)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub replica: u64,
    pub r: u32,
    pub k: u32,
    /// Boundary vertices with `Y^(k) = 0`.
    pub unreached: u64,
    /// Smallest `F^(k)` among them.
    pub min_f_unreached: Option<Count>,
    pub cover_time: Option<u32>,
    pub censored: bool,
    /// Unreached boundary vertices hit before `r + 2k`.
    pub z_violations: u64,
    /// Some unreached vertex but `T_cov(r) < r + 2k`.
    pub violation: bool,
    pub tracked: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusSummary {
    pub r: u32,
    pub k: u32,
    pub unreached: Frequency,
    pub violations: u64,
    pub z_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub radii: Vec<u32>,
    pub k_max: u32,
    #[serde(skip)]
    pub rows: Vec<CensusRow>,
    pub summaries: Vec<CensusSummary>,
    pub parity_violations: u64,
    pub floor_violations: u64,
}

fn census_config(radii: Vec<u32>, k_max: u32, n0: Count, slack: u32, plan: &Plan) -> CensusConfig {
    CensusConfig {
        n0,
        slack,
        policy: plan.policy(),
        ..CensusConfig::new(radii, k_max)
    }
}

/// Per-vertex freeze counts for every boundary vertex of each radius.
pub fn census_experiment(
    radii: &[u32],
    k_max: u32,
    dist: &OffspringDist,
    d: u32,
    slack: u32,
    n0: Count,
    plan: &Plan,
) -> Result<CensusReport> {
    let radii = sorted_radii(radii)?;
    let cfg = census_config(radii.clone(), k_max, n0, slack, plan);
    let per = plan.run(|i, seed, rng| {
        let rec = census(&cfg, dist, d, rng)?;
        plan.check(rec.hitting.approximate())?;
        let mut rows = Vec::new();
        for rc in &rec.radii {
            let r = rc.r;
            let cover = rec.hitting.cover_time_at(r);
            for k in 1..=k_max {
                let kk = k as usize - 1;
                let mut unreached = 0u64;
                let mut min_f: Option<Count> = None;
                let mut z_violations = 0u64;
                for (zi, z) in rc.zs.iter().enumerate() {
                    if z.y[kk] == 0 {
                        unreached += 1;
                        min_f = Some(min_f.map_or(z.f[kk], |m| m.min(z.f[kk])));
                        if boundary_hits(&rec, r, zi).is_some_and(|h| h < r + 2 * k) {
                            z_violations += 1;
                        }
                    }
                }
                rows.push(CensusRow {
                    replica: i,
                    r,
                    k,
                    unreached,
                    min_f_unreached: min_f,
                    cover_time: cover,
                    censored: cover.is_none() && !rec.hitting.extinct(),
                    z_violations,
                    violation: unreached > 0 && cover.is_some_and(|c| c < r + 2 * k),
                    tracked: rec.tracked as u64,
                    seed,
                });
            }
        }
        Ok((
            rows,
            rec.hitting.parity_violations() as u64,
            rec.hitting.floor_violations() as u64,
        ))
    })?;
    let mut rows = Vec::new();
    let (mut parity, mut floors) = (0, 0);
    for (rs, p, f) in per {
        rows.extend(rs);
        parity += p;
        floors += f;
    }
    let mut summaries = Vec::new();
    for &r in &radii {
        for k in 1..=k_max {
            let sel: Vec<&CensusRow> = rows.iter().filter(|x| x.r == r && x.k == k).collect();
            summaries.push(CensusSummary {
                r,
                k,
                unreached: Frequency::new(
                    sel.iter().filter(|x| x.unreached > 0).count() as u64,
                    sel.len() as u64,
                ),
                violations: sel.iter().filter(|x| x.violation).count() as u64,
                z_violations: sel.iter().map(|x| x.z_violations).sum(),
            });
        }
    }
    Ok(CensusReport {
        radii,
        k_max,
        rows,
        summaries,
        parity_violations: parity,
        floor_violations: floors,
    })
}

// ---------------------------------------------------------------- lower

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerRow {
    pub replica: u64,
    pub r: u32,
    pub k: u32,
    pub n_k: f64,
    /// Boundary vertices with `Y^(k) = 0` and `F^(k) <= n_k`.
    pub slow_count: u64,
    pub slow: bool,
    pub cover_time: Option<u32>,
    pub censored: bool,
    /// Slow vertex present but `T_cov(r) < r + 2k`.
    pub violation: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerSummary {
    pub r: u32,
    pub k: u32,
    pub n_k: f64,
    /// `r = floor(R_k)`.
    pub scale_radius: bool,
    pub slow: Frequency,
    pub violations: u64,
}

/// `P(A_k | A_{k-1})` with `A_j` evaluated on `∂B(floor(R_j))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Persistence {
    pub k: u32,
    pub r: u32,
    pub r_prev: u32,
    pub conditional: Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerReport {
    pub table: ScaleTable,
    pub radii: Vec<u32>,
    /// Requested or scale radii above the census limit.
    pub dropped_radii: Vec<u32>,
    #[serde(skip)]
    pub rows: Vec<LowerRow>,
    pub summaries: Vec<LowerSummary>,
    pub persistence: Vec<Persistence>,
    pub violations: u64,
    pub note: &'static str,
}

/// Frequencies of slow boundary vertices on the requested radii and on the
/// scale radii `floor(R_k)` that fit under the census limit.
#[allow(clippy::too_many_arguments)]
pub fn lower_experiment(
    radii: &[u32],
    k_max: u32,
    m: f64,
    delta: f64,
    dist: &OffspringDist,
    d: u32,
    slack: u32,
    plan: &Plan,
) -> Result<LowerReport> {
    let table = lower_table(m, delta, k_max)?;
    let scale_r: Vec<Option<u32>> = (0..=k_max)
        .map(|k| table.row(k).and_then(|row| row.shell_radius()))
        .collect();
    let mut wanted: Vec<u32> = radii.to_vec();
    wanted.extend(scale_r.iter().skip(1).flatten().copied().filter(|&r| r >= 1));
    let mut dropped: Vec<u32> = wanted.iter().copied().filter(|&r| r > CENSUS_MAX_R).collect();
    dropped.extend(scale_r.iter().skip(1).filter(|r| r.is_none()).map(|_| u32::MAX));
    dropped.sort_unstable();
    dropped.dedup();
    wanted.retain(|&r| r <= CENSUS_MAX_R);
    let radii = sorted_radii(&wanted)?;
    let n_k: Vec<f64> = (0..=k_max).map(|k| table.row(k).map_or(f64::INFINITY, |row| row.n)).collect();
    let cfg = census_config(radii.clone(), k_max, 1, slack, plan);
    let per = plan.run(|i, seed, rng| {
        let rec = census(&cfg, dist, d, rng)?;
        plan.check(rec.hitting.approximate())?;
        let mut rows = Vec::new();
        for rc in &rec.radii {
            let r = rc.r;
            let cover = rec.hitting.cover_time_at(r);
            for k in 0..=k_max {
                let nk = n_k[k as usize];
                let slow_count = if k == 0 {
                    rc.zs.len() as u64
                } else {
                    rc.zs.iter().filter(|z| is_slow(z, k, nk)).count() as u64
                };
                let slow = slow_count > 0;
                rows.push(LowerRow {
                    replica: i,
                    r,
                    k,
                    n_k: nk,
                    slow_count,
                    slow,
                    cover_time: cover,
                    censored: cover.is_none() && !rec.hitting.extinct(),
                    violation: slow && cover.is_some_and(|c| c < r + 2 * k),
                    seed,
                });
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<LowerRow> = per.into_iter().flatten().collect();
    let find = |rep: u64, r: u32, k: u32| {
        rows.iter()
            .find(|x| x.replica == rep && x.r == r && x.k == k)
            .map(|x| x.slow)
    };
    let mut summaries = Vec::new();
    for &r in &radii {
        for k in 0..=k_max {
            let sel: Vec<&LowerRow> = rows.iter().filter(|x| x.r == r && x.k == k).collect();
            summaries.push(LowerSummary {
                r,
                k,
                n_k: n_k[k as usize],
                scale_radius: scale_r[k as usize] == Some(r),
                slow: Frequency::new(sel.iter().filter(|x| x.slow).count() as u64, sel.len() as u64),
                violations: sel.iter().filter(|x| x.violation).count() as u64,
            });
        }
    }
    let mut persistence = Vec::new();
    for k in 1..=k_max {
        let (Some(r), Some(r_prev)) = (scale_r[k as usize], scale_r[k as usize - 1]) else {
            continue;
        };
        if r == 0 || r > CENSUS_MAX_R {
            continue;
        }
        let (mut prev, mut both) = (0u64, 0u64);
        for rep in 0..plan.replicas {
            let a_prev = if k == 1 { true } else { find(rep, r_prev, k - 1).unwrap_or(false) };
            if a_prev {
                prev += 1;
                both += u64::from(find(rep, r, k).unwrap_or(false));
            }
        }
        persistence.push(Persistence {
            k,
            r,
            r_prev,
            conditional: Frequency::new(both, prev),
        });
    }
    Ok(LowerReport {
        table,
        radii,
        dropped_radii: dropped,
        violations: rows.iter().filter(|x| x.violation).count() as u64,
        rows,
        summaries,
        persistence,
        note: "artifact-scale radii, far below the asymptotic regime of the scales",
    })
}

// ---------------------------------------------------------------- upper

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperRow {
    pub replica: u64,
    pub k: u32,
    pub r: u32,
    pub n_k: f64,
    /// `min_z F^(k)_z + Y^(k)_z` over `∂B(r)`.
    pub min_frozen: Count,
    pub b_k: bool,
    /// `B_1, ..., B_k` all hold.
    pub all_b: bool,
    /// Every `z` on `∂B(r)` is hit by `r + 2k`.
    pub all_hit: bool,
    pub cover_time: Option<u32>,
    /// `all_b` and `all_hit` but `T_cov(r) > r + 2k`.
    pub violation: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperSummary {
    pub k: u32,
    pub r: u32,
    pub n_k: f64,
    pub b_k: Frequency,
    /// `P(B_k^c ∩ B_{k-1})`.
    pub failure: Frequency,
    /// `d (d-1)^(r-1)`, the number of boundary vertices.
    pub prefactor: f64,
    /// `delta` solving `prefactor * exp(-delta N_{k-1}^(1/2) / a) = failure`.
    pub delta_hat: Option<f64>,
    /// Set when the failure count is zero and the upper Wilson end was used,
    /// making `delta_hat` a lower bound.
    pub delta_hat_is_lower_bound: bool,
    /// `P(all boundary vertices hit by r + 2k | B_1, ..., B_k)`.
    pub hit_given_b: Frequency,
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperReport {
    pub table: ScaleTable,
    pub n0: Count,
    pub k_max: u32,
    /// Largest `k` requested before truncation.
    pub requested_k_max: u32,
    pub truncation: Option<String>,
    #[serde(skip)]
    pub rows: Vec<UpperRow>,
    pub summaries: Vec<UpperSummary>,
    pub violations: u64,
    pub note: &'static str,
}

/// Events `B_k` on the shells `∂B(floor(R_k))` started from `n0` particles at
/// the root, for the `k` where the scale requirement holds and the radius
/// fits under the census limit.
#[allow(clippy::too_many_arguments)]
pub fn upper_experiment(
    k_max: u32,
    a: f64,
    delta: f64,
    n0: Count,
    dist: &OffspringDist,
    d: u32,
    slack: u32,
    plan: &Plan,
) -> Result<UpperReport> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let table = upper_table(a, delta, k_max)?;
    let mut k_eff = 0;
    let mut truncation = None;
    for row in &table.rows {
        let why = if row.condition == Some(false) {
            Some("scale requirement fails")
        } else if row.overflow || row.shell_radius().is_none_or(|r| r > CENSUS_MAX_R) {
            Some("shell radius above the census limit")
        } else {
            None
        };
        if let Some(why) = why {
            truncation = Some(format!("stopped at k = {}: {why}", row.k));
            break;
        }
        k_eff = row.k;
    }
    if k_eff == 0 {
        return Err(Error::InvalidParameter(format!(
            "no feasible k: {}",
            truncation.unwrap_or_default()
        )));
    }
    let rows_k: Vec<(u32, u32, f64)> = (1..=k_eff)
        .map(|k| {
            let row = table.row(k).expect("tabulated");
            (k, row.shell_radius().expect("checked"), row.n)
        })
        .collect();
    let radii = sorted_radii(&rows_k.iter().map(|x| x.1).collect::<Vec<_>>())?;
    let cfg = census_config(radii, k_eff, n0, slack, plan);
    let per = plan.run(|i, seed, rng| {
        let rec = census(&cfg, dist, d, rng)?;
        plan.check(rec.hitting.approximate())?;
        let mut all_b = true;
        let mut rows = Vec::new();
        for &(k, r, n_k) in &rows_k {
            let rc = rec.radius(r).expect("census radius");
            let kk = k as usize - 1;
            let min_frozen = rc.zs.iter().map(|z| z.f[kk] + z.y[kk]).min().unwrap_or(0);
            let b_k = (min_frozen as f64) >= n_k;
            all_b &= b_k;
            let all_hit = (0..rc.zs.len()).all(|zi| rec.hitting.hit_time(r, zi).is_some_and(|h| h <= r + 2 * k));
            let cover = rec.hitting.cover_time_at(r);
            rows.push(UpperRow {
                replica: i,
                k,
                r,
                n_k,
                min_frozen,
                b_k,
                all_b,
                all_hit,
                cover_time: cover,
                violation: all_b && all_hit && !cover.is_some_and(|c| c <= r + 2 * k),
                seed,
            });
        }
        Ok(rows)
    })?;
    let rows: Vec<UpperRow> = per.into_iter().flatten().collect();
    let n_reps = plan.replicas;
    let mut summaries = Vec::new();
    for &(k, r, n_k) in &rows_k {
        let sel: Vec<&UpperRow> = rows.iter().filter(|x| x.k == k).collect();
        let prev_ok = |x: &UpperRow| {
            k == 1
                || rows
                    .iter()
                    .find(|p| p.replica == x.replica && p.k == k - 1)
                    .is_some_and(|p| p.all_b)
        };
        let fail = sel.iter().filter(|x| !x.b_k && prev_ok(x)).count() as u64;
        let failure = Frequency::new(fail, n_reps);
        let prefactor = if r == 0 { 1.0 } else { d as f64 * (d as f64 - 1.0).powi(r as i32 - 1) };
        let (delta_hat, lower_bound) = if k >= 2 {
            let n_prev = table.row(k - 1).expect("tabulated").n;
            let (p, lb) = if fail > 0 { (failure.estimate, false) } else { (failure.hi, true) };
            let dh = a * (prefactor / p).ln() / n_prev.sqrt();
            (dh.is_finite().then_some(dh), lb)
        } else {
            (None, false)
        };
        let given: Vec<&&UpperRow> = sel.iter().filter(|x| x.all_b).collect();
        summaries.push(UpperSummary {
            k,
            r,
            n_k,
            b_k: Frequency::new(sel.iter().filter(|x| x.b_k).count() as u64, n_reps),
            failure,
            prefactor,
            delta_hat,
            delta_hat_is_lower_bound: lower_bound,
            hit_given_b: Frequency::new(given.iter().filter(|x| x.all_hit).count() as u64, given.len() as u64),
            violations: sel.iter().filter(|x| x.violation).count() as u64,
        });
    }
    Ok(UpperReport {
        table,
        n0,
        k_max: k_eff,
        requested_k_max: k_max,
        truncation,
        violations: rows.iter().filter(|x| x.violation).count() as u64,
        rows,
        summaries,
        note: "artifact-scale constants; delta_hat is fitted, not the constant of the bound",
    })
}

// ---------------------------------------------------------------- gw-diag

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalRow {
    pub generation: u32,
    pub exact: f64,
    /// `n q_n`, tending to `2 / sigma^2`.
    pub scaled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub gamma: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub limit: f64,
    pub accepted: u64,
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwDiagReport {
    pub critical: String,
    pub sigma2: f64,
    pub n: u32,
    pub kolmogorov_limit: f64,
    #[serde(skip)]
    pub survival: Vec<SurvivalRow>,
    pub exact_survival: f64,
    pub mc_survival: Frequency,
    /// 99% Wilson interval of the simulated survival frequency.
    pub mc_wilson99: (f64, f64),
    pub exact_inside_wilson99: bool,
    pub tails: Vec<TailRow>,
    pub tail_note: Option<String>,
    pub approximate: bool,
}

/// Survival and progeny diagnostics of the critical projection `thin(dist, 1/d)`.
pub fn gw_diag_experiment(n: u32, gammas: &[f64], dist: &OffspringDist, d: u32, plan: &Plan) -> Result<GwDiagReport> {
    let crit = dist.thin_by_degree(d)?;
    let sigma2 = crit.variance();
    let curve = survival_curve(&crit, n as u64)?;
    let survival: Vec<SurvivalRow> = curve
        .iter()
        .enumerate()
        .map(|(g, &q)| SurvivalRow {
            generation: g as u32,
            exact: q,
            scaled: g as f64 * q,
        })
        .collect();
    let policy = plan.policy();
    let per = plan.run(|_, _, rng| {
        let c = progeny_tail_counts(&crit, n, gammas, 1, rng, &policy)?;
        plan.check(c.approximate)?;
        Ok(c)
    })?;
    let mut counts = TailCounts {
        conditional_hits: vec![0; gammas.len()],
        unconditional_hits: vec![0; gammas.len()],
        ..TailCounts::default()
    };
    for c in &per {
        counts.merge(c);
    }
    let exact = curve[n as usize];
    let wilson99 = wilson(counts.accepted, counts.attempts, Z_99);
    let (tails, tail_note) = match tail_estimates(&counts, n, gammas) {
        Ok(est) => {
            let params = InversionParams::default();
            let rows = est
                .iter()
                .map(|e| {
                    Ok(TailRow {
                        gamma: e.gamma,
                        estimate: e.estimate,
                        std_error: e.std_error,
                        limit: pakes_tail_with(e.gamma, sigma2, &params)?.value,
                        accepted: e.accepted,
                        attempts: e.attempts,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, None)
        }
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    Ok(GwDiagReport {
        critical: crit.spec_string(),
        sigma2,
        n,
        kolmogorov_limit: 2.0 / sigma2,
        survival,
        exact_survival: exact,
        mc_survival: Frequency::new(counts.accepted, counts.attempts),
        mc_wilson99: wilson99,
        exact_inside_wilson99: wilson99.0 <= exact && exact <= wilson99.1,
        tails,
        tail_note,
        approximate: counts.approximate,
    })
}

// ---------------------------------------------------------------- pakes

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PakesRow {
    pub gamma: f64,
    pub tail: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PakesReport {
    pub sigma2: f64,
    #[serde(skip)]
    pub rows: Vec<PakesRow>,
    pub mean: f64,
    pub mean_target: f64,
    pub second_moment: f64,
    pub second_moment_target: f64,
}

/// Tail `1 - F(gamma)` of the limit law with variance `sigma2`.
pub fn pakes_experiment(sigma2: f64, gammas: &[f64]) -> Result<PakesReport> {
    let law = PakesLaw::new(sigma2)?;
    let rows = gammas
        .iter()
        .map(|&g| {
            let t = pakes_tail_with(g, sigma2, &law.params)?;
            Ok(PakesRow {
                gamma: g,
                tail: t.value,
                error_estimate: t.error_estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PakesReport {
        sigma2,
        rows,
        mean: law.mean()?,
        mean_target: sigma2 / 3.0,
        second_moment: law.second_moment()?,
        second_moment_target: 7.0 * sigma2 * sigma2 / 45.0,
    })
}

// ---------------------------------------------------------------- dispatch

fn n0_or(c: &ExperimentConfig, default: u64) -> Count {
    c.n0.unwrap_or(default) as Count
}

/// Run the configured command and collect its tables, summary and charts.
pub fn run(c: &ExperimentConfig) -> Result<Output> {
    let plan = Plan::from(c);
    match c.command {
        Command::Cover => {
            let rep = cover_experiment(&c.r, &c.offspring()?, c.d, c.slack, n0_or(c, 1), &plan)?;
            let pts = |f: fn(f64) -> f64| -> Vec<(f64, f64)> {
                rep.summaries
                    .iter()
                    .filter(|s| f(s.r as f64).is_finite())
                    .filter_map(|s| s.excess.summary().map(|x| (f(s.r as f64), x.mean)))
                    .collect()
            };
            let by_r = pts(|r| r);
            let by_loglog = pts(|r| if r > std::f64::consts::E { r.ln().ln() } else { f64::NAN });
            Ok(Output {
                tables: vec![Table::new("cover", &rep.rows)?],
                summary: serde_json::to_value(&rep).map_err(json_err)?,
                charts: vec![
                    Chart {
                        name: "excess_vs_r".into(),
                        svg: report::line_chart("mean cover time excess", "r", "mean T_cov(r) - r", &[Series::new("excess", by_r)]),
                    },
                    Chart {
                        name: "excess_vs_loglog".into(),
                        svg: report::line_chart(
                            "mean cover time excess",
                            "ln ln r",
                            "mean T_cov(r) - r",
                            &[Series::new("excess", by_loglog)],
                        ),
                    },
                ],
            })
        }
        Command::Hit => {
            let rep = hit_experiment(c.l, c.k, &c.offspring()?, c.d, &plan)?;
            Output::simple("hit", &rep.rows, &rep)
        }
        Command::Freeze => {
            let rep = freeze_experiment(c.mode, c.l, c.k, n0_or(c, 1), &c.offspring()?, c.d, &plan)?;
            Output::simple("freeze", &rep.rows, &rep)
        }
        Command::Census => {
            let rep = census_experiment(&c.r, c.k, &c.offspring()?, c.d, c.slack, n0_or(c, 1), &plan)?;
            Output::simple("census", &rep.rows, &rep)
        }
        Command::GwDiag => {
            let rep = gw_diag_experiment(c.n, &c.gamma, &c.offspring()?, c.d, &plan)?;
            let curve: Vec<(f64, f64)> = rep
                .survival
                .iter()
                .skip(1)
                .map(|s| (s.generation as f64, s.scaled))
                .collect();
            let limit: Vec<(f64, f64)> = curve.iter().map(|&(g, _)| (g, rep.kolmogorov_limit)).collect();
            Ok(Output {
                tables: vec![Table::new("gw_survival", &rep.survival)?, Table::new("gw_tail", &rep.tails)?],
                summary: serde_json::to_value(&rep).map_err(json_err)?,
                charts: vec![Chart {
                    name: "survival_scaled".into(),
                    svg: report::line_chart(
                        "scaled survival probability",
                        "n",
                        "n P(Z_n > 0)",
                        &[Series::new("exact", curve), Series::new("2 / sigma^2", limit)],
                    ),
                }],
            })
        }
        Command::Pakes => {
            let sigma2 = c.offspring()?.thin_by_degree(c.d)?.variance();
            let rep = pakes_experiment(sigma2, &c.gamma)?;
            Output::simple("pakes", &rep.rows, &rep)
        }
        Command::Scales => {
            let lower = lower_table(c.m, c.delta.unwrap_or(0.1), c.k)?;
            let upper = upper_table(c.a, c.delta.unwrap_or(1.0), c.k)?;
            let summary = serde_json::json!({
                "lower": lower,
                "upper": upper,
                "upper_condition_holds_through": upper.condition_holds_through(),
                "lower_monotone": lower.is_monotone(),
                "upper_monotone": upper.is_monotone(),
            });
            Ok(Output {
                tables: vec![
                    Table::new("scales_lower", &lower.rows)?,
                    Table::new("scales_upper", &upper.rows)?,
                ],
                summary,
                charts: Vec::new(),
            })
        }
        Command::Lower => {
            let rep = lower_experiment(&c.r, c.k, c.m, c.delta_or_default(), &c.offspring()?, c.d, c.slack, &plan)?;
            Output::simple("lower", &rep.rows, &rep)
        }
        Command::Upper => {
            let delta = c.delta_or_default();
            let n1 = upper_table(c.a, delta, 1)?.rows[0].n;
            let default_n0 = if n1 < u32::MAX as f64 { n1.ceil() as u64 } else { u64::from(u32::MAX) };
            let rep = upper_experiment(c.k.max(2), c.a, delta, n0_or(c, default_n0), &c.offspring()?, c.d, c.slack, &plan)?;
            Output::simple("upper", &rep.rows, &rep)
        }
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(format!("json: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(d: u32) -> OffspringDist {
        OffspringDist::point_mass(d as u64)
    }

    #[test]
    fn cover_rows_and_censoring() {
        let plan = Plan::new(3, 20, 1);
        let rep = cover_experiment(&[4, 2], &det(3), 3, 60, 1, &plan).unwrap();
        assert_eq!(rep.radii, vec![2, 4]);
        assert_eq!(rep.rows.len(), 40);
        assert_eq!(rep.rows[0].r, 2);
        assert_eq!(rep.rows[1].r, 4);
        assert!(rep.rows.iter().all(|r| r.cover_time.is_some() && !r.censored && !r.extinct));
        assert_eq!(rep.parity_violations, 0);
        assert_eq!(rep.floor_violations, 0);
        assert_eq!(rep.monotonicity_violations, 0);
        // tiny slack censors
        let rep = cover_experiment(&[4], &det(3), 3, 0, 1, &plan).unwrap();
        assert!(rep.rows.iter().all(|r| r.censored));
        assert!(rep.summaries[0].excess.summary().is_none());
    }

    #[test]
    fn extinct_runs_are_reported() {
        let dist = OffspringDist::table(&[(0, 0.5), (6, 0.5)]).unwrap();
        let rep = cover_experiment(&[3], &dist, 3, 60, 1, &Plan::new(1, 200, 1)).unwrap();
        let s = &rep.summaries[0];
        assert!(s.extinct >= 80, "{}", s.extinct);
        assert_eq!(s.used + s.censored + s.extinct, 200);
    }

    #[test]
    fn thread_count_does_not_change_rows() {
        let a = census_experiment(&[3], 2, &det(3), 3, 60, 1, &Plan::new(9, 12, 1)).unwrap();
        let b = census_experiment(&[3], 2, &det(3), 3, 60, 1, &Plan::new(9, 12, 3)).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn freeze_mean_y_matches_initial_count() {
        let rep = freeze_experiment(FreezeMode::Projected, 4, 1, 3, &det(3), 3, &Plan::new(5, 20_000, 1)).unwrap();
        assert!(rep.y_z_score.unwrap().abs() < 4.0);
        assert!(rep.all_terminated);
        let tree = freeze_experiment(FreezeMode::Tree, 2, 1, 1, &det(3), 3, &Plan::new(5, 50, 1)).unwrap();
        assert_eq!(tree.rows.len(), 50);
    }

    #[test]
    fn hit_parity() {
        let rep = hit_experiment(5, 2, &det(3), 3, &Plan::new(2, 500, 1)).unwrap();
        assert_eq!(rep.parity_violations, 0);
        assert_eq!(rep.floor_violations, 0);
        assert!(rep.hit_by_band.estimate > 0.0);
    }

    #[test]
    fn census_implication_holds() {
        let rep = census_experiment(&[2, 4], 2, &det(3), 3, 60, 1, &Plan::new(4, 100, 1)).unwrap();
        assert!(rep.summaries.iter().all(|s| s.violations == 0 && s.z_violations == 0));
    }

    #[test]
    fn lower_uses_scale_radii() {
        let rep = lower_experiment(&[2, 12], 3, 2.0, 0.1, &det(3), 3, 60, &Plan::new(8, 30, 1)).unwrap();
        assert_eq!(rep.radii, vec![1, 2, 3, 6]);
        assert_eq!(rep.dropped_radii, vec![12]);
        for s in rep.summaries.iter().filter(|s| s.k == 0) {
            assert_eq!(s.slow.estimate, 1.0);
        }
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.persistence.len(), 3);
        assert_eq!(rep.persistence[0].conditional.trials, 30);
    }

    #[test]
    fn upper_first_scale_is_sure() {
        let rep = upper_experiment(4, 0.1, 1.0, 449, &det(3), 3, 60, &Plan::new(6, 10, 1)).unwrap();
        assert_eq!(rep.k_max, 2);
        assert!(rep.truncation.is_some());
        assert_eq!(rep.summaries[0].r, 0);
        assert_eq!(rep.summaries[0].b_k.estimate, 1.0);
        assert_eq!(rep.summaries[1].r, 2);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn strict_mode_refuses_approximation() {
        let mut plan = Plan::new(1, 1, 1);
        plan.strict = true;
        let ok = freeze_experiment(FreezeMode::Projected, 2, 1, 1, &det(3), 3, &plan);
        assert!(ok.is_ok());
        let big = freeze_experiment(FreezeMode::Projected, 2, 1, u64::MAX as Count * 4, &det(3), 3, &plan);
        assert!(matches!(big, Err(Error::ApproximationRefused)), "{big:?}");
    }

    #[test]
    fn pakes_report_moments() {
        let rep = pakes_experiment(2.0, &[0.5, 1.0]).unwrap();
        assert!((rep.mean - rep.mean_target).abs() < 1e-5);
        assert!(rep.rows[0].tail > rep.rows[1].tail);
    }

    #[test]
    fn gw_diag_small() {
        let rep = gw_diag_experiment(20, &[0.5], &det(3), 3, &Plan::new(1, 2000, 1)).unwrap();
        assert_eq!(rep.survival.len(), 21);
        assert!((rep.survival[0].exact - 1.0).abs() < 1e-15);
        assert!(rep.tails.len() == 1 || rep.tail_note.is_some());
    }
}
