//! Confidence sets for the attributable effects, obtained by inverting a
//! testing procedure over the integer lattice of net effect counts.
//!
//! Every adjusted table depends on the effect triple only through the
//! adjusted exposed cells `(P', N', C')`, and `P' + N' + C' = n_PNC1` is
//! fixed. A lattice point's fate is therefore a function of `(P', C')`
//! alone, which is what the scan caches.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU8, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_tests::TwoByTwoTable;
use crate::procedures::{Level, Method2Variant, Procedure, ProcedureKind};
use crate::study_model::{
    adjusted_exposed_cells, adjusted_tables, compute_pvalues, ComparisonTables, NetEffectCounts,
    PValueSet, StudyCounts,
};

pub const DEFAULT_BUDGET: u64 = 100_000_000;
pub const DEFAULT_MEMBER_CAP: usize = 1_000_000;

/// Largest `n_PNC1` for which the `(P', C')` cache is a dense grid.
const DENSE_CACHE_LIMIT: u64 = 8191;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Member,
    NonMember,
    /// The triple lies outside the parameter space.
    Infeasible,
}

/// Which rejections exclude a lattice point from the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionRule {
    /// Excluded only when all three comparisons reject (product rule).
    #[default]
    AllReject,
    /// Extension: excluded as soon as any comparison rejects.
    AnyReject,
}

impl ExclusionRule {
    fn excludes(self, flags: [bool; 3]) -> bool {
        match self {
            ExclusionRule::AllReject => flags.iter().all(|&f| f),
            ExclusionRule::AnyReject => flags.iter().any(|&f| f),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConfsetOptions {
    pub alpha: Level,
    pub procedure: Procedure,
    pub rule: ExclusionRule,
    pub stride: u64,
    pub emit_members: bool,
    pub member_cap: usize,
    pub budget: u64,
}

impl ConfsetOptions {
    pub fn new(alpha: Level, procedure: Procedure) -> Self {
        Self {
            alpha,
            procedure,
            rule: ExclusionRule::AllReject,
            stride: 1,
            emit_members: false,
            member_cap: DEFAULT_MEMBER_CAP,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Membership of a single effect triple under the product rule.
pub fn confset_membership(
    counts: &StudyCounts,
    effects: &NetEffectCounts,
    alpha: Level,
    procedure: Procedure,
) -> Membership {
    membership_with_rule(counts, effects, alpha, procedure, ExclusionRule::AllReject)
}

pub fn membership_with_rule(
    counts: &StudyCounts,
    effects: &NetEffectCounts,
    alpha: Level,
    procedure: Procedure,
    rule: ExclusionRule,
) -> Membership {
    match adjusted_tables(counts, effects) {
        None => Membership::Infeasible,
        Some(tables) => {
            let p = compute_pvalues(&tables);
            if rule.excludes(procedure.apply(&p, alpha).flags()) {
                Membership::NonMember
            } else {
                Membership::Member
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Projections {
    #[serde(rename = "A_PN")]
    pub a_pn: [i64; 2],
    #[serde(rename = "A_PC")]
    pub a_pc: [i64; 2],
    #[serde(rename = "A_NC")]
    pub a_nc: [i64; 2],
}

impl Projections {
    fn point(e: &NetEffectCounts) -> Self {
        Self {
            a_pn: [e.a_pn, e.a_pn],
            a_pc: [e.a_pc, e.a_pc],
            a_nc: [e.a_nc, e.a_nc],
        }
    }

    fn merge(self, o: Self) -> Self {
        let m = |a: [i64; 2], b: [i64; 2]| [a[0].min(b[0]), a[1].max(b[1])];
        Self {
            a_pn: m(self.a_pn, o.a_pn),
            a_pc: m(self.a_pc, o.a_pc),
            a_nc: m(self.a_nc, o.a_nc),
        }
    }

    pub fn contains(&self, e: &NetEffectCounts) -> bool {
        let within = |r: [i64; 2], v: i64| r[0] <= v && v <= r[1];
        within(self.a_pn, e.a_pn) && within(self.a_pc, e.a_pc) && within(self.a_nc, e.a_nc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub alpha: Level,
    pub procedure: Procedure,
    pub rule: ExclusionRule,
    pub stride: u64,
    /// `None` when the set is empty.
    pub projections: Option<Projections>,
    pub member_count: u64,
    /// Members in lexicographic `(A_PN, A_PC, A_NC)` order, if requested.
    pub members: Option<Vec<NetEffectCounts>>,
    /// True if `members` was cut off at the member cap.
    pub members_truncated: bool,
    pub feasible_evaluated: u64,
    pub infeasible_skipped: u64,
    /// `(n_PN1, n_PC1, n_NC1)`, the denominators of the θ ratios.
    pub denominators: [u64; 3],
}

impl ConfidenceSet {
    /// Membership of `e`, when it can be decided from the stored members.
    pub fn contains(&self, e: &NetEffectCounts) -> Option<bool> {
        match &self.members {
            Some(m) if !self.members_truncated => Some(m.binary_search(e).is_ok()),
            _ if self.member_count == 0 => Some(false),
            _ => None,
        }
    }

    pub fn report(&self) -> ConfidenceReport {
        let theta = |r: [i64; 2], d: u64| {
            (d != 0).then(|| [r[0] as f64 / d as f64, r[1] as f64 / d as f64])
        };
        let [d_pn, d_pc, d_nc] = self.denominators;
        ConfidenceReport {
            alpha: self.alpha.get(),
            procedure: self.procedure.kind(),
            variant: self.procedure.variant(),
            rule: self.rule,
            stride: self.stride,
            projections: self.projections.map(|p| ProjectionReport {
                a_pn: p.a_pn,
                a_pc: p.a_pc,
                a_nc: p.a_nc,
                theta_pn: theta(p.a_pn, d_pn),
                theta_pc: theta(p.a_pc, d_pc),
                theta_nc: theta(p.a_nc, d_nc),
            }),
            denominators: Denominators {
                n_pn1: d_pn,
                n_pc1: d_pc,
                n_nc1: d_nc,
            },
            member_count: self.member_count,
            counts_evaluated: self.feasible_evaluated,
            infeasible_skipped: self.infeasible_skipped,
            members_truncated: self.members_truncated,
            members_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceReport {
    pub alpha: f64,
    pub procedure: ProcedureKind,
    pub variant: Option<Method2Variant>,
    pub rule: ExclusionRule,
    pub stride: u64,
    pub projections: Option<ProjectionReport>,
    pub denominators: Denominators,
    pub member_count: u64,
    pub counts_evaluated: u64,
    pub infeasible_skipped: u64,
    pub members_truncated: bool,
    pub members_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    #[serde(rename = "A_PN")]
    pub a_pn: [i64; 2],
    #[serde(rename = "A_PC")]
    pub a_pc: [i64; 2],
    #[serde(rename = "A_NC")]
    pub a_nc: [i64; 2],
    #[serde(rename = "theta_PN")]
    pub theta_pn: Option<[f64; 2]>,
    #[serde(rename = "theta_PC")]
    pub theta_pc: Option<[f64; 2]>,
    #[serde(rename = "theta_NC")]
    pub theta_nc: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Denominators {
    #[serde(rename = "n_PN1")]
    pub n_pn1: u64,
    #[serde(rename = "n_PC1")]
    pub n_pc1: u64,
    #[serde(rename = "n_NC1")]
    pub n_nc1: u64,
}

/// Multiples of `stride` in `[-bound, bound]`, ascending.
fn axis(bound: u64, stride: u64) -> impl Iterator<Item = i64> + Clone {
    let steps = (bound / stride) as i64;
    let s = stride as i64;
    (-steps..=steps).map(move |k| k * s)
}

fn axis_len(bound: u64, stride: u64) -> u128 {
    2 * (bound / stride) as u128 + 1
}

fn lattice_size(bounds: [u64; 3], stride: u64) -> u128 {
    bounds.iter().map(|&b| axis_len(b, stride)).product()
}

fn smallest_stride_within(bounds: [u64; 3], budget: u64, from: u64) -> u64 {
    let max_bound = bounds.iter().copied().max().unwrap_or(0).max(1);
    let (mut lo, mut hi) = (from, max_bound + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if lattice_size(bounds, mid) <= budget as u128 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Exclusion decisions keyed by adjusted exposed cells `(P', C')`.
struct DecisionCache {
    counts: StudyCounts,
    alpha: Level,
    procedure: Procedure,
    rule: ExclusionRule,
    total_exposed: u64,
    // 0 = not computed, 1 = kept, 2 = excluded
    dense: Option<Vec<AtomicU8>>,
}

impl DecisionCache {
    fn new(counts: &StudyCounts, opts: &ConfsetOptions) -> Self {
        let t = counts.n_pnc1();
        let dense = (t <= DENSE_CACHE_LIMIT).then(|| {
            let side = (t + 1) as usize;
            (0..side * side).map(|_| AtomicU8::new(0)).collect()
        });
        Self {
            counts: *counts,
            alpha: opts.alpha,
            procedure: opts.procedure,
            rule: opts.rule,
            total_exposed: t,
            dense,
        }
    }

    fn compute(&self, p_cell: u64, c_cell: u64) -> bool {
        let k = &self.counts;
        let n_cell = self.total_exposed - p_cell - c_cell;
        let tables = ComparisonTables {
            i: TwoByTwoTable::new(p_cell, k.n_p0, n_cell, k.n_n0),
            ii: TwoByTwoTable::new(p_cell, k.n_p0, c_cell, k.n_c0),
            iii: TwoByTwoTable::new(p_cell + n_cell, k.n_pn0(), c_cell, k.n_c0),
        };
        let p: PValueSet = compute_pvalues(&tables);
        self.rule
            .excludes(self.procedure.apply(&p, self.alpha).flags())
    }

    fn excluded(&self, p_cell: u64, c_cell: u64, local: &mut HashMap<(u64, u64), bool>) -> bool {
        match &self.dense {
            Some(grid) => {
                let slot = &grid[(p_cell * (self.total_exposed + 1) + c_cell) as usize];
                match slot.load(Ordering::Relaxed) {
                    1 => false,
                    2 => true,
                    _ => {
                        let ex = self.compute(p_cell, c_cell);
                        slot.store(if ex { 2 } else { 1 }, Ordering::Relaxed);
                        ex
                    }
                }
            }
            None => *local
                .entry((p_cell, c_cell))
                .or_insert_with(|| self.compute(p_cell, c_cell)),
        }
    }
}

#[derive(Default)]
struct Partial {
    projections: Option<Projections>,
    member_count: u64,
    members: Vec<NetEffectCounts>,
    feasible: u64,
    infeasible: u64,
}

impl Partial {
    // Associative; `other` must cover lattice points after `self`'s.
    fn merge(mut self, other: Partial, cap: usize) -> Partial {
        self.projections = match (self.projections, other.projections) {
            (Some(a), Some(b)) => Some(a.merge(b)),
            (a, b) => a.or(b),
        };
        self.member_count += other.member_count;
        let room = cap.saturating_sub(self.members.len());
        self.members.extend(other.members.into_iter().take(room));
        self.feasible += other.feasible;
        self.infeasible += other.infeasible;
        self
    }
}

/// Scans the effect lattice and collects every non-excluded feasible point.
///
/// The lattice is the multiples of `stride` within
/// `[-n_PN1, n_PN1] × [-n_PC1, n_PC1] × [-n_NC1, n_NC1]`, so it always
/// contains the origin.
pub fn confidence_set(counts: &StudyCounts, opts: &ConfsetOptions) -> Result<ConfidenceSet> {
    if opts.stride == 0 {
        return Err(Error::arg("stride", "must be at least 1"));
    }
    let bounds = [counts.n_pn1(), counts.n_pc1(), counts.n_nc1()];
    let points = lattice_size(bounds, opts.stride);
    if points > opts.budget as u128 {
        return Err(Error::Budget {
            points,
            budget: opts.budget,
            suggested_stride: smallest_stride_within(bounds, opts.budget, opts.stride),
        });
    }

    let cache = DecisionCache::new(counts, opts);
    let cap = if opts.emit_members {
        opts.member_cap
    } else {
        0
    };
    let pn_axis: Vec<i64> = axis(bounds[0], opts.stride).collect();
    let stride = opts.stride as i64;
    let nc_len = axis_len(bounds[2], opts.stride) as u64;
    let nc_steps = (bounds[2] / opts.stride) as i64;

    let partials: Vec<Partial> = pn_axis
        .par_iter()
        .map(|&a_pn| {
            let mut part = Partial::default();
            let mut local = HashMap::new();
            for a_pc in axis(bounds[1], opts.stride) {
                // P' = n_P1 - A_PN - A_PC must be non-negative.
                let p_cell = counts.n_p1 as i64 - a_pn - a_pc;
                if p_cell < 0 {
                    part.infeasible += nc_len;
                    continue;
                }
                // N' >= 0 and C' >= 0 bound A_NC to an interval.
                let hi = (counts.n_n1 as i64 + a_pn).div_euclid(stride).min(nc_steps);
                let lo = (-(counts.n_c1 as i64 + a_pc).div_euclid(stride)).max(-nc_steps);
                if lo > hi {
                    part.infeasible += nc_len;
                    continue;
                }
                part.infeasible += nc_len - (hi - lo + 1) as u64;
                for k in lo..=hi {
                    let a_nc = k * stride;
                    let e = NetEffectCounts::new(a_pn, a_pc, a_nc);
                    let c_cell = (counts.n_c1 as i64 + a_pc + a_nc) as u64;
                    debug_assert_eq!(
                        adjusted_exposed_cells(counts, &e).map(|c| (c[0], c[2])),
                        Some((p_cell as u64, c_cell))
                    );
                    part.feasible += 1;
                    if cache.excluded(p_cell as u64, c_cell, &mut local) {
                        continue;
                    }
                    part.member_count += 1;
                    let proj = Projections::point(&e);
                    part.projections = Some(part.projections.map_or(proj, |p| p.merge(proj)));
                    if part.members.len() < cap {
                        part.members.push(e);
                    }
                }
            }
            part
        })
        .collect();

    let total = partials
        .into_iter()
        .fold(Partial::default(), |acc, p| acc.merge(p, cap));

    Ok(ConfidenceSet {
        alpha: opts.alpha,
        procedure: opts.procedure,
        rule: opts.rule,
        stride: opts.stride,
        projections: total.projections,
        members_truncated: opts.emit_members && total.member_count > total.members.len() as u64,
        member_count: total.member_count,
        members: opts.emit_members.then_some(total.members),
        feasible_evaluated: total.feasible,
        infeasible_skipped: total.infeasible,
        denominators: bounds,
    })
}
