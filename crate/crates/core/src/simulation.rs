//! Monte Carlo engine: simulated studies, error rates, p-value dependence
//! diagnostics and power of the procedures.
//!
//! Replicate `r` of a run with seed `s` draws from a ChaCha8 generator keyed
//! by `s` on stream `r`, so a replicate's data depend on `(s, r)` only and
//! any partition of the replicates over threads gives identical results.

use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{DecisionSet, Level, Method2Variant, Procedure, ProcedureKind};
use crate::study_model::{comparison_tables, compute_pvalues, PValueSet, StudyCounts};

/// Grid used for the joint-tail and marginal validity diagnostics.
pub const TAIL_GRID: [f64; 4] = [0.05, 0.1, 0.25, 0.5];
pub const CDF_GRID: [f64; 5] = [0.01, 0.05, 0.1, 0.25, 0.5];

/// Exposure probability given to the shifted group in configurations (b)
/// and (c).
pub const DEFAULT_SHIFTED_EXPOSURE: f64 = 0.3;

/// Named scenarios understood by [`scenario`].
pub const SCENARIOS: [&str; 5] = [
    "fig1-null",
    "fig1-alt",
    "config-b",
    "config-c",
    "coverage-null",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_total: u64,
    /// Probabilities of being test-positive, test-negative and control.
    pub group_probs: [f64; 3],
    /// Exposure probability within each group, same order.
    pub exposure_probs: [f64; 3],
    pub alpha: Level,
    pub replicates: u64,
    pub seed: u64,
    pub procedures: Vec<Procedure>,
}

impl SimulationConfig {
    /// 1,250 individuals, 30% test-positive, 30% test-negative, 40%
    /// controls, 20% exposed in every group.
    pub fn fig1_null(seed: u64) -> Self {
        Self {
            n_total: 1250,
            group_probs: [0.3, 0.3, 0.4],
            exposure_probs: [0.2, 0.2, 0.2],
            alpha: Level::default(),
            replicates: 10_000,
            seed,
            procedures: Procedure::ALL.to_vec(),
        }
    }

    /// The null design with test-positives' exposure raised to odds ratio
    /// 1.75 against both other groups.
    pub fn fig1_alt(seed: u64) -> Self {
        let q_p = or_to_prob(0.2, 1.75).expect("valid base rate");
        Self {
            exposure_probs: [q_p, 0.2, 0.2],
            ..Self::fig1_null(seed)
        }
    }

    /// Only H₀(i) true: controls' exposure shifted.
    pub fn config_b(seed: u64) -> Self {
        Self {
            exposure_probs: [0.2, 0.2, DEFAULT_SHIFTED_EXPOSURE],
            ..Self::fig1_null(seed)
        }
    }

    /// Only H₀(ii) true: test-negatives' exposure shifted.
    pub fn config_c(seed: u64) -> Self {
        Self {
            exposure_probs: [0.2, DEFAULT_SHIFTED_EXPOSURE, 0.2],
            ..Self::fig1_null(seed)
        }
    }

    /// The null design scaled down to 150 individuals, 1,000 replicates.
    pub fn coverage_null(seed: u64) -> Self {
        Self {
            n_total: 150,
            replicates: 1000,
            ..Self::fig1_null(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = |name, v: &[f64; 3]| {
            if v.iter().all(|p| (0.0..=1.0).contains(p)) {
                Ok(())
            } else {
                Err(Error::arg(
                    name,
                    format!("probabilities must lie in [0, 1], got {v:?}"),
                ))
            }
        };
        probs("group_probs", &self.group_probs)?;
        probs("exposure_probs", &self.exposure_probs)?;
        let sum: f64 = self.group_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::arg(
                "group_probs",
                format!("must sum to 1, got {sum}"),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::arg("replicates", "must be at least 1"));
        }
        Ok(())
    }

    /// Truth of each null implied by the exposure probabilities.
    ///
    /// H₀(iii) is taken to be false exactly when H₀(i) or H₀(ii) is.
    pub fn truth_labels(&self) -> TruthLabels {
        let [q_p, q_n, q_c] = self.exposure_probs;
        let h_i = q_p == q_n;
        let h_ii = q_p == q_c;
        TruthLabels {
            h_i,
            h_ii,
            h_iii: h_i && h_ii,
        }
    }
}

/// Looks up a named scenario. Scenarios carry the default replicate count,
/// which callers may override.
pub fn scenario(name: &str, seed: u64) -> Result<SimulationConfig> {
    match name {
        "fig1-null" => Ok(SimulationConfig::fig1_null(seed)),
        "fig1-alt" => Ok(SimulationConfig::fig1_alt(seed)),
        "config-b" => Ok(SimulationConfig::config_b(seed)),
        "config-c" => Ok(SimulationConfig::config_c(seed)),
        "coverage-null" => Ok(SimulationConfig::coverage_null(seed)),
        _ => Err(Error::arg(
            "scenario",
            format!(
                "unknown scenario `{name}`; expected one of {}",
                SCENARIOS.join(", ")
            ),
        )),
    }
}

/// Exposure probability whose odds are `odds_ratio` times those of `base_prob`.
pub fn or_to_prob(base_prob: f64, odds_ratio: f64) -> Result<f64> {
    if !(base_prob > 0.0 && base_prob < 1.0) {
        return Err(Error::arg(
            "base_prob",
            format!("must lie strictly between 0 and 1, got {base_prob}"),
        ));
    }
    if !(odds_ratio > 0.0 && odds_ratio.is_finite()) {
        return Err(Error::arg(
            "odds_ratio",
            format!("must be positive and finite, got {odds_ratio}"),
        ));
    }
    let odds = odds_ratio * base_prob / (1.0 - base_prob);
    Ok(odds / (1.0 + odds))
}

/// Which null hypotheses are true (`true` = null holds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLabels {
    pub h_i: bool,
    pub h_ii: bool,
    pub h_iii: bool,
}

impl TruthLabels {
    pub const ALL_NULL: Self = Self {
        h_i: true,
        h_ii: true,
        h_iii: true,
    };

    pub fn validate(&self) -> Result<()> {
        if self.h_iii != (self.h_i && self.h_ii) {
            return Err(Error::arg(
                "truth_labels",
                "H0(iii) must be true exactly when both H0(i) and H0(ii) are true",
            ));
        }
        Ok(())
    }

    /// True when some true null was rejected. For method 2 the intersection
    /// null of (i) and (iii) is part of the family.
    pub fn familywise_error(&self, d: &DecisionSet) -> bool {
        (self.h_i && d.reject_i)
            || (self.h_ii && d.reject_ii)
            || (self.h_iii && d.reject_iii)
            || (self.h_i && self.h_iii && d.reject_union == Some(true))
    }
}

fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One simulated study: every individual draws a group, then an exposure
/// from that group's probability.
pub fn simulate_counts(config: &SimulationConfig, replicate_index: u64) -> StudyCounts {
    let mut rng = replicate_rng(config.seed, replicate_index);
    let [pi_p, pi_n, _] = config.group_probs;
    let mut cells = [0u64; 6];
    for _ in 0..config.n_total {
        let u: f64 = rng.random();
        let group = if u < pi_p {
            0
        } else if u < pi_p + pi_n {
            1
        } else {
            2
        };
        let exposed = rng.random::<f64>() < config.exposure_probs[group];
        // [n_P1, n_P0, n_N1, n_N0, n_C1, n_C0]
        cells[2 * group + usize::from(!exposed)] += 1;
    }
    StudyCounts::from_array(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub index: u64,
    pub counts: StudyCounts,
    pub p: PValueSet,
    /// One entry per procedure in the config, same order.
    pub decisions: Vec<DecisionSet>,
}

pub fn run_replicate(config: &SimulationConfig, index: u64) -> ReplicateOutcome {
    let counts = simulate_counts(config, index);
    let p = compute_pvalues(&comparison_tables(&counts));
    let decisions = config
        .procedures
        .iter()
        .map(|pr| pr.apply(&p, config.alpha))
        .collect();
    ReplicateOutcome {
        index,
        counts,
        p,
        decisions,
    }
}

/// Outcomes for the replicate indices in `range`, in index order.
pub fn run_replicates(config: &SimulationConfig, range: Range<u64>) -> Vec<ReplicateOutcome> {
    range
        .into_par_iter()
        .map(|i| run_replicate(config, i))
        .collect()
}

/// Lazily yields `(replicate, p-values)` for the first `replicates` studies.
pub fn pvalue_scatter(
    config: &SimulationConfig,
    replicates: u64,
) -> impl Iterator<Item = (u64, PValueSet)> + '_ {
    (0..replicates).map(move |i| {
        let counts = simulate_counts(config, i);
        (i, compute_pvalues(&comparison_tables(&counts)))
    })
}

/// A frequency over `n` replicates and its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub rate: f64,
    pub mc_se: f64,
}

impl Rate {
    pub fn from_count(hits: u64, n: u64) -> Self {
        let f = hits as f64 / n as f64;
        Self {
            rate: f,
            mc_se: (f * (1.0 - f) / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureSummary {
    /// Display name, e.g. `method2-strict-lambda`.
    pub name: String,
    pub procedure: ProcedureKind,
    pub variant: Option<Method2Variant>,
    pub reject_i: Rate,
    pub reject_ii: Rate,
    pub reject_iii: Rate,
    pub reject_union: Option<Rate>,
    pub fwer: Rate,
    /// At least one of the three nulls rejected.
    pub power_any: Rate,
    /// All three nulls rejected.
    pub power_all: Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTail {
    pub p: f64,
    pub q: f64,
    /// Empirical `P(P_i <= p, P_iii <= q)`.
    pub empirical: f64,
    pub product: f64,
    pub excess: f64,
    /// Standard error of the empirical frequency when it equals `p q`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalCdf {
    pub t: f64,
    pub p_i: f64,
    pub p_ii: f64,
    pub p_iii: f64,
    /// Standard error at a uniform CDF value of `t`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    /// Pearson correlations; `None` when a p-value is constant.
    pub corr_i_ii: Option<f64>,
    pub corr_i_iii: Option<f64>,
    pub joint_tail_i_iii: Vec<JointTail>,
    pub max_joint_excess: f64,
    pub marginal_cdf: Vec<MarginalCdf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub replicates: u64,
    pub n_total: u64,
    pub group_probs: [f64; 3],
    pub exposure_probs: [f64; 3],
    pub alpha: f64,
    pub truth: TruthLabels,
    pub procedures: Vec<ProcedureSummary>,
    pub dependence: DependenceSummary,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let r = sxy / (sxx * syy).sqrt();
    r.is_finite().then_some(r)
}

fn dependence(outcomes: &[ReplicateOutcome]) -> DependenceSummary {
    let n = outcomes.len() as u64;
    let p_i: Vec<f64> = outcomes.iter().map(|o| o.p.p_i).collect();
    let p_ii: Vec<f64> = outcomes.iter().map(|o| o.p.p_ii).collect();
    let p_iii: Vec<f64> = outcomes.iter().map(|o| o.p.p_iii).collect();

    let mut joint = Vec::new();
    for &p in &TAIL_GRID {
        for &q in &TAIL_GRID {
            let hits = outcomes
                .iter()
                .filter(|o| o.p.p_i <= p && o.p.p_iii <= q)
                .count() as u64;
            let empirical = hits as f64 / n as f64;
            let product = p * q;
            joint.push(JointTail {
                p,
                q,
                empirical,
                product,
                excess: empirical - product,
                mc_se: (product * (1.0 - product) / n as f64).sqrt(),
            });
        }
    }
    let cdf = |v: &[f64], t: f64| v.iter().filter(|&&x| x <= t).count() as f64 / n as f64;
    let marginal = CDF_GRID
        .iter()
        .map(|&t| MarginalCdf {
            t,
            p_i: cdf(&p_i, t),
            p_ii: cdf(&p_ii, t),
            p_iii: cdf(&p_iii, t),
            mc_se: (t * (1.0 - t) / n as f64).sqrt(),
        })
        .collect();

    DependenceSummary {
        corr_i_ii: pearson(&p_i, &p_ii),
        corr_i_iii: pearson(&p_i, &p_iii),
        max_joint_excess: joint
            .iter()
            .map(|j| j.excess)
            .fold(f64::NEG_INFINITY, f64::max),
        joint_tail_i_iii: joint,
        marginal_cdf: marginal,
    }
}

/// Aggregates replicate outcomes. `outcomes` must be non-empty and produced
/// from `config`.
pub fn summarize(
    config: &SimulationConfig,
    truth: TruthLabels,
    outcomes: &[ReplicateOutcome],
) -> SimulationSummary {
    let n = outcomes.len() as u64;
    let procedures = config
        .procedures
        .iter()
        .enumerate()
        .map(|(k, proc_)| {
            let count = |f: &dyn Fn(&DecisionSet) -> bool| {
                outcomes.iter().filter(|o| f(&o.decisions[k])).count() as u64
            };
            let rate = |f: &dyn Fn(&DecisionSet) -> bool| Rate::from_count(count(f), n);
            ProcedureSummary {
                name: proc_.to_string(),
                procedure: proc_.kind(),
                variant: proc_.variant(),
                reject_i: rate(&|d| d.reject_i),
                reject_ii: rate(&|d| d.reject_ii),
                reject_iii: rate(&|d| d.reject_iii),
                reject_union: proc_
                    .variant()
                    .map(|_| rate(&|d| d.reject_union == Some(true))),
                fwer: rate(&|d| truth.familywise_error(d)),
                power_any: rate(&|d| d.any()),
                power_all: rate(&|d| d.all()),
            }
        })
        .collect();
    SimulationSummary {
        seed: config.seed,
        replicates: n,
        n_total: config.n_total,
        group_probs: config.group_probs,
        exposure_probs: config.exposure_probs,
        alpha: config.alpha.get(),
        truth,
        procedures,
        dependence: dependence(outcomes),
    }
}

/// Runs every replicate of `config` and summarizes against `truth`.
pub fn run_study(config: &SimulationConfig, truth: TruthLabels) -> Result<SimulationSummary> {
    config.validate()?;
    truth.validate()?;
    let outcomes = run_replicates(config, 0..config.replicates);
    Ok(summarize(config, truth, &outcomes))
}

impl SimulationSummary {
    /// Flat table, one row per procedure × hypothesis × metric.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("procedure\thypothesis\tmetric\tvalue\tmc_se\n");
        let mut row = |procedure: &str, hyp: &str, metric: &str, value: f64, se: Option<f64>| {
            let se = se.map_or_else(String::new, |s| s.to_string());
            let _ = writeln!(out, "{procedure}\t{hyp}\t{metric}\t{value}\t{se}");
        };
        for s in &self.procedures {
            let mut rates = vec![
                ("i", s.reject_i),
                ("ii", s.reject_ii),
                ("iii", s.reject_iii),
            ];
            if let Some(u) = s.reject_union {
                rates.push(("union_i_iii", u));
            }
            for (hyp, r) in rates {
                row(&s.name, hyp, "reject_rate", r.rate, Some(r.mc_se));
            }
            row(&s.name, "family", "fwer", s.fwer.rate, Some(s.fwer.mc_se));
            row(
                &s.name,
                "family",
                "power_any",
                s.power_any.rate,
                Some(s.power_any.mc_se),
            );
            row(
                &s.name,
                "family",
                "power_all",
                s.power_all.rate,
                Some(s.power_all.mc_se),
            );
        }
        let d = &self.dependence;
        if let Some(c) = d.corr_i_ii {
            row("pvalues", "i,ii", "correlation", c, None);
        }
        if let Some(c) = d.corr_i_iii {
            row("pvalues", "i,iii", "correlation", c, None);
        }
        for j in &d.joint_tail_i_iii {
            let metric = format!("joint_tail_excess(p={},q={})", j.p, j.q);
            row("pvalues", "i,iii", &metric, j.excess, Some(j.mc_se));
        }
        for m in &d.marginal_cdf {
            let metric = format!("cdf(t={})", m.t);
            for (hyp, v) in [("i", m.p_i), ("ii", m.p_ii), ("iii", m.p_iii)] {
                row("pvalues", hyp, &metric, v, Some(m.mc_se));
            }
        }
        out
    }
}
