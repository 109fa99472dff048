//! Aggregate counts of a test-negative study with added controls, the three
//! comparison tables built from them, and the tables adjusted for
//! hypothesized attributable effects.

use serde::{Deserialize, Serialize};

use crate::exact_tests::{fisher_combine, fisher_exact_two_sided, TwoByTwoTable};

/// Exposed (`1`) and unexposed (`0`) counts for test-positives (`P`),
/// test-negatives (`N`) and added controls (`C`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyCounts {
    #[serde(rename = "n_P1")]
    pub n_p1: u64,
    #[serde(rename = "n_P0")]
    pub n_p0: u64,
    #[serde(rename = "n_N1")]
    pub n_n1: u64,
    #[serde(rename = "n_N0")]
    pub n_n0: u64,
    #[serde(rename = "n_C1")]
    pub n_c1: u64,
    #[serde(rename = "n_C0")]
    pub n_c0: u64,
}

/// Field names in the order of the JSON/CSV input schema.
pub const COUNT_FIELDS: [&str; 6] = ["n_P1", "n_P0", "n_N1", "n_N0", "n_C1", "n_C0"];

impl StudyCounts {
    pub const fn new(n_p1: u64, n_p0: u64, n_n1: u64, n_n0: u64, n_c1: u64, n_c0: u64) -> Self {
        Self {
            n_p1,
            n_p0,
            n_n1,
            n_n0,
            n_c1,
            n_c0,
        }
    }

    /// Builds counts from values listed in [`COUNT_FIELDS`] order.
    pub fn from_array(v: [u64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn n_pn1(&self) -> u64 {
        self.n_p1 + self.n_n1
    }

    pub fn n_pn0(&self) -> u64 {
        self.n_p0 + self.n_n0
    }

    pub fn n_pc1(&self) -> u64 {
        self.n_p1 + self.n_c1
    }

    pub fn n_pc0(&self) -> u64 {
        self.n_p0 + self.n_c0
    }

    /// Exposed individuals who are not test-positive.
    pub fn n_nc1(&self) -> u64 {
        self.n_n1 + self.n_c1
    }

    pub fn n_pnc1(&self) -> u64 {
        self.n_pn1() + self.n_c1
    }

    pub fn n_pnc0(&self) -> u64 {
        self.n_pn0() + self.n_c0
    }

    pub fn total(&self) -> u64 {
        self.n_pnc1() + self.n_pnc0()
    }
}

/// Net numbers of exposed persons whose group was changed by the exposure.
///
/// `a_pn > 0` means exposure moved people from test-negative to
/// test-positive; `a_pc` and `a_nc` are defined the same way for
/// test-positive vs control and test-negative vs control. The attributable
/// effects are these counts divided by `n_PN1`, `n_PC1` and `n_NC1`.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct NetEffectCounts {
    #[serde(rename = "A_PN")]
    pub a_pn: i64,
    #[serde(rename = "A_PC")]
    pub a_pc: i64,
    #[serde(rename = "A_NC")]
    pub a_nc: i64,
}

impl NetEffectCounts {
    pub const ZERO: Self = Self::new(0, 0, 0);

    pub const fn new(a_pn: i64, a_pc: i64, a_nc: i64) -> Self {
        Self { a_pn, a_pc, a_nc }
    }

    /// True when every count is within the exposed group it is scaled by.
    pub fn within_bounds(&self, counts: &StudyCounts) -> bool {
        self.a_pn.unsigned_abs() <= counts.n_pn1()
            && self.a_pc.unsigned_abs() <= counts.n_pc1()
            && self.a_nc.unsigned_abs() <= counts.n_nc1()
    }

    /// The attributable effects `(θ_PN, θ_PC, θ_NC)` as exact ratios.
    pub fn thetas(&self, counts: &StudyCounts) -> [Ratio; 3] {
        [
            Ratio::new(self.a_pn, counts.n_pn1()),
            Ratio::new(self.a_pc, counts.n_pc1()),
            Ratio::new(self.a_nc, counts.n_nc1()),
        ]
    }
}

/// An unreduced ratio `numer / denom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numer: i64,
    pub denom: u64,
}

impl Ratio {
    pub fn new(numer: i64, denom: u64) -> Self {
        Self { numer, denom }
    }

    /// `None` when the denominator is zero.
    pub fn value(&self) -> Option<f64> {
        (self.denom != 0).then(|| self.numer as f64 / self.denom as f64)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

/// The tables for comparisons (i) P vs N, (ii) P vs C and (iii) P+N vs C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonTables {
    pub i: TwoByTwoTable,
    pub ii: TwoByTwoTable,
    pub iii: TwoByTwoTable,
}

impl ComparisonTables {
    pub fn as_array(&self) -> [TwoByTwoTable; 3] {
        [self.i, self.ii, self.iii]
    }
}

pub fn comparison_tables(counts: &StudyCounts) -> ComparisonTables {
    let c = counts;
    ComparisonTables {
        i: TwoByTwoTable::new(c.n_p1, c.n_p0, c.n_n1, c.n_n0),
        ii: TwoByTwoTable::new(c.n_p1, c.n_p0, c.n_c1, c.n_c0),
        iii: TwoByTwoTable::new(c.n_pn1(), c.n_pn0(), c.n_c1, c.n_c0),
    }
}

/// Exposed cells of the adjusted tables, in the order
/// `(P, N, C)`; `P + N` is the pooled cell of table (iii).
///
/// Returns `None` if the effects fall outside the parameter space: a count
/// exceeds its exposed group or an adjusted cell would be negative.
pub fn adjusted_exposed_cells(counts: &StudyCounts, effects: &NetEffectCounts) -> Option<[u64; 3]> {
    if !effects.within_bounds(counts) {
        return None;
    }
    let e = effects;
    let p = counts.n_p1 as i128 - e.a_pn as i128 - e.a_pc as i128;
    let n = counts.n_n1 as i128 + e.a_pn as i128 - e.a_nc as i128;
    let c = counts.n_c1 as i128 + e.a_pc as i128 + e.a_nc as i128;
    if p < 0 || n < 0 || c < 0 {
        return None;
    }
    Some([p as u64, n as u64, c as u64])
}

/// Tables of potential outcomes under no exposure, obtained by moving the
/// hypothesized net counts back between groups. Unexposed cells are
/// untouched. `None` means the effect triple is infeasible.
pub fn adjusted_tables(
    counts: &StudyCounts,
    effects: &NetEffectCounts,
) -> Option<ComparisonTables> {
    let [p, n, c] = adjusted_exposed_cells(counts, effects)?;
    let k = counts;
    Some(ComparisonTables {
        i: TwoByTwoTable::new(p, k.n_p0, n, k.n_n0),
        ii: TwoByTwoTable::new(p, k.n_p0, c, k.n_c0),
        iii: TwoByTwoTable::new(p + n, k.n_pn0(), c, k.n_c0),
    })
}

/// The three comparison p-values and the Fisher combination of (i) and (iii).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueSet {
    #[serde(rename = "i")]
    pub p_i: f64,
    #[serde(rename = "ii")]
    pub p_ii: f64,
    #[serde(rename = "iii")]
    pub p_iii: f64,
    #[serde(rename = "i_and_iii")]
    pub p_i_and_iii: f64,
}

impl PValueSet {
    /// Builds the set from the three comparison p-values, filling in the
    /// combination. Fails if any value is outside `[0, 1]`.
    pub fn from_triple(p_i: f64, p_ii: f64, p_iii: f64) -> crate::Result<Self> {
        if !(0.0..=1.0).contains(&p_ii) {
            return Err(crate::Error::arg(
                "p_ii",
                format!("p-value must lie in [0, 1], got {p_ii}"),
            ));
        }
        let p_i_and_iii = fisher_combine(p_i, p_iii).map_err(|e| match e {
            crate::Error::InvalidArgument { name: "p1", reason } => {
                crate::Error::arg("p_i", reason)
            }
            crate::Error::InvalidArgument { name: "p2", reason } => {
                crate::Error::arg("p_iii", reason)
            }
            other => other,
        })?;
        Ok(Self {
            p_i,
            p_ii,
            p_iii,
            p_i_and_iii,
        })
    }
}

pub fn compute_pvalues(tables: &ComparisonTables) -> PValueSet {
    let p_i = fisher_exact_two_sided(&tables.i);
    let p_ii = fisher_exact_two_sided(&tables.ii);
    let p_iii = fisher_exact_two_sided(&tables.iii);
    PValueSet::from_triple(p_i, p_ii, p_iii).expect("exact test p-values lie in [0, 1]")
}
