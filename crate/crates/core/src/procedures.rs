//! Decision rules for the three comparisons: the Bonferroni baseline on
//! (i) and (ii), and the two gatekeeping procedures that add comparison
//! (iii).
//!
//! Every rule rejects when `p <= level`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::study_model::PValueSet;

/// Overall familywise significance level, strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Level(f64);

impl Level {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::arg(
                "alpha",
                format!("must lie strictly between 0 and 1, got {alpha}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn half(self) -> f64 {
        self.0 / 2.0
    }
}

impl Default for Level {
    fn default() -> Self {
        Self(0.05)
    }
}

/// Level used for the individual tests of (i) and (iii) in step 3 of
/// method 2.
///
/// The written rule tests them at λ. With p = (.04, .03, .04) and α = .05
/// that gives λ = α/2 and no rejection, yet the worked example rejects all
/// three nulls, which only happens when step 3 runs at α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method2Variant {
    /// Step 3 at λ, as the steps are written.
    StrictLambda,
    /// Step 3 at α, reproducing the worked example.
    #[default]
    ExampleConsistent,
}

impl Method2Variant {
    pub const ALL: [Method2Variant; 2] = [
        Method2Variant::StrictLambda,
        Method2Variant::ExampleConsistent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method2Variant::StrictLambda => "strict_lambda",
            Method2Variant::ExampleConsistent => "example_consistent",
        }
    }
}

impl FromStr for Method2Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "strict_lambda" => Ok(Method2Variant::StrictLambda),
            "example_consistent" => Ok(Method2Variant::ExampleConsistent),
            _ => Err(Error::arg(
                "variant",
                format!("unknown method 2 variant `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    Standard,
    Method1,
    Method2,
}

impl ProcedureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProcedureKind::Standard => "standard",
            ProcedureKind::Method1 => "method1",
            ProcedureKind::Method2 => "method2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Procedure {
    /// Bonferroni on (i) and (ii), each at α/2; (iii) is not tested.
    Standard,
    /// (i) and (ii) at α/2; (iii) at α only if both were rejected.
    Method1,
    /// Fisher-combination gatekeeping on (i) and (iii), see [`method2`].
    Method2(Method2Variant),
}

impl Procedure {
    /// Every procedure, with both method 2 variants.
    pub const ALL: [Procedure; 4] = [
        Procedure::Standard,
        Procedure::Method1,
        Procedure::Method2(Method2Variant::StrictLambda),
        Procedure::Method2(Method2Variant::ExampleConsistent),
    ];

    pub fn kind(self) -> ProcedureKind {
        match self {
            Procedure::Standard => ProcedureKind::Standard,
            Procedure::Method1 => ProcedureKind::Method1,
            Procedure::Method2(_) => ProcedureKind::Method2,
        }
    }

    pub fn variant(self) -> Option<Method2Variant> {
        match self {
            Procedure::Method2(v) => Some(v),
            _ => None,
        }
    }

    pub fn apply(self, p: &PValueSet, alpha: Level) -> DecisionSet {
        match self {
            Procedure::Standard => standard_bonferroni(p, alpha),
            Procedure::Method1 => method1(p, alpha),
            Procedure::Method2(v) => method2(p, alpha, v),
        }
    }
}

impl fmt::Display for Procedure {
    /// `standard`, `method1`, `method2-strict-lambda` or `method2-example-consistent`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Procedure::Method2(v) => write!(f, "method2-{}", v.as_str().replace('_', "-")),
            other => f.write_str(other.kind().as_str()),
        }
    }
}

/// Rejection flags and the trace of how they were reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionSet {
    pub procedure: Procedure,
    pub alpha: Level,
    /// λ from step 1 of method 2.
    pub lambda: Option<f64>,
    /// Level at which (i) and (iii) were tested in step 3 of method 2.
    pub step3_level: Option<f64>,
    pub reject_i: bool,
    pub reject_ii: bool,
    pub reject_iii: bool,
    /// Rejection of the intersection null of (i) and (iii); method 2 only.
    pub reject_union: Option<bool>,
}

impl DecisionSet {
    pub fn flags(&self) -> [bool; 3] {
        [self.reject_i, self.reject_ii, self.reject_iii]
    }

    pub fn any(&self) -> bool {
        self.reject_i || self.reject_ii || self.reject_iii
    }

    pub fn all(&self) -> bool {
        self.reject_i && self.reject_ii && self.reject_iii
    }

    pub fn report(&self, p: &PValueSet) -> DecisionReport {
        DecisionReport {
            procedure: self.procedure.kind(),
            variant: self.procedure.variant(),
            alpha: self.alpha.get(),
            lambda: self.lambda,
            step3_level: self.step3_level,
            p: *p,
            reject: Rejections {
                i: self.reject_i,
                ii: self.reject_ii,
                iii: self.reject_iii,
                union_i_iii: self.reject_union,
            },
        }
    }
}

/// Serialized form of one procedure's decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub procedure: ProcedureKind,
    pub variant: Option<Method2Variant>,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub step3_level: Option<f64>,
    pub p: PValueSet,
    pub reject: Rejections,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejections {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub union_i_iii: Option<bool>,
}

pub fn standard_bonferroni(p: &PValueSet, alpha: Level) -> DecisionSet {
    DecisionSet {
        procedure: Procedure::Standard,
        alpha,
        lambda: None,
        step3_level: None,
        reject_i: p.p_i <= alpha.half(),
        reject_ii: p.p_ii <= alpha.half(),
        reject_iii: false,
        reject_union: None,
    }
}

pub fn method1(p: &PValueSet, alpha: Level) -> DecisionSet {
    let reject_i = p.p_i <= alpha.half();
    let reject_ii = p.p_ii <= alpha.half();
    DecisionSet {
        procedure: Procedure::Method1,
        alpha,
        lambda: None,
        step3_level: None,
        reject_i,
        reject_ii,
        reject_iii: reject_i && reject_ii && p.p_iii <= alpha.get(),
        reject_union: None,
    }
}

/// 1. Test (ii) at α/2; λ = α if rejected, else α/2.
/// 2. Test the intersection null of (i) and (iii) with the Fisher
///    combination at λ; stop if not rejected.
/// 3. Test (i) and (iii) individually at λ or α, depending on `variant`.
/// 4. If λ = α/2 and both were rejected, test (ii) again at α.
///
/// Step 3 compares the p-values themselves against the level, so passing
/// step 2 does not by itself reject (i) or (iii).
pub fn method2(p: &PValueSet, alpha: Level, variant: Method2Variant) -> DecisionSet {
    let mut reject_ii = p.p_ii <= alpha.half();
    let lambda = if reject_ii { alpha.get() } else { alpha.half() };
    let step3_level = match variant {
        Method2Variant::StrictLambda => lambda,
        Method2Variant::ExampleConsistent => alpha.get(),
    };
    let reject_union = p.p_i_and_iii <= lambda;
    let (mut reject_i, mut reject_iii) = (false, false);
    if reject_union {
        reject_i = p.p_i <= step3_level;
        reject_iii = p.p_iii <= step3_level;
        if !reject_ii && reject_i && reject_iii {
            reject_ii = p.p_ii <= alpha.get();
        }
    }
    DecisionSet {
        procedure: Procedure::Method2(variant),
        alpha,
        lambda: Some(lambda),
        step3_level: Some(step3_level),
        reject_i,
        reject_ii,
        reject_iii,
        reject_union: Some(reject_union),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(i: f64, ii: f64, iii: f64) -> PValueSet {
        PValueSet::from_triple(i, ii, iii).unwrap()
    }

    const A: Level = Level(0.05);

    #[test]
    fn level_validation() {
        assert!(Level::new(0.0).is_err());
        assert!(Level::new(1.0).is_err());
        assert!(Level::new(f64::NAN).is_err());
        assert_eq!(Level::new(0.1).unwrap().half(), 0.05);
    }

    #[test]
    fn standard_examples() {
        let d = standard_bonferroni(&pv(0.04, 0.03, 0.04), A);
        assert_eq!(d.flags(), [false, false, false]);
        let d = standard_bonferroni(&pv(0.02, 0.02, 0.9), A);
        assert_eq!(d.flags(), [true, true, false]);
        let d = standard_bonferroni(&pv(1.0, 1.0, 1.0), A);
        assert!(!d.any());
        // a tiny p_iii is never acted on
        assert!(!standard_bonferroni(&pv(0.5, 0.5, 1e-12), A).reject_iii);
    }

    #[test]
    fn method1_examples() {
        assert_eq!(
            method1(&pv(0.01, 0.01, 0.2), A).flags(),
            [true, true, false]
        );
        assert_eq!(
            method1(&pv(0.04, 0.03, 0.04), A).flags(),
            [false, false, false]
        );
        assert_eq!(
            method1(&pv(0.01, 0.01, 0.04), A).flags(),
            [true, true, true]
        );
        assert_eq!(
            method1(&pv(0.01, 0.3, 0.001), A).flags(),
            [true, false, false]
        );
    }

    #[test]
    fn method2_worked_example() {
        let p = pv(0.04, 0.03, 0.04);
        let d = method2(&p, A, Method2Variant::ExampleConsistent);
        assert_eq!(d.flags(), [true, true, true]);
        assert_eq!(d.reject_union, Some(true));
        assert_eq!(d.lambda, Some(0.025));
        assert_eq!(d.step3_level, Some(0.05));

        let d = method2(&p, A, Method2Variant::StrictLambda);
        assert_eq!(d.reject_union, Some(true));
        assert_eq!(d.flags(), [false, false, false]);
        assert_eq!(d.step3_level, Some(0.025));
    }

    #[test]
    fn method2_when_step1_rejects() {
        for v in Method2Variant::ALL {
            let d = method2(&pv(0.04, 0.01, 0.04), A, v);
            assert_eq!(d.flags(), [true, true, true], "{v:?}");
            assert_eq!(d.lambda, Some(0.05));
        }
    }

    #[test]
    fn method2_stops_when_union_not_rejected() {
        let d = method2(&pv(0.2, 0.001, 0.3), A, Method2Variant::ExampleConsistent);
        assert_eq!(d.reject_union, Some(false));
        assert_eq!(d.flags(), [false, true, false]);
    }

    #[test]
    fn ties_reject() {
        assert_eq!(
            standard_bonferroni(&pv(0.025, 0.025, 1.0), A).flags(),
            [true, true, false]
        );
        assert!(method1(&pv(0.025, 0.025, 0.05), A).all());
    }

    #[test]
    fn display_names_round_trip_variant() {
        let names: Vec<String> = Procedure::ALL.iter().map(|p| p.to_string()).collect();
        assert_eq!(
            names,
            [
                "standard",
                "method1",
                "method2-strict-lambda",
                "method2-example-consistent"
            ]
        );
        assert_eq!(
            "strict-lambda".parse::<Method2Variant>().unwrap(),
            Method2Variant::StrictLambda
        );
        assert!("lax".parse::<Method2Variant>().is_err());
    }

    #[test]
    fn report_json_shape() {
        let p = pv(0.04, 0.03, 0.04);
        let r = method2(&p, A, Method2Variant::ExampleConsistent).report(&p);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["procedure"], "method2");
        assert_eq!(v["variant"], "example_consistent");
        assert_eq!(v["reject"]["union_i_iii"], true);
        assert_eq!(v["p"]["ii"], 0.03);
        let r = standard_bonferroni(&p, A).report(&p);
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["variant"].is_null() && v["lambda"].is_null());
    }
}
