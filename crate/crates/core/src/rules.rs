//! Interval rules, space-partitioning rule sets, rendering and the JSON
//! export format.
//!
//! Every interval is half-open, `(lower, upper]`. Splitting an interval at `t`
//! gives `(lower, t]` and `(t, upper]`, so a point on a split threshold
//! belongs to the left child.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::FitStatus;

/// The half-open interval `(lower, upper]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Malformed(format!("empty interval ({lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x <= self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
}

/// A conjunction of per-attribute intervals with the class it predicts and
/// the class histogram of the training points it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// Constrained attributes only; an absent attribute is unconstrained.
    pub predicates: BTreeMap<usize, Interval>,
    pub label: usize,
    pub n_covered: usize,
    pub histogram: Vec<usize>,
}

/// Majority class, ties going to the smaller class id.
pub fn majority_label(histogram: &[usize]) -> usize {
    let mut best = 0;
    for (c, &count) in histogram.iter().enumerate() {
        if count > histogram[best] {
            best = c;
        }
    }
    best
}

impl Rule {
    /// The unconstrained rule covering everything.
    pub fn root(histogram: Vec<usize>) -> Self {
        Self {
            predicates: BTreeMap::new(),
            label: 0,
            n_covered: 0,
            histogram: Vec::new(),
        }
        .with_histogram(histogram)
    }

    /// Replaces coverage statistics and relabels by majority.
    pub fn with_histogram(mut self, histogram: Vec<usize>) -> Self {
        self.n_covered = histogram.iter().sum();
        self.label = majority_label(&histogram);
        self.histogram = histogram;
        self
    }

    /// Number of distinct constrained attributes.
    pub fn length(&self) -> usize {
        self.predicates.len()
    }

    pub fn interval(&self, attr: usize) -> Interval {
        self.predicates.get(&attr).copied().unwrap_or(Interval::UNBOUNDED)
    }

    pub fn constrains(&self, attr: usize) -> bool {
        self.predicates.contains_key(&attr)
    }

    /// Splits at `threshold` on `attr` into `(lower, t]` and `(t, upper]`.
    /// Both children carry empty histograms; the caller fills them from the
    /// covered data.
    pub fn refine(&self, attr: usize, threshold: f64) -> Result<(Rule, Rule)> {
        let iv = self.interval(attr);
        if !threshold.is_finite() || threshold <= iv.lower || threshold >= iv.upper {
            return Err(Error::ThresholdOutside {
                attr,
                threshold,
                lower: iv.lower,
                upper: iv.upper,
            });
        }
        let empty = vec![0; self.histogram.len()];
        let mut left = self.clone().with_histogram(empty.clone());
        let mut right = self.clone().with_histogram(empty);
        left.predicates.insert(
            attr,
            Interval {
                lower: iv.lower,
                upper: threshold,
            },
        );
        right.predicates.insert(
            attr,
            Interval {
                lower: threshold,
                upper: iv.upper,
            },
        );
        Ok((left, right))
    }

    /// Whether every constrained coordinate of `x` lies in its interval.
    pub fn covers(&self, x: &[f64]) -> Result<bool> {
        if let Some((&attr, _)) = self.predicates.iter().next_back() {
            if attr >= x.len() {
                return Err(Error::DimensionMismatch {
                    expected: attr + 1,
                    got: x.len(),
                });
            }
        }
        Ok(self.covers_unchecked(x))
    }

    pub(crate) fn covers_unchecked(&self, x: &[f64]) -> bool {
        self.predicates.iter().all(|(&a, iv)| iv.contains(x[a]))
    }
}

/// Leaves of one binary interval tree; every point is covered by exactly one
/// rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub attributes: Vec<String>,
    pub class_count: usize,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(attributes: Vec<String>, class_count: usize, rules: Vec<Rule>) -> Self {
        Self {
            attributes,
            class_count,
            rules,
        }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Sum of rule lengths.
    pub fn total_length(&self) -> usize {
        self.rules.iter().map(Rule::length).sum()
    }

    pub fn max_length(&self) -> usize {
        self.rules.iter().map(Rule::length).max().unwrap_or(0)
    }

    /// Index of the rule covering `x`.
    pub fn covering_rule(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.attributes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.attributes.len(),
                got: x.len(),
            });
        }
        self.rules
            .iter()
            .position(|r| r.covers_unchecked(x))
            .ok_or(Error::Uncovered)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.rules[self.covering_rule(x)?].label)
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.rows().map(|row| self.predict(row)).collect()
    }

    /// Human-readable name of a class.
    pub fn class_name(&self, class: usize) -> String {
        class_name(self.class_count, class)
    }

    /// One line per rule, e.g. `-2 < x1 <= 2 => inlier`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&self.render_rule(rule));
            out.push('\n');
        }
        out
    }

    pub fn render_rule(&self, rule: &Rule) -> String {
        let clauses: Vec<String> = rule
            .predicates
            .iter()
            .map(|(&a, iv)| {
                let name = self.attributes.get(a).cloned().unwrap_or_else(|| format!("x{}", a + 1));
                match (iv.lower.is_finite(), iv.upper.is_finite()) {
                    (true, true) => format!("{} < {name} <= {}", fmt_num(iv.lower), fmt_num(iv.upper)),
                    (true, false) => format!("{name} > {}", fmt_num(iv.lower)),
                    (false, true) => format!("{name} <= {}", fmt_num(iv.upper)),
                    (false, false) => format!("{name} any"),
                }
            })
            .collect();
        let lhs = if clauses.is_empty() {
            "TRUE".to_string()
        } else {
            clauses.join(" AND ")
        };
        format!("{lhs} => {}", self.class_name(rule.label))
    }

    pub fn to_document(&self) -> RuleSetDocument {
        RuleSetDocument {
            format: RULES_FORMAT.to_string(),
            version: FORMAT_VERSION,
            info: None,
            attributes: self.attributes.clone(),
            class_count: self.class_count,
            rules: self
                .rules
                .iter()
                .enumerate()
                .map(|(id, r)| RuleRecord {
                    id,
                    predicates: r
                        .predicates
                        .iter()
                        .map(|(&attr, iv)| PredicateRecord {
                            attr,
                            lower: iv.lower,
                            upper: iv.upper,
                        })
                        .collect(),
                    label: r.label,
                    n_covered: r.n_covered,
                    histogram: r.histogram.clone(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &RuleSetDocument) -> Result<RuleSet> {
        if doc.format != RULES_FORMAT {
            return Err(Error::Malformed(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::Malformed(format!("unsupported version {}", doc.version)));
        }
        let d = doc.attributes.len();
        if d == 0 || doc.class_count < 2 {
            return Err(Error::Malformed("need attributes and at least two classes".into()));
        }
        if doc.rules.is_empty() {
            return Err(Error::Malformed("rule set has no rules".into()));
        }
        let mut ids = BTreeSet::new();
        let mut rules = Vec::with_capacity(doc.rules.len());
        for rec in &doc.rules {
            if !ids.insert(rec.id) {
                return Err(Error::Malformed(format!("duplicate rule id {}", rec.id)));
            }
            if rec.histogram.len() != doc.class_count {
                return Err(Error::Malformed(format!("rule {}: histogram length", rec.id)));
            }
            if rec.histogram.iter().sum::<usize>() != rec.n_covered {
                return Err(Error::Malformed(format!(
                    "rule {}: histogram does not sum to n_covered",
                    rec.id
                )));
            }
            if rec.label >= doc.class_count {
                return Err(Error::Malformed(format!("rule {}: label out of range", rec.id)));
            }
            let mut predicates = BTreeMap::new();
            for p in &rec.predicates {
                if p.attr >= d {
                    return Err(Error::Malformed(format!(
                        "rule {}: attribute {} out of range",
                        rec.id, p.attr
                    )));
                }
                let iv =
                    Interval::new(p.lower, p.upper).map_err(|e| Error::Malformed(format!("rule {}: {e}", rec.id)))?;
                if iv.is_unbounded() {
                    return Err(Error::Malformed(format!(
                        "rule {}: unbounded predicate on attribute {}",
                        rec.id, p.attr
                    )));
                }
                if predicates.insert(p.attr, iv).is_some() {
                    return Err(Error::Malformed(format!(
                        "rule {}: attribute {} constrained twice",
                        rec.id, p.attr
                    )));
                }
            }
            rules.push(Rule {
                predicates,
                label: rec.label,
                n_covered: rec.n_covered,
                histogram: rec.histogram.clone(),
            });
        }
        Ok(RuleSet::new(doc.attributes.clone(), doc.class_count, rules))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<RuleSet> {
        let doc: RuleSetDocument = serde_json::from_str(text)?;
        RuleSet::from_document(&doc)
    }
}

pub(crate) fn class_name(class_count: usize, class: usize) -> String {
    match (class_count, class) {
        (2, 0) => "inlier".into(),
        (2, 1) => "outlier".into(),
        (_, c) => format!("class {c}"),
    }
}

/// Compact decimal for rendering; exports keep full precision.
fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" || s == "0" {
        // too small for four decimals
        return format!("{v:.3e}");
    }
    s.to_string()
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub const RULES_FORMAT: &str = "stair-rules";
pub const FORMAT_VERSION: u32 = 1;

/// Provenance stored alongside an exported rule set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub method: String,
    pub status: FitStatus,
    pub score_kind: crate::ScoreKind,
    pub score: f64,
    /// Score threshold the learner targeted, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSetDocument {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<ModelInfo>,
    pub attributes: Vec<String>,
    pub class_count: usize,
    pub rules: Vec<RuleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub id: usize,
    pub predicates: Vec<PredicateRecord>,
    pub label: usize,
    pub n_covered: usize,
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateRecord {
    pub attr: usize,
    #[serde(with = "bound")]
    pub lower: f64,
    #[serde(with = "bound")]
    pub upper: f64,
}

/// Finite bounds as JSON numbers, infinite ones as `"-inf"` / `"+inf"`.
pub(crate) mod bound {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("+inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| de::Error::custom(format!("bad bound `{other}`"))),
            },
        }
    }
}
