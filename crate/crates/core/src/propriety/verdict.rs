use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number that survives a JSON round trip even when infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(v) => Ok(Num(v)),
            Raw::S(s) => match s.as_str() {
                "inf" => Ok(Num(f64::INFINITY)),
                "-inf" => Ok(Num(f64::NEG_INFINITY)),
                "nan" => Ok(Num(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremCase {
    Case1,
    Case2,
    Theorem2,
    Corollary1,
    ProbitRemark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Overall {
    Proper,
    Improper,
    Undetermined,
}

impl fmt::Display for Overall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Overall::Proper => "PROPER",
            Overall::Improper => "IMPROPER",
            Overall::Undetermined => "UNDETERMINED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Holds,
    Fails,
    NotApplicable,
}

impl ConditionStatus {
    pub fn from_bool(b: bool) -> Self {
        if b {
            ConditionStatus::Holds
        } else {
            ConditionStatus::Fails
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub status: ConditionStatus,
    /// Human-readable statement of what was checked.
    pub detail: String,
    pub evidence: BTreeMap<String, Num>,
}

impl ConditionReport {
    pub fn new(status: ConditionStatus, detail: impl Into<String>) -> Self {
        Self {
            status,
            detail: detail.into(),
            evidence: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, v: f64) -> Self {
        self.evidence.insert(key.into(), Num(v));
        self
    }

    pub fn holds(&self) -> bool {
        self.status == ConditionStatus::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == ConditionStatus::Fails
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProprietyVerdict {
    pub theorem_case: TheoremCase,
    pub conditions: BTreeMap<String, ConditionReport>,
    /// Labels whose failure implies impropriety.
    pub necessary: Vec<String>,
    /// Labels that jointly imply propriety.
    pub sufficient: Vec<String>,
    pub overall: Overall,
    /// `2b₀ + SSE > 0`, when data were supplied.
    pub sample_guard: Option<bool>,
    pub notes: Vec<String>,
}

impl ProprietyVerdict {
    /// Classifies from the condition map: PROPER when every sufficient
    /// condition holds, IMPROPER when a necessary one fails, otherwise
    /// UNDETERMINED.
    pub fn assemble(
        theorem_case: TheoremCase,
        conditions: BTreeMap<String, ConditionReport>,
        necessary: &[&str],
        sufficient: &[&str],
        sample_guard: Option<bool>,
        mut notes: Vec<String>,
    ) -> Self {
        let status = |l: &str| conditions.get(l).map(|c| c.status);
        let all_sufficient = !sufficient.is_empty()
            && sufficient
                .iter()
                .all(|l| matches!(status(l), Some(ConditionStatus::Holds)));
        let failed_necessary: Vec<&str> = necessary
            .iter()
            .copied()
            .filter(|l| matches!(status(l), Some(ConditionStatus::Fails)))
            .collect();
        let mut overall = if all_sufficient {
            if !failed_necessary.is_empty() {
                notes.push(format!(
                    "numerical conflict: sufficient set holds while necessary {failed_necessary:?} fails"
                ));
            }
            Overall::Proper
        } else if !failed_necessary.is_empty() {
            Overall::Improper
        } else {
            Overall::Undetermined
        };
        if overall == Overall::Proper && sample_guard == Some(false) {
            notes.push("2b₀ + SSE = 0: the data fall in the null set excluded by the theorem".into());
            overall = Overall::Undetermined;
        }
        Self {
            theorem_case,
            conditions,
            necessary: necessary.iter().map(|s| s.to_string()).collect(),
            sufficient: sufficient.iter().map(|s| s.to_string()).collect(),
            overall,
            sample_guard,
            notes,
        }
    }

    pub fn condition(&self, label: &str) -> Option<&ConditionReport> {
        self.conditions.get(label)
    }

    /// Labels of conditions that failed.
    pub fn failed(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|(_, c)| c.fails())
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(entries: &[(&str, bool)]) -> BTreeMap<String, ConditionReport> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), ConditionReport::new(ConditionStatus::from_bool(*v), *k)))
            .collect()
    }

    #[test]
    fn classification_logic() {
        let nec = ["a", "b1"];
        let suf = ["a", "b2"];
        let v = ProprietyVerdict::assemble(TheoremCase::Case2, map(&[("a", true), ("b1", true), ("b2", true)]), &nec, &suf, None, vec![]);
        assert_eq!(v.overall, Overall::Proper);
        let v = ProprietyVerdict::assemble(TheoremCase::Case2, map(&[("a", false), ("b1", true), ("b2", true)]), &nec, &suf, None, vec![]);
        assert_eq!(v.overall, Overall::Improper);
        assert_eq!(v.failed(), vec!["a"]);
        let v = ProprietyVerdict::assemble(TheoremCase::Case2, map(&[("a", true), ("b1", true), ("b2", false)]), &nec, &suf, None, vec![]);
        assert_eq!(v.overall, Overall::Undetermined);
        let v = ProprietyVerdict::assemble(TheoremCase::Case2, map(&[("a", true), ("b1", true), ("b2", true)]), &nec, &suf, Some(false), vec![]);
        assert_eq!(v.overall, Overall::Undetermined);
    }

    #[test]
    fn json_round_trip_with_infinity() {
        let mut c = map(&[("d", false)]);
        c.get_mut("d").unwrap().evidence.insert("integral".into(), Num(f64::INFINITY));
        let v = ProprietyVerdict::assemble(TheoremCase::Case1, c, &["d"], &["e"], Some(true), vec![]);
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"IMPROPER\"") && s.contains("\"inf\""));
        let back: ProprietyVerdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
