use super::hyper::Hyper;
use super::spec::ReFamily;
use crate::error::{Error, Result};

/// One-way random-intercept probit model: group `i` has `successes` and
/// `failures` among its binary outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbitSpec {
    group_counts: Vec<(u64, u64)>,
    a1: Hyper,
    re_family: ReFamily,
}

impl ProbitSpec {
    pub fn new(group_counts: Vec<(u64, u64)>, a1: Hyper, re_family: ReFamily) -> Result<Self> {
        match &re_family {
            ReFamily::Tpn { .. } | ReFamily::Fsn { .. } => {}
            other => {
                return Err(Error::Configuration(format!(
                    "probit random effects must be TPN or FSN, got {}",
                    other.name()
                )))
            }
        }
        if group_counts.is_empty() {
            return Err(Error::Configuration("probit model needs at least one group".into()));
        }
        re_family.validate()?;
        Ok(Self {
            group_counts,
            a1,
            re_family,
        })
    }

    pub fn group_counts(&self) -> &[(u64, u64)] {
        &self.group_counts
    }
    pub fn a1(&self) -> Hyper {
        self.a1
    }
    pub fn re_family(&self) -> &ReFamily {
        &self.re_family
    }
    pub fn r(&self) -> usize {
        self.group_counts.len()
    }

    /// Number of groups with at least one success and one failure.
    pub fn mixed_groups(&self) -> usize {
        self.group_counts.iter().filter(|(s, f)| *s > 0 && *f > 0).count()
    }
}
