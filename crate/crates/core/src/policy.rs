//! PILOT policies and their subsumption / join algebra.
//!
//! Subsumption reads "at least as restrictive as": `p ⊑ q` means every
//! collection, use or transfer licensed by `p` is also licensed by `q`.
//! Conditions are compared with [`entails`], where the more restrictive rule
//! carries the stronger condition.
//!
//! The join of two policies is their most permissive common restriction.
//! [`JoinMode::Strict`] refuses to join incomparable entities or datatypes,
//! which keeps the join below both operands. [`JoinMode::Literal`] picks the
//! second operand in that case.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::condition::{entails, Condition};
use crate::error::Result;
use crate::hierarchy::{Hierarchies, Hierarchy};
use crate::timestamp::Timestamp;

/// Allowed purposes and the retention deadline.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataUsageRule {
    pub purposes: BTreeSet<String>,
    pub retention: Timestamp,
}

/// Condition checked by the sender, receiving entity, and how it may use
/// the data.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataCommunicationRule {
    pub condition: Condition,
    pub entity: String,
    pub dur: DataUsageRule,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PilotPolicy {
    pub datatype: String,
    pub dcr: DataCommunicationRule,
    #[serde(default)]
    pub transfers: BTreeSet<DataCommunicationRule>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinMode {
    #[default]
    Strict,
    Literal,
}

impl DataUsageRule {
    pub fn new<I, S>(purposes: I, retention: Timestamp) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        DataUsageRule {
            purposes: purposes.into_iter().map(Into::into).collect(),
            retention,
        }
    }

    /// Every purpose is covered by some purpose of `other`, and the data is
    /// kept no longer.
    pub fn subsumes(&self, other: &DataUsageRule, purposes: &Hierarchy) -> Result<bool> {
        check_purposes(&self.purposes, purposes)?;
        check_purposes(&other.purposes, purposes)?;
        if self.retention > other.retention {
            return Ok(false);
        }
        for p in &self.purposes {
            if !covered(p, &other.purposes, purposes)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn join(&self, other: &DataUsageRule, purposes: &Hierarchy) -> Result<DataUsageRule> {
        Ok(DataUsageRule {
            purposes: purpose_cap(&self.purposes, &other.purposes, purposes)?,
            retention: self.retention.min(other.retention),
        })
    }

    /// Whether `purpose` is allowed, i.e. below one of the rule's purposes.
    pub fn allows(&self, purpose: &str, purposes: &Hierarchy) -> Result<bool> {
        covered(purpose, &self.purposes, purposes)
    }
}

fn covered(p: &str, by: &BTreeSet<String>, h: &Hierarchy) -> Result<bool> {
    for q in by {
        if h.leq(p, q)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn check_purposes(ps: &BTreeSet<String>, h: &Hierarchy) -> Result<()> {
    ps.iter().try_for_each(|p| h.check(p))
}

/// `(P ∩ Q) ∪ { p ∈ P | ∃ q ∈ Q. p < q }`.
///
/// Not symmetric: strictly-smaller purposes are only kept from `p`.
pub fn purpose_cap(p: &BTreeSet<String>, q: &BTreeSet<String>, h: &Hierarchy) -> Result<BTreeSet<String>> {
    check_purposes(p, h)?;
    check_purposes(q, h)?;
    let mut out: BTreeSet<String> = p.intersection(q).cloned().collect();
    for a in p {
        for b in q {
            if h.lt(a, b)? {
                out.insert(a.clone());
                break;
            }
        }
    }
    Ok(out)
}

impl DataCommunicationRule {
    pub fn subsumes(&self, other: &DataCommunicationRule, hs: &Hierarchies) -> Result<bool> {
        let entity = hs.entities.leq(&self.entity, &other.entity)?;
        let dur = self.dur.subsumes(&other.dur, &hs.purposes)?;
        Ok(entity && dur && entails(&self.condition, &other.condition))
    }

    pub fn join(
        &self,
        other: &DataCommunicationRule,
        hs: &Hierarchies,
        mode: JoinMode,
    ) -> Result<DataCommunicationRule> {
        let entity = po_min(&hs.entities, &self.entity, &other.entity, mode)?;
        Ok(DataCommunicationRule {
            condition: self.condition.clone().and(other.condition.clone()),
            entity: entity.to_string(),
            dur: self.dur.join(&other.dur, &hs.purposes)?,
        })
    }

    /// Same rule with its condition normalized.
    pub fn normalized(&self) -> DataCommunicationRule {
        DataCommunicationRule {
            condition: self.condition.normalize(),
            ..self.clone()
        }
    }
}

/// Minimum of two labels. Strict mode fails on incomparable labels.
pub fn po_min<'a>(h: &Hierarchy, a: &'a str, b: &'a str, mode: JoinMode) -> Result<&'a str> {
    match mode {
        JoinMode::Strict => h.min(a, b),
        JoinMode::Literal => h.min_literal(a, b),
    }
}

impl PilotPolicy {
    pub fn subsumes(&self, other: &PilotPolicy, hs: &Hierarchies) -> Result<bool> {
        if !hs.datatypes.leq(&self.datatype, &other.datatype)? {
            return Ok(false);
        }
        if !self.dcr.subsumes(&other.dcr, hs)? {
            return Ok(false);
        }
        'outer: for t in &self.transfers {
            for u in &other.transfers {
                if t.subsumes(u, hs)? {
                    continue 'outer;
                }
            }
            return Ok(false);
        }
        Ok(true)
    }

    pub fn join(&self, other: &PilotPolicy, hs: &Hierarchies) -> Result<PilotPolicy> {
        self.join_with(other, hs, JoinMode::Strict)
    }

    pub fn join_with(&self, other: &PilotPolicy, hs: &Hierarchies, mode: JoinMode) -> Result<PilotPolicy> {
        let datatype = po_min(&hs.datatypes, &self.datatype, &other.datatype, mode)?;
        let dcr = self.dcr.join(&other.dcr, hs, mode)?;
        let mut transfers = BTreeSet::new();
        for t in &self.transfers {
            for u in &other.transfers {
                if t.subsumes(u, hs)? {
                    transfers.insert(t.join(u, hs, mode)?);
                }
            }
        }
        Ok(PilotPolicy {
            datatype: datatype.to_string(),
            dcr,
            transfers,
        })
    }

    /// The policy with every condition normalized.
    pub fn normalized(&self) -> PilotPolicy {
        PilotPolicy {
            datatype: self.datatype.clone(),
            dcr: self.dcr.normalized(),
            transfers: self.transfers.iter().map(|t| t.normalized()).collect(),
        }
    }

    /// The policy a transfer rule licenses: `tr` in place of the collection
    /// rule, same datatype and transfer set.
    pub fn for_transfer(&self, tr: &DataCommunicationRule) -> PilotPolicy {
        PilotPolicy {
            datatype: self.datatype.clone(),
            dcr: tr.clone(),
            transfers: self.transfers.clone(),
        }
    }

    /// Every label and function symbol is declared.
    pub fn validate(&self, hs: &Hierarchies) -> Result<()> {
        hs.datatypes.check(&self.datatype)?;
        for r in std::iter::once(&self.dcr).chain(&self.transfers) {
            hs.entities.check(&r.entity)?;
            check_purposes(&r.dur.purposes, &hs.purposes)?;
            r.condition.check_symbols()?;
        }
        Ok(())
    }

    /// Entities, datatypes and purposes mentioned by the policy.
    pub fn labels(&self) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
        let mut ents = BTreeSet::new();
        let mut purps = BTreeSet::new();
        for r in std::iter::once(&self.dcr).chain(&self.transfers) {
            ents.insert(r.entity.clone());
            purps.extend(r.dur.purposes.iter().cloned());
        }
        (ents, BTreeSet::from([self.datatype.clone()]), purps)
    }
}

impl fmt::Display for PilotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::text::render_policy(self))
    }
}
