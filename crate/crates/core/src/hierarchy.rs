//! Partial orders over entities, datatypes and purposes.
//!
//! A [`Hierarchy`] is a finite DAG of labels. The order relation is the
//! reflexive-transitive closure of its `(child, parent)` edges, computed once
//! at construction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{LabelKind, PilotError, Result};
use crate::policy::PilotPolicy;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hierarchy {
    kind: LabelKind,
    labels: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
    /// label -> every label it is below or equal to.
    up: BTreeMap<String, BTreeSet<String>>,
}

impl Hierarchy {
    pub fn new<L, E>(kind: LabelKind, labels: L, edges: E) -> Result<Self>
    where
        L: IntoIterator,
        L::Item: Into<String>,
        E: IntoIterator<Item = (String, String)>,
    {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        let edges: BTreeSet<(String, String)> = edges.into_iter().collect();
        for (child, parent) in &edges {
            for l in [child, parent] {
                if !labels.contains(l) {
                    return Err(PilotError::UnknownLabel { kind, label: l.clone() });
                }
            }
        }
        let up = closure(kind, &labels, &edges)?;
        Ok(Hierarchy {
            kind,
            labels,
            edges,
            up,
        })
    }

    /// A hierarchy with no edges: only reflexive order.
    pub fn flat<L>(kind: LabelKind, labels: L) -> Self
    where
        L: IntoIterator,
        L::Item: Into<String>,
    {
        Hierarchy::new(kind, labels, std::iter::empty()).expect("flat hierarchy is acyclic")
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn labels(&self) -> &BTreeSet<String> {
        &self.labels
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn check(&self, label: &str) -> Result<()> {
        if self.contains(label) {
            Ok(())
        } else {
            Err(PilotError::UnknownLabel {
                kind: self.kind,
                label: label.to_string(),
            })
        }
    }

    /// `a ≤ b` in this order.
    pub fn leq(&self, a: &str, b: &str) -> Result<bool> {
        self.check(b)?;
        match self.up.get(a) {
            Some(ups) => Ok(ups.contains(b)),
            None => Err(PilotError::UnknownLabel {
                kind: self.kind,
                label: a.to_string(),
            }),
        }
    }

    /// Strict order: `a ≤ b` and `a ≠ b`.
    pub fn lt(&self, a: &str, b: &str) -> Result<bool> {
        Ok(a != b && self.leq(a, b)?)
    }

    /// The smaller of two comparable labels.
    pub fn min<'a>(&self, a: &'a str, b: &'a str) -> Result<&'a str> {
        if self.leq(a, b)? {
            Ok(a)
        } else if self.leq(b, a)? {
            Ok(b)
        } else {
            Err(PilotError::Incomparable {
                kind: self.kind,
                a: a.to_string(),
                b: b.to_string(),
            })
        }
    }

    /// `a` if `a ≤ b`, otherwise `b`, even when the two are incomparable.
    pub fn min_literal<'a>(&self, a: &'a str, b: &'a str) -> Result<&'a str> {
        self.check(b)?;
        Ok(if self.leq(a, b)? { a } else { b })
    }
}

fn closure(
    kind: LabelKind,
    labels: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (c, p) in edges {
        parents.entry(c.as_str()).or_default().push(p.as_str());
    }
    let mut up = BTreeMap::new();
    for start in labels {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start.as_str()];
        while let Some(l) = stack.pop() {
            if !seen.insert(l.to_string()) {
                continue;
            }
            for &p in parents.get(l).map(Vec::as_slice).unwrap_or(&[]) {
                if p == start {
                    return Err(PilotError::CyclicHierarchy {
                        kind,
                        label: start.clone(),
                    });
                }
                stack.push(p);
            }
        }
        up.insert(start.clone(), seen);
    }
    Ok(up)
}

#[derive(Serialize, Deserialize)]
struct HierarchyRepr {
    labels: BTreeSet<String>,
    #[serde(default)]
    edges: BTreeSet<(String, String)>,
}

/// The three orders a policy is interpreted against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hierarchies {
    pub entities: Hierarchy,
    pub datatypes: Hierarchy,
    pub purposes: Hierarchy,
}

impl Hierarchies {
    /// Flat hierarchies holding exactly the labels the policies mention.
    pub fn covering<'a, I: IntoIterator<Item = &'a PilotPolicy>>(policies: I) -> Hierarchies {
        let (mut e, mut t, mut p) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
        for pol in policies {
            let (a, b, c) = pol.labels();
            e.extend(a);
            t.extend(b);
            p.extend(c);
        }
        Hierarchies {
            entities: Hierarchy::flat(LabelKind::Entity, e),
            datatypes: Hierarchy::flat(LabelKind::Datatype, t),
            purposes: Hierarchy::flat(LabelKind::Purpose, p),
        }
    }

    pub fn get(&self, kind: LabelKind) -> &Hierarchy {
        match kind {
            LabelKind::Entity => &self.entities,
            LabelKind::Datatype => &self.datatypes,
            LabelKind::Purpose => &self.purposes,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HierarchiesRepr {
    entities: HierarchyRepr,
    datatypes: HierarchyRepr,
    purposes: HierarchyRepr,
}

impl Serialize for Hierarchies {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = |h: &Hierarchy| HierarchyRepr {
            labels: h.labels.clone(),
            edges: h.edges.clone(),
        };
        HierarchiesRepr {
            entities: repr(&self.entities),
            datatypes: repr(&self.datatypes),
            purposes: repr(&self.purposes),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Hierarchies {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = HierarchiesRepr::deserialize(d)?;
        let build = |kind, h: HierarchyRepr| Hierarchy::new(kind, h.labels, h.edges);
        Ok(Hierarchies {
            entities: build(LabelKind::Entity, r.entities).map_err(serde::de::Error::custom)?,
            datatypes: build(LabelKind::Datatype, r.datatypes).map_err(serde::de::Error::custom)?,
            purposes: build(LabelKind::Purpose, r.purposes).map_err(serde::de::Error::custom)?,
        })
    }
}
