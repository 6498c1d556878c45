//! Exhaustive risk analysis.
//!
//! [`explore`] computes every state reachable from an initial state by
//! breadth-first search over enabled events, deduplicating structurally equal
//! states. Risk questions are reachability questions over that graph. A
//! positive answer comes with a shortest witness: the BFS tree path to the
//! first state (in discovery order) that satisfies the query, followed by the
//! use event when the query is about usage.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{PilotError, Result};
use crate::exec::{DeviceKind, Event, SystemState, World};
use crate::policy::PilotPolicy;
use crate::scenario::{AssumptionSet, Question, Scenario};

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

/// A misbehavior the analysis should consider possible.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskAssumption {
    /// Devices of `from` may pass data to devices of `to` regardless of the
    /// attached policy.
    #[serde(rename = "illegal_transfer")]
    IllegalTransferCapability {
        from: String,
        to: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        datatype: Option<String>,
    },
    /// Devices of `entity` may use data they hold for `purpose` regardless of
    /// the attached policy.
    #[serde(rename = "illegal_use")]
    IllegalUseInterest {
        entity: String,
        purpose: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        datatype: Option<String>,
    },
}

impl RiskAssumption {
    fn datatype_matches(&self, world: &World, item: &str) -> bool {
        let filter = match self {
            RiskAssumption::IllegalTransferCapability { datatype, .. }
            | RiskAssumption::IllegalUseInterest { datatype, .. } => datatype,
        };
        filter.as_ref().is_none_or(|t| world.item_type_leq(item, t))
    }

    pub(crate) fn permits_transfer(&self, world: &World, sender: &str, receiver: &str, item: &str) -> bool {
        match self {
            RiskAssumption::IllegalTransferCapability { from, to, .. } => {
                world.device_entity_leq(sender, from)
                    && world.device_entity_leq(receiver, to)
                    && self.datatype_matches(world, item)
            }
            _ => false,
        }
    }

    pub(crate) fn permits_use(&self, world: &World, device: &str, item: &str, purpose: &str) -> bool {
        match self {
            RiskAssumption::IllegalUseInterest { entity, purpose: p, .. } => {
                world.device_entity_leq(device, entity)
                    && world.hierarchies.purposes.leq(purpose, p).unwrap_or(false)
                    && self.datatype_matches(world, item)
            }
            _ => false,
        }
    }

    pub fn validate(&self, world: &World) -> Result<()> {
        let hs = &world.hierarchies;
        match self {
            RiskAssumption::IllegalTransferCapability { from, to, datatype } => {
                hs.entities.check(from)?;
                hs.entities.check(to)?;
                datatype.iter().try_for_each(|t| hs.datatypes.check(t))
            }
            RiskAssumption::IllegalUseInterest {
                entity,
                purpose,
                datatype,
            } => {
                hs.entities.check(entity)?;
                hs.purposes.check(purpose)?;
                datatype.iter().try_for_each(|t| hs.datatypes.check(t))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Query {
    /// Can a device of `entity` end up holding `item`?
    CanReceive { entity: String, item: String },
    /// Can a device of `entity` use `item` for `purpose`?
    CanUse {
        entity: String,
        item: String,
        purpose: String,
    },
    /// Can a device of `entity` use `item` for a purpose not below any of
    /// `purposes`?
    CanUseOtherThan {
        entity: String,
        item: String,
        purposes: BTreeSet<String>,
    },
}

impl Query {
    pub fn validate(&self, world: &World) -> Result<()> {
        let hs = &world.hierarchies;
        let (entity, item) = match self {
            Query::CanReceive { entity, item } => (entity, item),
            Query::CanUse { entity, item, purpose } => {
                hs.purposes.check(purpose)?;
                (entity, item)
            }
            Query::CanUseOtherThan { entity, item, purposes } => {
                purposes.iter().try_for_each(|p| hs.purposes.check(p))?;
                (entity, item)
            }
        };
        hs.entities.check(entity)?;
        if !world.items.contains_key(item) {
            return Err(PilotError::UnknownReference {
                kind: "item",
                id: item.clone(),
            });
        }
        Ok(())
    }

    pub fn item(&self) -> &str {
        match self {
            Query::CanReceive { item, .. } | Query::CanUse { item, .. } | Query::CanUseOtherThan { item, .. } => item,
        }
    }

    pub fn entity(&self) -> &str {
        match self {
            Query::CanReceive { entity, .. } | Query::CanUse { entity, .. } | Query::CanUseOtherThan { entity, .. } => {
                entity
            }
        }
    }

    /// Purposes a usage query asks about.
    fn purposes(&self, world: &World) -> Vec<String> {
        let h = &world.hierarchies.purposes;
        match self {
            Query::CanReceive { .. } => Vec::new(),
            Query::CanUse { purpose, .. } => vec![purpose.clone()],
            Query::CanUseOtherThan { purposes, .. } => h
                .labels()
                .iter()
                .filter(|q| purposes.iter().all(|p| !h.leq(q, p).unwrap_or(false)))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
}

impl std::fmt::Display for Answer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Answer::Yes => "Yes",
            Answer::No => "No",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub answer: Answer,
    /// Present iff the answer is yes.
    pub witness: Option<Vec<Event>>,
    pub states_explored: usize,
    /// Yes because the queried entity owns the item; the witness is empty.
    #[serde(default)]
    pub by_ownership: bool,
    /// False iff the queried behavior is reachable in a way the owner's own
    /// policies do not license.
    pub respected: bool,
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }
}

/// Reachable states and the transitions between them.
#[derive(Clone, Debug)]
pub struct StateGraph {
    /// In BFS discovery order; index 0 is the initial state.
    pub states: Vec<SystemState>,
    /// `(from, event, to)`, including the self-loops of use events.
    pub edges: Vec<(usize, Event, usize)>,
    parents: Vec<Option<(usize, Event)>>,
    depths: Vec<usize>,
}

impl StateGraph {
    pub fn initial(&self) -> &SystemState {
        &self.states[0]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn depth(&self, state: usize) -> usize {
        self.depths[state]
    }

    /// Length of the longest shortest path from the initial state.
    pub fn diameter(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    /// Events leading from the initial state to `state` along the BFS tree.
    pub fn path_to(&self, mut state: usize) -> Vec<Event> {
        let mut out = Vec::new();
        while let Some((parent, ev)) = &self.parents[state] {
            out.push(ev.clone());
            state = *parent;
        }
        out.reverse();
        out
    }
}

/// All enabled events in `st`, sorted by the tie-breaking order.
pub fn enumerate_events(world: &World, st: &SystemState) -> Vec<Event> {
    let dcs: Vec<&str> = world
        .devices
        .values()
        .filter(|d| d.kind == DeviceKind::DC)
        .map(|d| d.id.as_str())
        .collect();
    let purposes = world.hierarchies.purposes.labels();
    let mut out = BTreeSet::new();
    let mut push = |ev: Event| {
        if world.enabled(&ev, st) {
            out.insert(ev);
        }
    };

    for &s in &dcs {
        for p in st.own_policies(s) {
            for r in world.devices.keys().filter(|r| r.as_str() != s) {
                push(Event::Request {
                    sender: s.to_string(),
                    receiver: r.clone(),
                    datatype: p.datatype.clone(),
                    policy: p.clone(),
                });
            }
        }
    }
    for item in world.items.values() {
        if !world.device(&item.owner).is_some_and(|d| d.kind == DeviceKind::DS) {
            continue;
        }
        for &r in &dcs {
            push(Event::Send {
                sender: item.owner.clone(),
                receiver: r.to_string(),
                item: item.id.clone(),
            });
        }
    }
    for &s in &dcs {
        let held: BTreeSet<&str> = st.received_by(s).map(|r| r.item.as_str()).collect();
        for &i in &held {
            for &r in dcs.iter().filter(|&&r| r != s) {
                push(Event::Transfer {
                    sender: s.to_string(),
                    receiver: r.to_string(),
                    item: i.to_string(),
                });
                if !world.assumptions.is_empty() {
                    push(Event::IllegalTransfer {
                        sender: s.to_string(),
                        receiver: r.to_string(),
                        item: i.to_string(),
                    });
                }
            }
            for pur in purposes {
                push(Event::Use {
                    device: s.to_string(),
                    item: i.to_string(),
                    purpose: pur.clone(),
                });
                if !world.assumptions.is_empty() {
                    push(Event::IllegalUse {
                        device: s.to_string(),
                        item: i.to_string(),
                        purpose: pur.clone(),
                    });
                }
            }
        }
    }
    out.into_iter().collect()
}

pub fn explore(world: &World, initial: SystemState) -> Result<StateGraph> {
    explore_with_budget(world, initial, DEFAULT_STATE_BUDGET)
}

pub fn explore_with_budget(world: &World, initial: SystemState, budget: usize) -> Result<StateGraph> {
    let mut g = StateGraph {
        states: vec![initial.clone()],
        edges: Vec::new(),
        parents: vec![None],
        depths: vec![0],
    };
    let mut index: HashMap<SystemState, usize> = HashMap::from([(initial, 0)]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        for ev in enumerate_events(world, &g.states[k]) {
            let next = world.apply(&ev, &g.states[k])?;
            let to = match index.get(&next) {
                Some(&to) => to,
                None => {
                    if g.states.len() >= budget {
                        return Err(PilotError::BudgetExceeded { limit: budget });
                    }
                    let to = g.states.len();
                    index.insert(next.clone(), to);
                    g.states.push(next);
                    g.parents.push(Some((k, ev.clone())));
                    g.depths.push(g.depths[k] + 1);
                    queue.push_back(to);
                    to
                }
            };
            g.edges.push((k, ev, to));
        }
    }
    Ok(g)
}

/// Devices whose entity is below `entity`, in id order.
fn devices_of<'a>(world: &'a World, entity: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    world
        .devices
        .keys()
        .map(String::as_str)
        .filter(move |d| world.device_entity_leq(d, entity))
}

/// The owner's own policies that apply to the item's datatype.
fn owner_policies<'a>(world: &'a World, g: &'a StateGraph, item: &'a str) -> Vec<&'a PilotPolicy> {
    let Some(it) = world.items.get(item) else {
        return Vec::new();
    };
    g.initial()
        .own_policies(&it.owner)
        .filter(|p| world.item_type_leq(item, &p.datatype))
        .collect()
}

/// Whether the owner's policies let `device` receive the item (and, when
/// `purpose` is given, use it for that purpose).
fn licensed(world: &World, policies: &[&PilotPolicy], device: &str, purpose: Option<&str>) -> bool {
    policies.iter().any(|p| {
        std::iter::once(&p.dcr).chain(&p.transfers).any(|r| {
            world.device_entity_leq(device, &r.entity)
                && purpose.is_none_or(|pur| r.dur.allows(pur, &world.hierarchies.purposes).unwrap_or(false))
        })
    })
}

/// Use events by `device` on `item` for `purpose` enabled in `st`.
fn enabled_use(world: &World, st: &SystemState, device: &str, item: &str, purpose: &str) -> Option<Event> {
    [
        Event::Use {
            device: device.into(),
            item: item.into(),
            purpose: purpose.into(),
        },
        Event::IllegalUse {
            device: device.into(),
            item: item.into(),
            purpose: purpose.into(),
        },
    ]
    .into_iter()
    .find(|ev| world.enabled(ev, st))
}

pub fn answer(query: &Query, g: &StateGraph, world: &World) -> Result<Verdict> {
    query.validate(world)?;
    let item = query.item();
    let entity = query.entity();
    let owner = &world.items[item].owner;
    let policies = owner_policies(world, g, item);
    let explored = g.len();

    if let Query::CanReceive { .. } = query {
        if world.device_entity_leq(owner, entity) {
            return Ok(Verdict {
                answer: Answer::Yes,
                witness: Some(Vec::new()),
                states_explored: explored,
                by_ownership: true,
                respected: true,
            });
        }
        let holders = |st: &SystemState| -> Vec<String> {
            devices_of(world, entity)
                .filter(|d| st.holds_received(d, item))
                .map(String::from)
                .collect()
        };
        let first = (0..g.len()).find(|&k| !holders(&g.states[k]).is_empty());
        let violated = g.states.iter().any(|st| {
            holders(st)
                .iter()
                .any(|d| d != owner && !licensed(world, &policies, d, None))
        });
        return Ok(match first {
            Some(k) => Verdict {
                answer: Answer::Yes,
                witness: Some(g.path_to(k)),
                states_explored: explored,
                by_ownership: false,
                respected: !violated,
            },
            None => no(explored),
        });
    }

    let purposes = query.purposes(world);
    let devices: Vec<&str> = devices_of(world, entity).collect();
    let mut best: Option<(usize, Event)> = None;
    let mut violated = false;
    for (k, st) in g.states.iter().enumerate() {
        for pur in &purposes {
            for &d in &devices {
                if let Some(ev) = enabled_use(world, st, d, item, pur) {
                    if !licensed(world, &policies, d, Some(pur)) {
                        violated = true;
                    }
                    if best.is_none() {
                        best = Some((k, ev));
                    }
                }
            }
        }
    }
    Ok(match best {
        Some((k, ev)) => {
            let mut w = g.path_to(k);
            w.push(ev);
            Verdict {
                answer: Answer::Yes,
                witness: Some(w),
                states_explored: explored,
                by_ownership: false,
                respected: !violated,
            }
        }
        None => no(explored),
    })
}

fn no(explored: usize) -> Verdict {
    Verdict {
        answer: Answer::No,
        witness: None,
        states_explored: explored,
        by_ownership: false,
        respected: true,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnHeader {
    pub assumptions: String,
    pub variant: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub question: String,
    pub text: String,
    pub cells: Vec<Verdict>,
}

/// Verdicts for every question under every (assumption set, policy variant)
/// pair; columns are ordered assumption set first, then variant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictTable {
    pub columns: Vec<ColumnHeader>,
    pub rows: Vec<Row>,
}

pub fn answer_matrix(
    scenario: &Scenario,
    variants: &[Option<&str>],
    assumption_sets: &[AssumptionSet],
    questions: &[&Question],
) -> Result<VerdictTable> {
    let mut columns = Vec::new();
    let mut rows: Vec<Row> = questions
        .iter()
        .map(|q| Row {
            question: q.name.clone(),
            text: q.text.clone(),
            cells: Vec::new(),
        })
        .collect();
    if questions.is_empty() {
        return Ok(VerdictTable { columns, rows });
    }
    for set in assumption_sets {
        for variant in variants {
            let ids: Vec<&str> = set.ids.iter().map(String::as_str).collect();
            let (world, init) = scenario.instantiate(*variant, &ids)?;
            let g = explore(&world, init)?;
            columns.push(ColumnHeader {
                assumptions: set.name.clone(),
                variant: variant.unwrap_or("base").to_string(),
            });
            for (row, q) in rows.iter_mut().zip(questions) {
                row.cells.push(answer(&q.query, &g, &world)?);
            }
        }
    }
    Ok(VerdictTable { columns, rows })
}

/// Whether `witness` replays from `init` and ends in a state or use event
/// that satisfies `query`.
pub fn check_witness(query: &Query, witness: &[Event], world: &World, init: &SystemState) -> Result<bool> {
    query.validate(world)?;
    let item = query.item();
    let entity = query.entity();
    let (prefix, last_use) = match query {
        Query::CanReceive { .. } => (witness, None),
        _ => match witness.split_last() {
            Some((last, prefix)) => (prefix, Some(last)),
            None => return Ok(false),
        },
    };
    let mut st = init.clone();
    for ev in prefix {
        if !world.enabled(ev, &st) {
            return Ok(false);
        }
        st = world.apply(ev, &st)?;
    }
    Ok(match last_use {
        None if witness.is_empty() => world.device_entity_leq(&world.items[item].owner, entity),
        None => devices_of(world, entity).any(|d| st.holds_received(d, item)),
        Some(ev) => match ev.usage() {
            Some((d, i, pur)) => {
                i == item
                    && world.device_entity_leq(d, entity)
                    && query.purposes(world).iter().any(|p| p == pur)
                    && world.enabled(ev, &st)
            }
            None => false,
        },
    })
}

/// Plain-text grid: one row per question, one column per (assumption set,
/// variant). Answers that contradict the owner's policies carry a `*`.
impl std::fmt::Display for VerdictTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let heads: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{} / {}", c.assumptions, c.variant))
            .collect();
        let qw = self.rows.iter().map(|r| r.text.len()).chain([8]).max().unwrap_or(8);
        write!(f, "{:<qw$}", "Question")?;
        for h in &heads {
            write!(f, " | {h}")?;
        }
        writeln!(f)?;
        let mut red = false;
        for row in &self.rows {
            write!(f, "{:<qw$}", row.text)?;
            for (cell, h) in row.cells.iter().zip(&heads) {
                let mark = if cell.respected { "" } else { "*" };
                red |= !cell.respected;
                write!(f, " | {:<w$}", format!("{}{mark}", cell.answer), w = h.len())?;
            }
            writeln!(f)?;
        }
        if red {
            writeln!(f, "* contradicts the data owner's policy")?;
        }
        Ok(())
    }
}
