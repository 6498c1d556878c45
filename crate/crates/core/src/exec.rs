//! Abstract execution model: system states and the events that change them.
//!
//! A state is the triple of per-device valuations, policy bases and
//! received-data sets. Events only ever add to a state, so over a finite
//! scenario the reachable state space is finite.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::RiskAssumption;
use crate::condition::{Valuation, Value};
use crate::error::{PilotError, Result};
use crate::hierarchy::Hierarchies;
use crate::policy::{DataCommunicationRule, PilotPolicy};
use crate::timestamp::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    /// Data subject.
    DS,
    /// Data controller.
    DC,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Device {
    pub id: String,
    pub entity: String,
    pub kind: DeviceKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataItem {
    pub id: String,
    pub datatype: String,
    pub owner: String,
    /// `None` is the undefined value.
    #[serde(default)]
    pub value: Option<Value>,
}

/// The single logical instant at which every event of an analysis happens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockPolicy {
    pub now: Timestamp,
}

/// Policy attached to received data.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachedPolicy {
    Policy(PilotPolicy),
    /// Data obtained through an illegal transfer by a receiver that declared
    /// no policy of its own. Licenses nothing.
    Unrestricted,
}

impl AttachedPolicy {
    pub fn policy(&self) -> Option<&PilotPolicy> {
        match self {
            AttachedPolicy::Policy(p) => Some(p),
            AttachedPolicy::Unrestricted => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Received {
    pub sender: String,
    pub item: String,
    pub policy: AttachedPolicy,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SystemState {
    /// device -> item -> value
    pub valuation: BTreeMap<String, BTreeMap<String, Value>>,
    /// device -> (origin device, policy)
    pub policies: BTreeMap<String, BTreeSet<(String, PilotPolicy)>>,
    /// device -> received data
    pub received: BTreeMap<String, BTreeSet<Received>>,
}

static EMPTY_VALUATION: BTreeMap<String, Value> = BTreeMap::new();

impl SystemState {
    pub fn device_valuation(&self, device: &str) -> &BTreeMap<String, Value> {
        self.valuation.get(device).unwrap_or(&EMPTY_VALUATION)
    }

    pub fn value(&self, device: &str, item: &str) -> Option<&Value> {
        self.device_valuation(device).lookup(item)
    }

    pub fn policy_base(&self, device: &str) -> impl Iterator<Item = (&str, &PilotPolicy)> {
        self.policies
            .get(device)
            .into_iter()
            .flatten()
            .map(|(o, p)| (o.as_str(), p))
    }

    /// Policies the device defined itself.
    pub fn own_policies<'a>(&'a self, device: &'a str) -> impl Iterator<Item = &'a PilotPolicy> + 'a {
        self.policy_base(device)
            .filter(move |(o, _)| *o == device)
            .map(|(_, p)| p)
    }

    pub fn received_by(&self, device: &str) -> impl Iterator<Item = &Received> {
        self.received.get(device).into_iter().flatten()
    }

    pub fn holds_received(&self, device: &str, item: &str) -> bool {
        self.received_by(device).any(|r| r.item == item)
    }

    /// Componentwise inclusion.
    pub fn includes(&self, other: &SystemState) -> bool {
        let val = other
            .valuation
            .iter()
            .all(|(d, m)| m.iter().all(|(i, v)| self.value(d, i) == Some(v)));
        let pol = other
            .policies
            .iter()
            .all(|(d, s)| self.policies.get(d).is_some_and(|t| s.is_subset(t)));
        let rec = other
            .received
            .iter()
            .all(|(d, s)| self.received.get(d).is_some_and(|t| s.is_subset(t)));
        val && pol && rec
    }
}

/// Events, in tie-breaking order: legal exchanges first, illegal last.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Request {
        sender: String,
        receiver: String,
        datatype: String,
        policy: PilotPolicy,
    },
    Send {
        sender: String,
        receiver: String,
        item: String,
    },
    Transfer {
        sender: String,
        receiver: String,
        item: String,
    },
    Use {
        device: String,
        item: String,
        purpose: String,
    },
    IllegalTransfer {
        sender: String,
        receiver: String,
        item: String,
    },
    IllegalUse {
        device: String,
        item: String,
        purpose: String,
    },
}

impl Event {
    pub fn is_illegal(&self) -> bool {
        matches!(self, Event::IllegalTransfer { .. } | Event::IllegalUse { .. })
    }

    /// `(device, item, purpose)` for use events.
    pub fn usage(&self) -> Option<(&str, &str, &str)> {
        match self {
            Event::Use { device, item, purpose } | Event::IllegalUse { device, item, purpose } => {
                Some((device, item, purpose))
            }
            _ => None,
        }
    }

    /// `(sender, receiver, item)` for events that move data.
    pub fn delivery(&self) -> Option<(&str, &str, &str)> {
        match self {
            Event::Send { sender, receiver, item }
            | Event::Transfer { sender, receiver, item }
            | Event::IllegalTransfer { sender, receiver, item } => Some((sender, receiver, item)),
            _ => None,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Request {
                sender,
                receiver,
                datatype,
                ..
            } => {
                write!(f, "{sender} requests {datatype} data from {receiver}")
            }
            Event::Send { sender, receiver, item } => write!(f, "{sender} sends {item} to {receiver}"),
            Event::Transfer { sender, receiver, item } => {
                write!(f, "{sender} transfers {item} to {receiver}")
            }
            Event::Use { device, item, purpose } => write!(f, "{device} uses {item} for {purpose}"),
            Event::IllegalTransfer { sender, receiver, item } => {
                write!(f, "{sender} illegally transfers {item} to {receiver}")
            }
            Event::IllegalUse { device, item, purpose } => {
                write!(f, "{device} illegally uses {item} for {purpose}")
            }
        }
    }
}

/// Everything an execution needs besides the state: the label orders, the
/// devices and items, the clock and the misbehavior assumptions in force.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub hierarchies: Hierarchies,
    pub devices: BTreeMap<String, Device>,
    pub items: BTreeMap<String, DataItem>,
    pub clock: ClockPolicy,
    pub assumptions: Vec<RiskAssumption>,
}

/// What an enabled event adds to a state.
enum Delta {
    None,
    Policy {
        device: String,
        entry: (String, PilotPolicy),
    },
    Data {
        receiver: String,
        sender: String,
        item: String,
        attached: BTreeSet<AttachedPolicy>,
    },
}

impl World {
    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.get(id)
    }

    fn kind_is(&self, id: &str, kind: DeviceKind) -> bool {
        self.device(id).is_some_and(|d| d.kind == kind)
    }

    fn entity_leq(&self, device: &str, entity: &str) -> bool {
        self.device(device)
            .is_some_and(|d| self.hierarchies.entities.leq(&d.entity, entity).unwrap_or(false))
    }

    fn type_leq(&self, item: &str, datatype: &str) -> bool {
        self.items
            .get(item)
            .is_some_and(|i| self.hierarchies.datatypes.leq(&i.datatype, datatype).unwrap_or(false))
    }

    fn subsumes(&self, p: &PilotPolicy, q: &PilotPolicy) -> bool {
        p.subsumes(q, &self.hierarchies).unwrap_or(false)
    }

    /// The activation checks of a rule for a datatype: the item's type, the
    /// rule's condition at the sender, its retention and the receiver's
    /// entity. An undefined or ill-typed condition is not active.
    fn rule_active(
        &self,
        datatype: &str,
        rule: &DataCommunicationRule,
        sender: &str,
        receiver: &str,
        item: &str,
        st: &SystemState,
    ) -> bool {
        self.type_leq(item, datatype)
            && self.clock.now < rule.dur.retention
            && self.entity_leq(receiver, &rule.entity)
            && rule
                .condition
                .evaluate(st.device_valuation(sender))
                .is_ok_and(|v| v.is_true())
    }

    /// Whether `p` is active for the exchange carried by `ev`.
    pub fn active_policy(&self, p: &PilotPolicy, ev: &Event, st: &SystemState) -> bool {
        match ev.delivery() {
            Some((s, r, i)) => self.rule_active(&p.datatype, &p.dcr, s, r, i, st),
            None => false,
        }
    }

    /// Whether transfer rule `tr` of `p` is active for `ev`. Also requires
    /// the sender's own retention under `p` to be unexpired.
    pub fn active_transfer(&self, tr: &DataCommunicationRule, p: &PilotPolicy, ev: &Event, st: &SystemState) -> bool {
        let Event::Transfer { sender, receiver, item } = ev else {
            return false;
        };
        self.clock.now < p.dcr.dur.retention && self.rule_active(&p.datatype, tr, sender, receiver, item, st)
    }

    pub fn enabled(&self, ev: &Event, st: &SystemState) -> bool {
        self.delta(ev, st).is_some()
    }

    /// Applies an enabled event. The result includes `st` componentwise.
    pub fn apply(&self, ev: &Event, st: &SystemState) -> Result<SystemState> {
        let delta = self
            .delta(ev, st)
            .ok_or_else(|| PilotError::NotEnabled(ev.to_string()))?;
        let mut next = st.clone();
        match delta {
            Delta::None => {}
            Delta::Policy { device, entry } => {
                next.policies.entry(device).or_default().insert(entry);
            }
            Delta::Data {
                receiver,
                sender,
                item,
                attached,
            } => {
                if let Some(v) = st.value(&sender, &item) {
                    next.valuation
                        .entry(receiver.clone())
                        .or_default()
                        .insert(item.clone(), v.clone());
                }
                let set = next.received.entry(receiver).or_default();
                for policy in attached {
                    set.insert(Received {
                        sender: sender.clone(),
                        item: item.clone(),
                        policy,
                    });
                }
            }
        }
        Ok(next)
    }

    fn delta(&self, ev: &Event, st: &SystemState) -> Option<Delta> {
        match ev {
            Event::Request {
                sender,
                receiver,
                datatype,
                policy,
            } => {
                let ok = self.kind_is(sender, DeviceKind::DC)
                    && sender != receiver
                    && self.devices.contains_key(receiver)
                    && policy.datatype == *datatype;
                ok.then(|| Delta::Policy {
                    device: receiver.clone(),
                    entry: (sender.clone(), policy.clone()),
                })
            }
            Event::Send { sender, receiver, item } => {
                let typed = self.kind_is(sender, DeviceKind::DS)
                    && self.kind_is(receiver, DeviceKind::DC)
                    && self.items.get(item).is_some_and(|i| i.owner == *sender);
                if !typed {
                    return None;
                }
                let own: Vec<&PilotPolicy> = st
                    .own_policies(sender)
                    .filter(|p| self.active_policy(p, ev, st))
                    .collect();
                let attached: BTreeSet<AttachedPolicy> = st
                    .policy_base(sender)
                    .filter(|(o, p)| o == receiver && self.active_policy(p, ev, st))
                    .filter(|(_, p_rcv)| own.iter().any(|p_snd| self.subsumes(p_rcv, p_snd)))
                    .map(|(_, p)| AttachedPolicy::Policy(p.clone()))
                    .collect();
                (!attached.is_empty()).then(|| Delta::Data {
                    receiver: receiver.clone(),
                    sender: sender.clone(),
                    item: item.clone(),
                    attached,
                })
            }
            Event::Transfer { sender, receiver, item } => {
                let typed = self.kind_is(sender, DeviceKind::DC)
                    && self.kind_is(receiver, DeviceKind::DC)
                    && sender != receiver
                    && self.items.get(item).is_some_and(|i| i.owner != *sender);
                if !typed {
                    return None;
                }
                let candidates: Vec<&PilotPolicy> = st
                    .policy_base(sender)
                    .filter(|(o, p)| o == receiver && self.active_policy(p, ev, st))
                    .map(|(_, p)| p)
                    .collect();
                let mut attached = BTreeSet::new();
                for held in st.received_by(sender).filter(|r| r.item == *item) {
                    let Some(p) = held.policy.policy() else { continue };
                    for tr in &p.transfers {
                        if !self.active_transfer(tr, p, ev, st) {
                            continue;
                        }
                        let p_tr = p.for_transfer(tr);
                        for p_rcv in &candidates {
                            if self.subsumes(p_rcv, &p_tr) {
                                attached.insert(AttachedPolicy::Policy((*p_rcv).clone()));
                            }
                        }
                    }
                }
                (!attached.is_empty()).then(|| Delta::Data {
                    receiver: receiver.clone(),
                    sender: sender.clone(),
                    item: item.clone(),
                    attached,
                })
            }
            Event::Use { device, item, purpose } => {
                let ok = self.kind_is(device, DeviceKind::DC)
                    && st.received_by(device).filter(|r| r.item == *item).any(|r| {
                        r.policy.policy().is_some_and(|p| {
                            self.clock.now < p.dcr.dur.retention
                                && p.dcr.dur.allows(purpose, &self.hierarchies.purposes).unwrap_or(false)
                        })
                    });
                ok.then_some(Delta::None)
            }
            Event::IllegalTransfer { sender, receiver, item } => {
                let ok = self.kind_is(sender, DeviceKind::DC)
                    && self.kind_is(receiver, DeviceKind::DC)
                    && sender != receiver
                    && st.holds_received(sender, item)
                    && self
                        .assumptions
                        .iter()
                        .any(|a| a.permits_transfer(self, sender, receiver, item));
                if !ok {
                    return None;
                }
                let shadow = st
                    .own_policies(receiver)
                    .find(|p| self.type_leq(item, &p.datatype))
                    .map_or(AttachedPolicy::Unrestricted, |p| AttachedPolicy::Policy(p.clone()));
                Some(Delta::Data {
                    receiver: receiver.clone(),
                    sender: sender.clone(),
                    item: item.clone(),
                    attached: BTreeSet::from([shadow]),
                })
            }
            Event::IllegalUse { device, item, purpose } => {
                let ok = self.kind_is(device, DeviceKind::DC)
                    && st.holds_received(device, item)
                    && self
                        .assumptions
                        .iter()
                        .any(|a| a.permits_use(self, device, item, purpose));
                ok.then_some(Delta::None)
            }
        }
    }

    pub(crate) fn device_entity_leq(&self, device: &str, entity: &str) -> bool {
        self.entity_leq(device, entity)
    }

    pub(crate) fn item_type_leq(&self, item: &str, datatype: &str) -> bool {
        self.type_leq(item, datatype)
    }
}
