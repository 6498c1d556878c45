//! Generators and independent oracles shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use pilot::{
    Condition, DataCommunicationRule, DataUsageRule, Hierarchies, Hierarchy, LabelKind, PilotPolicy, Predicate, Term,
    Timestamp, Value,
};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::select;

pub const ITEMS: [&str; 3] = ["x", "y", "z"];
pub const DOMAIN: i64 = 4;
pub const FUNCTIONS: [&str; 4] = ["add", "sub", "min", "max"];

/// A random DAG: edges only go from lower to higher index.
pub fn hierarchy(
    kind: LabelKind,
    prefix: &'static str,
    sizes: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Hierarchy> {
    sizes
        .prop_flat_map(|n| (Just(n), vec(0u8..3, n * n.saturating_sub(1) / 2)))
        .prop_map(move |(n, bits)| {
            let labels: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    // one edge in three
                    if bits[k] == 0 {
                        edges.push((labels[i].clone(), labels[j].clone()));
                    }
                    k += 1;
                }
            }
            Hierarchy::new(kind, labels, edges).expect("edges go upward")
        })
}

pub fn hierarchies() -> impl Strategy<Value = Hierarchies> {
    (
        hierarchy(LabelKind::Entity, "E", 1..=5),
        hierarchy(LabelKind::Datatype, "t", 1..=3),
        hierarchy(LabelKind::Purpose, "p", 1..=4),
    )
        .prop_map(|(entities, datatypes, purposes)| Hierarchies {
            entities,
            datatypes,
            purposes,
        })
}

fn labels(h: &Hierarchy) -> Vec<String> {
    h.labels().iter().cloned().collect()
}

/// Labels comparable with `a` (including `a`).
fn comparable(h: &Hierarchy, a: &str) -> Vec<String> {
    h.labels()
        .iter()
        .filter(|l| h.leq(a, l).unwrap() || h.leq(l, a).unwrap())
        .cloned()
        .collect()
}

pub fn int_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        select(&ITEMS[..]).prop_map(|i| Term::Item(i.to_string())),
        (0..DOMAIN).prop_map(|n| Term::Const(Value::Int(n))),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (select(&FUNCTIONS[..]), inner.clone(), inner).prop_map(|(f, a, b)| Term::Apply(f.to_string(), vec![a, b]))
    })
}

pub fn predicate() -> impl Strategy<Value = Predicate> {
    select(Predicate::ALL.to_vec())
}

/// Well-typed integer conditions over [`ITEMS`].
pub fn int_condition() -> impl Strategy<Value = Condition> {
    let leaf = prop_oneof![
        1 => Just(Condition::True),
        1 => Just(Condition::False),
        6 => (predicate(), int_term(), int_term()).prop_map(|(p, a, b)| Condition::atom(p, a, b)),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Condition::not),
            (inner.clone(), inner).prop_map(|(a, b)| a.and(b)),
        ]
    })
}

fn any_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-1000i64..1000).prop_map(Value::Int),
        (17000u32..18000).prop_map(|d| Value::Date(Timestamp::from_days(d))),
        select(vec![
            "Lyon",
            "Paris",
            "Saint Etienne",
            "quote\"d",
            "lower",
            "True",
            "If"
        ])
        .prop_map(|s| Value::Str(s.to_string())),
    ]
}

pub fn any_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        select(vec!["x", "y", "car_location", "speed_2", "_hidden"]).prop_map(|i| Term::Item(i.to_string())),
        any_value().prop_map(Term::Const),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (select(&FUNCTIONS[..]), inner.clone(), inner).prop_map(|(f, a, b)| Term::Apply(f.to_string(), vec![a, b]))
    })
}

/// Conditions with every syntactic form, not necessarily well typed.
pub fn any_condition() -> impl Strategy<Value = Condition> {
    let leaf = prop_oneof![
        1 => Just(Condition::True),
        1 => Just(Condition::False),
        6 => (predicate(), any_term(), any_term()).prop_map(|(p, a, b)| Condition::atom(p, a, b)),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Condition::not),
            (inner.clone(), inner).prop_map(|(a, b)| a.and(b)),
        ]
    })
}

pub fn retention() -> impl Strategy<Value = Timestamp> {
    (17800u32..17900).prop_map(Timestamp::from_days)
}

pub fn dur(purposes: &Hierarchy) -> impl Strategy<Value = DataUsageRule> {
    let ps = labels(purposes);
    let n = ps.len();
    (btree_set(select(ps), 1..=n), retention()).prop_map(|(p, rt)| DataUsageRule::new(p, rt))
}

pub fn dcr_with(
    hs: &Hierarchies,
    entities: Vec<String>,
    cond: BoxedStrategy<Condition>,
) -> impl Strategy<Value = DataCommunicationRule> {
    (cond, select(entities), dur(&hs.purposes)).prop_map(|(condition, entity, dur)| DataCommunicationRule {
        condition,
        entity,
        dur,
    })
}

pub fn dcr(hs: &Hierarchies, cond: BoxedStrategy<Condition>) -> impl Strategy<Value = DataCommunicationRule> {
    dcr_with(hs, labels(&hs.entities), cond)
}

pub fn policy_with(
    hs: &Hierarchies,
    datatypes: Vec<String>,
    entities: Vec<String>,
    cond: BoxedStrategy<Condition>,
) -> impl Strategy<Value = PilotPolicy> {
    (
        select(datatypes),
        dcr_with(hs, entities, cond.clone()),
        btree_set(dcr(hs, cond), 0..3),
    )
        .prop_map(|(datatype, dcr, transfers)| PilotPolicy {
            datatype,
            dcr,
            transfers,
        })
}

pub fn policy(hs: &Hierarchies, cond: BoxedStrategy<Condition>) -> impl Strategy<Value = PilotPolicy> {
    policy_with(hs, labels(&hs.datatypes), labels(&hs.entities), cond)
}

/// A hierarchy and a policy over it, with arbitrary conditions.
pub fn policy_in_context() -> impl Strategy<Value = (Hierarchies, PilotPolicy)> {
    hierarchies().prop_flat_map(|hs| {
        let p = policy(&hs, any_condition().boxed());
        (Just(hs), p)
    })
}

/// Two policies whose datatypes and collection entities are comparable, so
/// that a strict join exists.
pub fn comparable_policies() -> impl Strategy<Value = (Hierarchies, PilotPolicy, PilotPolicy)> {
    hierarchies()
        .prop_flat_map(|hs| {
            let p = policy(&hs, int_condition().boxed());
            (Just(hs), p)
        })
        .prop_flat_map(|(hs, p)| {
            let q = policy_with(
                &hs,
                comparable(&hs.datatypes, &p.datatype),
                comparable(&hs.entities, &p.dcr.entity),
                int_condition().boxed(),
            );
            (Just(hs), Just(p), q)
        })
}

/// Two rules with comparable entities.
pub fn comparable_rules() -> impl Strategy<Value = (Hierarchies, DataCommunicationRule, DataCommunicationRule)> {
    comparable_policies().prop_map(|(hs, p, q)| (hs, p.dcr, q.dcr))
}

/// Integer conditions over the first `k` of [`ITEMS`], `k` in `1..=3`.
/// Some pairs are unrelated; others share conjuncts, so that entailment
/// holds non-trivially.
pub fn condition_pair() -> impl Strategy<Value = (usize, Condition, Condition)> {
    (1usize..=3).prop_flat_map(|k| {
        let c = restricted(int_condition(), k).boxed();
        let pair = prop_oneof![
            (c.clone(), c.clone()),
            (c.clone(), c.clone()).prop_map(|(a, b)| (a.clone().and(b), a)),
            (c.clone(), c.clone(), c.clone()).prop_map(|(a, b, d)| (a.clone().and(b.clone()).and(d), b.and(a))),
            c.clone().prop_map(|a| (a.clone(), a.and(Condition::True))),
        ];
        (Just(k), pair).prop_map(|(k, (a, b))| (k, a, b))
    })
}

fn restricted(s: impl Strategy<Value = Condition>, k: usize) -> impl Strategy<Value = Condition> {
    s.prop_map(move |c| rename_items(&c, k))
}

fn rename_term(t: &Term, k: usize) -> Term {
    match t {
        Term::Item(i) => {
            let idx = ITEMS.iter().position(|x| x == i).unwrap_or(0) % k;
            Term::Item(ITEMS[idx].to_string())
        }
        Term::Const(_) => t.clone(),
        Term::Apply(f, args) => Term::Apply(f.clone(), args.iter().map(|a| rename_term(a, k)).collect()),
    }
}

fn rename_items(c: &Condition, k: usize) -> Condition {
    match c {
        Condition::True | Condition::False => c.clone(),
        Condition::Atom(p, a, b) => Condition::atom(*p, rename_term(a, k), rename_term(b, k)),
        Condition::Not(x) => rename_items(x, k).not(),
        Condition::And(a, b) => rename_items(a, k).and(rename_items(b, k)),
    }
}

/// Every valuation of the first `k` items over `0..DOMAIN`, with each item
/// also possibly absent when `partial`.
pub fn valuations(k: usize, partial: bool) -> Vec<BTreeMap<String, Value>> {
    let mut out = vec![BTreeMap::new()];
    for item in &ITEMS[..k] {
        let mut next = Vec::new();
        for v in &out {
            if partial {
                next.push(v.clone());
            }
            for n in 0..DOMAIN {
                let mut w = v.clone();
                w.insert(item.to_string(), Value::Int(n));
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Reference evaluation written directly from the definition: constants are
/// themselves, items are looked up, functions and predicates apply when all
/// arguments are defined, connectives apply when all operands are defined.
pub fn oracle_term(t: &Term, env: &BTreeMap<String, Value>) -> Option<i64> {
    match t {
        Term::Item(i) => match env.get(i)? {
            Value::Int(n) => Some(*n),
            _ => None,
        },
        Term::Const(Value::Int(n)) => Some(*n),
        Term::Const(_) => None,
        Term::Apply(f, args) => {
            let (a, b) = (oracle_term(&args[0], env)?, oracle_term(&args[1], env)?);
            Some(match f.as_str() {
                "add" => a.saturating_add(b),
                "sub" => a.saturating_sub(b),
                "min" => a.min(b),
                "max" => a.max(b),
                _ => unreachable!("generated functions only"),
            })
        }
    }
}

pub fn oracle_eval(c: &Condition, env: &BTreeMap<String, Value>) -> Option<bool> {
    match c {
        Condition::True => Some(true),
        Condition::False => Some(false),
        Condition::Atom(p, a, b) => {
            let (x, y) = (oracle_term(a, env)?, oracle_term(b, env)?);
            Some(match p {
                Predicate::Eq => x == y,
                Predicate::Ne => x != y,
                Predicate::Lt => x < y,
                Predicate::Le => x <= y,
                Predicate::Gt => x > y,
                Predicate::Ge => x >= y,
            })
        }
        Condition::Not(x) => oracle_eval(x, env).map(|b| !b),
        Condition::And(a, b) => {
            let (x, y) = (oracle_eval(a, env)?, oracle_eval(b, env)?);
            Some(x && y)
        }
    }
}

/// Reflexive-transitive closure by breadth-first search over the edges.
pub fn brute_leq(h: &Hierarchy, a: &str, b: &str) -> bool {
    let mut seen = BTreeSet::from([a.to_string()]);
    let mut queue = VecDeque::from([a.to_string()]);
    while let Some(x) = queue.pop_front() {
        if x == b {
            return true;
        }
        for (c, p) in h.edges() {
            if *c == x && seen.insert(p.clone()) {
                queue.push_back(p.clone());
            }
        }
    }
    false
}

pub fn anpr_path() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/anpr.scenario.json")
}

use pilot::analysis::Query;
use pilot::exec::{DeviceKind, Event, SystemState, World};

/// Candidate events written out from the model's signature, independent of
/// the explorer's enumeration: every device pair, item and purpose, and for
/// requests every policy the sender declared initially.
fn candidates(world: &World, declared: &BTreeMap<String, Vec<PilotPolicy>>) -> Vec<Event> {
    let devices: Vec<&String> = world.devices.keys().collect();
    let items: Vec<&String> = world.items.keys().collect();
    let purposes: Vec<&String> = world.hierarchies.purposes.labels().iter().collect();
    let mut out = Vec::new();
    for s in &devices {
        for r in &devices {
            for p in declared.get(*s).into_iter().flatten() {
                out.push(Event::Request {
                    sender: s.to_string(),
                    receiver: r.to_string(),
                    datatype: p.datatype.clone(),
                    policy: p.clone(),
                });
            }
            for i in &items {
                let (sender, receiver, item) = (s.to_string(), r.to_string(), i.to_string());
                out.push(Event::Send {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    item: item.clone(),
                });
                out.push(Event::Transfer {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    item: item.clone(),
                });
                out.push(Event::IllegalTransfer { sender, receiver, item });
            }
        }
        for i in &items {
            for p in &purposes {
                let (device, item, purpose) = (s.to_string(), i.to_string(), p.to_string());
                out.push(Event::Use {
                    device: device.clone(),
                    item: item.clone(),
                    purpose: purpose.clone(),
                });
                out.push(Event::IllegalUse { device, item, purpose });
            }
        }
    }
    out
}

fn entity_leq(world: &World, device: &str, entity: &str) -> bool {
    brute_leq(&world.hierarchies.entities, &world.devices[device].entity, entity)
}

fn queried_purposes(world: &World, q: &Query) -> Vec<String> {
    let h = &world.hierarchies.purposes;
    match q {
        Query::CanReceive { .. } => Vec::new(),
        Query::CanUse { purpose, .. } => vec![purpose.clone()],
        Query::CanUseOtherThan { purposes, .. } => h
            .labels()
            .iter()
            .filter(|x| purposes.iter().all(|p| !brute_leq(h, x, p)))
            .cloned()
            .collect(),
    }
}

/// Length of the shortest witness of `q` whose last state is `st`, if any:
/// 0 for a receive query satisfied in `st`, 1 for an enabled use event.
fn satisfied(world: &World, st: &SystemState, q: &Query) -> Option<usize> {
    match q {
        Query::CanReceive { entity, item } => world
            .devices
            .keys()
            .any(|d| {
                entity_leq(world, d, entity)
                    && st
                        .received
                        .get(d)
                        .is_some_and(|set| set.iter().any(|r| r.item == *item))
            })
            .then_some(0),
        Query::CanUse { entity, item, .. } | Query::CanUseOtherThan { entity, item, .. } => {
            let purposes = queried_purposes(world, q);
            world
                .devices
                .values()
                .filter(|d| d.kind == DeviceKind::DC && entity_leq(world, &d.id, entity))
                .any(|d| {
                    purposes.iter().any(|p| {
                        let legal = Event::Use {
                            device: d.id.clone(),
                            item: item.clone(),
                            purpose: p.clone(),
                        };
                        let illegal = Event::IllegalUse {
                            device: d.id.clone(),
                            item: item.clone(),
                            purpose: p.clone(),
                        };
                        world.enabled(&legal, st) || world.enabled(&illegal, st)
                    })
                })
                .then_some(1)
        }
    }
}

/// Shortest witness length per query found by enumerating every event
/// sequence of at most `bound` state-changing events (events that leave the
/// state unchanged cannot help a reachability query). A state is re-expanded
/// whenever it is reached with more remaining budget than before.
pub fn brute_answers(world: &World, init: &SystemState, queries: &[Query], bound: usize) -> Vec<Option<usize>> {
    let declared: BTreeMap<String, Vec<PilotPolicy>> = init
        .policies
        .iter()
        .map(|(d, set)| {
            (
                d.clone(),
                set.iter().filter(|(o, _)| o == d).map(|(_, p)| p.clone()).collect(),
            )
        })
        .collect();
    let events = candidates(world, &declared);
    let mut best: Vec<Option<usize>> = queries
        .iter()
        .map(|q| match q {
            Query::CanReceive { entity, item } if entity_leq(world, &world.items[item].owner, entity) => Some(0),
            _ => None,
        })
        .collect();
    let mut budget_seen: std::collections::HashMap<SystemState, usize> = std::collections::HashMap::new();
    let mut stack = vec![(init.clone(), 0usize)];
    while let Some((st, depth)) = stack.pop() {
        let remaining = bound - depth;
        if budget_seen.get(&st).is_some_and(|&r| r >= remaining) {
            continue;
        }
        budget_seen.insert(st.clone(), remaining);
        for (q, b) in queries.iter().zip(best.iter_mut()) {
            if b == &Some(0) {
                continue;
            }
            if let Some(extra) = satisfied(world, &st, q) {
                let len = depth + extra;
                if b.is_none_or(|x| len < x) {
                    *b = Some(len);
                }
            }
        }
        if remaining == 0 {
            continue;
        }
        for ev in &events {
            if world.enabled(ev, &st) {
                let next = world.apply(ev, &st).expect("enabled events apply");
                if next != st {
                    stack.push((next, depth + 1));
                }
            }
        }
    }
    best
}

pub fn anpr_json() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(anpr_path()).unwrap()).unwrap()
}

const PARKET_TRANS: &str = "Parket may collect data of type number_plate and use it for commercial_offers purposes until 21/03/2019.\nThis data may be transferred to ParketWW which may use it for commercial_offers purposes until 26/04/2019.";

fn set_trans_policy(v: &mut serde_json::Value, text: &str) {
    for dev in ["Alice", "Parket"] {
        v["variants"][0]["policies"][dev] = serde_json::json!([text]);
    }
}

/// The ANPR scenario with an extra purpose, `billing`, that Alice and Parket
/// both allow under `p_trans`.
pub fn anpr_extra_purpose() -> pilot::scenario::Scenario {
    let mut v = anpr_json();
    v["hierarchies"]["purposes"]["labels"]
        .as_array_mut()
        .unwrap()
        .push("billing".into());
    set_trans_policy(
        &mut v,
        &PARKET_TRANS.replacen("commercial_offers", "commercial_offers and billing", 1),
    );
    pilot::scenario::scenario_from_value(v).unwrap()
}

/// The ANPR scenario with an extra transfer rule, to CarInsure, that Alice
/// and Parket both declare under `p_trans`; CarInsure declares a matching
/// policy so it can request.
pub fn anpr_extra_transfer() -> pilot::scenario::Scenario {
    let mut v = anpr_json();
    let text = format!(
        "{PARKET_TRANS}\nThis data may be transferred to CarInsure which may use it for profiling purposes until 26/04/2019."
    );
    set_trans_policy(&mut v, &text);
    v["policies"]["CarInsure"] = serde_json::json!([
        "CarInsure may collect data of type number_plate and use it for profiling purposes until 26/04/2019."
    ]);
    pilot::scenario::scenario_from_value(v).unwrap()
}

/// The three scenarios the explorer is checked on.
pub fn oracle_scenarios() -> Vec<(&'static str, pilot::scenario::Scenario)> {
    vec![
        ("anpr", pilot::scenario::load_scenario(anpr_path()).unwrap()),
        ("anpr+billing", anpr_extra_purpose()),
        ("anpr+carinsure", anpr_extra_transfer()),
    ]
}

/// Compares BFS answers and witness lengths with [`brute_answers`] for every
/// question, variant and assumption set of `sc`. Returns the mismatches.
pub fn explorer_mismatches(name: &str, sc: &pilot::scenario::Scenario) -> Vec<String> {
    use pilot::analysis::{answer, explore};
    let mut out = Vec::new();
    let queries: Vec<Query> = sc.questions.iter().map(|q| q.query.clone()).collect();
    for variant in sc.variant_names() {
        for set in sc.default_assumption_sets() {
            let ids: Vec<&str> = set.ids.iter().map(String::as_str).collect();
            let (world, init) = sc.instantiate(variant, &ids).unwrap();
            let g = explore(&world, init.clone()).unwrap();
            let brute = brute_answers(&world, &init, &queries, g.diameter() + 1);
            for ((q, query), expect) in sc.questions.iter().zip(&queries).zip(brute) {
                let v = answer(query, &g, &world).unwrap();
                let got = v.witness.as_ref().map(Vec::len);
                if got != expect {
                    out.push(format!(
                        "{name}/{}/{}/{}: bfs {got:?}, brute {expect:?}",
                        variant.unwrap_or("base"),
                        set.name,
                        q.name
                    ));
                }
            }
        }
    }
    out
}
