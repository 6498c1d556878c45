//! Scenario files, analysis records and the file store.
//!
//! A scenario is one JSON document:
//!
//! ```json
//! {
//!   "hierarchies": { "entities": { "labels": [..], "edges": [[child, parent], ..] },
//!                    "datatypes": {..}, "purposes": {..} },
//!   "devices": [ { "id": "Alice", "entity": "Alice", "kind": "DS" }, .. ],
//!   "items": [ { "id": "plate_Alice", "datatype": "number_plate", "owner": "Alice", "value": "GD-042-PR" } ],
//!   "policies": { "Parket": [ "Parket may collect data of type ..." ] },
//!   "variants": [ { "name": "p_trans", "policies": { .. } } ],
//!   "assumptions": [ { "id": "a1", "kind": "illegal_transfer", "from": "ParketWW", "to": "CarInsure" } ],
//!   "now": "01/03/2019",
//!   "questions": [ { "name": "q1", "text": "..", "query": { "kind": "can_receive", .. } } ]
//! }
//! ```
//!
//! Policies are either `.pilot` sentences or the structured JSON form. A
//! variant replaces the policy lists of the devices it names.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, answer_matrix, Query, RiskAssumption, VerdictTable};
use crate::error::{LabelKind, PilotError, Result};
use crate::exec::{ClockPolicy, DataItem, Device, DeviceKind, SystemState, World};
use crate::hierarchy::{Hierarchies, Hierarchy};
use crate::policy::PilotPolicy;
use crate::text::{is_item_name, is_label, parse_policy};
use crate::timestamp::Timestamp;

pub const SCENARIO_EXT: &str = "scenario.json";
pub const RECORD_EXT: &str = "record.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySource {
    Text(String),
    Structured(PilotPolicy),
}

impl PolicySource {
    pub fn resolve(&self, hs: &Hierarchies) -> Result<PilotPolicy> {
        match self {
            PolicySource::Text(t) => parse_policy(t, hs),
            PolicySource::Structured(p) => {
                p.validate(hs)?;
                Ok(p.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub policies: BTreeMap<String, Vec<PolicySource>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedAssumption {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub assumption: RiskAssumption,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub name: String,
    pub text: String,
    pub query: Query,
}

/// A named selection of assumption ids; one column group of a table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionSet {
    pub name: String,
    pub ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub hierarchies: Hierarchies,
    pub devices: Vec<Device>,
    pub items: Vec<DataItem>,
    #[serde(default)]
    pub policies: BTreeMap<String, Vec<PolicySource>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub assumptions: Vec<NamedAssumption>,
    pub now: Timestamp,
    #[serde(default)]
    pub questions: Vec<Question>,
}

#[derive(Deserialize)]
struct RawHierarchy {
    labels: Vec<String>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

fn build_hierarchy(kind: LabelKind, raw: RawHierarchy) -> Result<Hierarchy> {
    if let Some(bad) = raw.labels.iter().find(|l| !is_label(l)) {
        return Err(PilotError::invalid("label_syntax", format!("{kind} label `{bad}`")));
    }
    Hierarchy::new(kind, raw.labels, raw.edges).map_err(|e| match e {
        PilotError::CyclicHierarchy { .. } => PilotError::invalid("hierarchy_acyclic", e.to_string()),
        PilotError::UnknownLabel { .. } => PilotError::invalid("edge_labels_declared", e.to_string()),
        e => e,
    })
}

fn ensure(ok: bool, violation: &'static str, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(PilotError::invalid(violation, detail()))
    }
}

fn unique<'a>(ids: impl IntoIterator<Item = &'a str>, violation: &'static str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        ensure(seen.insert(id), violation, || format!("`{id}` appears twice"))?;
    }
    Ok(())
}

/// Parses and validates a scenario document.
pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    scenario_from_value(value)
}

pub fn scenario_from_value(value: serde_json::Value) -> Result<Scenario> {
    // Hierarchies first, so that their violations are reported by name.
    if let Some(h) = value.get("hierarchies") {
        for (key, kind) in [
            ("entities", LabelKind::Entity),
            ("datatypes", LabelKind::Datatype),
            ("purposes", LabelKind::Purpose),
        ] {
            let raw = h
                .get(key)
                .ok_or_else(|| PilotError::invalid("hierarchies_complete", format!("missing `{key}` hierarchy")))?;
            build_hierarchy(kind, RawHierarchy::deserialize(raw)?)?;
        }
    }
    if let Some(now) = value.get("now").and_then(|v| v.as_str()) {
        now.parse::<Timestamp>()?;
    }
    let scenario: Scenario = serde_json::from_value(value)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| PilotError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_scenario(&text)
}

/// Pretty JSON with sorted keys; byte-stable across load and save.
pub fn to_canonical_json<T: Serialize>(x: &T) -> Result<String> {
    // serde_json's map type is ordered by key unless `preserve_order` is on.
    let v = serde_json::to_value(x)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Scenario {
    /// Content address of the canonical form.
    pub fn id(&self) -> String {
        sha256_hex(to_canonical_json(self).unwrap_or_default().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let hs = &self.hierarchies;
        unique(self.devices.iter().map(|d| d.id.as_str()), "device_id_unique")?;
        for d in &self.devices {
            ensure(hs.entities.contains(&d.entity), "device_entity_declared", || {
                format!("device `{}` has undeclared entity `{}`", d.id, d.entity)
            })?;
        }
        let kinds: BTreeMap<&str, DeviceKind> = self.devices.iter().map(|d| (d.id.as_str(), d.kind)).collect();

        unique(self.items.iter().map(|i| i.id.as_str()), "item_id_unique")?;
        for i in &self.items {
            ensure(is_item_name(&i.id), "item_id_syntax", || {
                format!("item id `{}` must start with a lowercase letter or `_`", i.id)
            })?;
            ensure(hs.datatypes.contains(&i.datatype), "item_datatype_declared", || {
                format!("item `{}` has undeclared datatype `{}`", i.id, i.datatype)
            })?;
            match kinds.get(i.owner.as_str()) {
                None => Err(PilotError::invalid(
                    "item_owner_declared",
                    format!("item `{}` has unknown owner `{}`", i.id, i.owner),
                ))?,
                Some(DeviceKind::DC) => Err(PilotError::invalid(
                    "item_owner_is_ds",
                    format!("owner `{}` of item `{}` is not a DS device", i.owner, i.id),
                ))?,
                Some(DeviceKind::DS) => {}
            }
        }

        self.check_policies(&self.policies, &kinds)?;
        unique(self.variants.iter().map(|v| v.name.as_str()), "variant_name_unique")?;
        for v in &self.variants {
            ensure(v.name != "base", "variant_name_unique", || "`base` is reserved".into())?;
            self.check_policies(&v.policies, &kinds)?;
        }

        unique(self.assumptions.iter().map(|a| a.id.as_str()), "assumption_id_unique")?;
        let world = self.world(Vec::new());
        for a in &self.assumptions {
            a.assumption
                .validate(&world)
                .map_err(|e| PilotError::invalid("assumption_labels_declared", format!("`{}`: {e}", a.id)))?;
        }

        unique(self.questions.iter().map(|q| q.name.as_str()), "question_name_unique")?;
        for q in &self.questions {
            q.query
                .validate(&world)
                .map_err(|e| PilotError::invalid("question_references_declared", format!("`{}`: {e}", q.name)))?;
        }
        Ok(())
    }

    fn check_policies(
        &self,
        map: &BTreeMap<String, Vec<PolicySource>>,
        kinds: &BTreeMap<&str, DeviceKind>,
    ) -> Result<()> {
        for (dev, sources) in map {
            ensure(kinds.contains_key(dev.as_str()), "policy_device_declared", || {
                format!("policies given for unknown device `{dev}`")
            })?;
            for src in sources {
                let p = src
                    .resolve(&self.hierarchies)
                    .map_err(|e| PilotError::invalid("policy_well_formed", format!("policy of `{dev}`: {e}")))?;
                for r in std::iter::once(&p.dcr).chain(&p.transfers) {
                    ensure(!r.dur.purposes.is_empty(), "purposes_non_empty", || {
                        format!("a rule in a policy of `{dev}` allows no purpose")
                    })?;
                }
            }
        }
        Ok(())
    }

    fn world(&self, assumptions: Vec<RiskAssumption>) -> World {
        World {
            hierarchies: self.hierarchies.clone(),
            devices: self.devices.iter().map(|d| (d.id.clone(), d.clone())).collect(),
            items: self.items.iter().map(|i| (i.id.clone(), i.clone())).collect(),
            clock: ClockPolicy { now: self.now },
            assumptions,
        }
    }

    pub fn variant(&self, name: &str) -> Result<&Variant> {
        self.variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| PilotError::UnknownReference {
                kind: "variant",
                id: name.to_string(),
            })
    }

    /// Variant names, or `[None]` when the scenario has none.
    pub fn variant_names(&self) -> Vec<Option<&str>> {
        if self.variants.is_empty() {
            vec![None]
        } else {
            self.variants.iter().map(|v| Some(v.name.as_str())).collect()
        }
    }

    pub fn question(&self, name: &str) -> Result<&Question> {
        self.questions
            .iter()
            .find(|q| q.name == name)
            .ok_or_else(|| PilotError::UnknownReference {
                kind: "question",
                id: name.to_string(),
            })
    }

    pub fn assumption(&self, id: &str) -> Result<&NamedAssumption> {
        self.assumptions
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| PilotError::UnknownReference {
                kind: "assumption",
                id: id.to_string(),
            })
    }

    /// `none` and, when there are assumptions, `all`.
    pub fn default_assumption_sets(&self) -> Vec<AssumptionSet> {
        let mut sets = vec![AssumptionSet {
            name: "none".into(),
            ids: Vec::new(),
        }];
        if !self.assumptions.is_empty() {
            sets.push(AssumptionSet {
                name: "all".into(),
                ids: self.assumptions.iter().map(|a| a.id.clone()).collect(),
            });
        }
        sets
    }

    /// Device policies in force under a variant.
    pub fn policies_for(&self, variant: Option<&str>) -> Result<BTreeMap<String, Vec<PilotPolicy>>> {
        self.policies_with(variant, None)
    }

    /// Like [`Scenario::policies_for`], with per-device replacements applied
    /// on top of the variant.
    pub fn policies_with(
        &self,
        variant: Option<&str>,
        overrides: Option<&BTreeMap<String, Vec<PolicySource>>>,
    ) -> Result<BTreeMap<String, Vec<PilotPolicy>>> {
        let mut sources = self.policies.clone();
        if let Some(name) = variant {
            for (dev, list) in &self.variant(name)?.policies {
                sources.insert(dev.clone(), list.clone());
            }
        }
        for (dev, list) in overrides.into_iter().flatten() {
            if !self.devices.iter().any(|d| d.id == *dev) {
                return Err(PilotError::UnknownReference {
                    kind: "device",
                    id: dev.clone(),
                });
            }
            sources.insert(dev.clone(), list.clone());
        }
        sources
            .into_iter()
            .map(|(dev, list)| {
                let ps = list
                    .iter()
                    .map(|s| s.resolve(&self.hierarchies))
                    .collect::<Result<Vec<_>>>()?;
                Ok((dev, ps))
            })
            .collect()
    }

    /// The world and initial state for one variant and assumption selection.
    pub fn instantiate(&self, variant: Option<&str>, assumption_ids: &[&str]) -> Result<(World, SystemState)> {
        self.instantiate_with(variant, None, assumption_ids)
    }

    pub fn instantiate_with(
        &self,
        variant: Option<&str>,
        overrides: Option<&BTreeMap<String, Vec<PolicySource>>>,
        assumption_ids: &[&str],
    ) -> Result<(World, SystemState)> {
        let assumptions = assumption_ids
            .iter()
            .map(|id| self.assumption(id).map(|a| a.assumption.clone()))
            .collect::<Result<Vec<_>>>()?;
        let world = self.world(assumptions);
        let mut st = SystemState::default();
        for item in &self.items {
            if let Some(v) = &item.value {
                st.valuation
                    .entry(item.owner.clone())
                    .or_default()
                    .insert(item.id.clone(), v.clone());
            }
        }
        for (dev, ps) in self.policies_with(variant, overrides)? {
            let base = st.policies.entry(dev.clone()).or_default();
            base.extend(ps.into_iter().map(|p| (dev.clone(), p)));
        }
        Ok((world, st))
    }

    /// Verdicts for every question, every variant and the given assumption
    /// sets (defaults to none/all).
    pub fn table(&self, assumption_sets: Option<&[AssumptionSet]>) -> Result<VerdictTable> {
        let defaults = self.default_assumption_sets();
        let sets = assumption_sets.unwrap_or(&defaults);
        let questions: Vec<&Question> = self.questions.iter().collect();
        answer_matrix(self, &self.variant_names(), sets, &questions)
    }
}

/// A stored table run, replayable against the embedded scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub scenario_id: String,
    pub scenario: Scenario,
    pub variants: Vec<String>,
    pub assumption_sets: Vec<AssumptionSet>,
    pub table: VerdictTable,
    /// RFC 3339, UTC.
    pub run_at: String,
    pub engine_version: String,
}

impl AnalysisRecord {
    pub fn run(scenario: &Scenario, assumption_sets: Option<&[AssumptionSet]>) -> Result<AnalysisRecord> {
        let sets = assumption_sets
            .map(<[AssumptionSet]>::to_vec)
            .unwrap_or_else(|| scenario.default_assumption_sets());
        let table = scenario.table(Some(&sets))?;
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0);
        let run_at = chrono::DateTime::from_timestamp(secs, 0)
            .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_default();
        Ok(AnalysisRecord {
            scenario_id: scenario.id(),
            scenario: scenario.clone(),
            variants: scenario
                .variant_names()
                .into_iter()
                .map(|v| v.unwrap_or("base").to_string())
                .collect(),
            assumption_sets: sets,
            table,
            run_at,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// Hash of the inputs: scenario, variants and assumption sets.
    pub fn id(&self) -> String {
        let key = serde_json::json!({
            "scenario": self.scenario_id,
            "variants": self.variants,
            "assumption_sets": self.assumption_sets,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    /// Replays every stored witness against the stored scenario.
    pub fn revalidate(&self) -> Result<()> {
        ensure(self.scenario.id() == self.scenario_id, "record_scenario_id", || {
            "embedded scenario does not hash to the recorded id".into()
        })?;
        let mut col = 0;
        for set in &self.assumption_sets {
            let ids: Vec<&str> = set.ids.iter().map(String::as_str).collect();
            for variant in &self.variants {
                let v = (variant != "base").then_some(variant.as_str());
                let (world, init) = self.scenario.instantiate(v, &ids)?;
                for row in &self.table.rows {
                    let q = &self.scenario.question(&row.question)?.query;
                    let cell = row.cells.get(col).ok_or_else(|| {
                        PilotError::invalid("record_table_shape", format!("row `{}` is short", row.question))
                    })?;
                    if let Some(w) = &cell.witness {
                        ensure(
                            analysis::check_witness(q, w, &world, &init)?,
                            "record_witness_replays",
                            || format!("witness for `{}` in column {col} does not replay", row.question),
                        )?;
                    }
                }
                col += 1;
            }
        }
        Ok(())
    }
}

/// A directory of scenarios and records. Writes take an advisory lock on
/// `<dir>/.lock` and land atomically.
#[derive(Clone, Debug)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Store> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let lock = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(".lock"))?;
        lock.lock()?;
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.persist(&path).map_err(|e| e.error)?;
        lock.unlock()?;
        Ok(path)
    }

    fn read(&self, kind: &'static str, id: &str, ext: &str) -> Result<String> {
        let known = !id.is_empty() && id.chars().all(|c| c.is_ascii_hexdigit());
        let path = self.dir.join(format!("{id}.{ext}"));
        if !known || !path.is_file() {
            return Err(PilotError::UnknownReference {
                kind,
                id: id.to_string(),
            });
        }
        Ok(fs::read_to_string(path)?)
    }

    pub fn put_scenario(&self, scenario: &Scenario) -> Result<(String, PathBuf)> {
        let id = scenario.id();
        let path = self.write(&format!("{id}.{SCENARIO_EXT}"), &to_canonical_json(scenario)?)?;
        Ok((id, path))
    }

    pub fn get_scenario(&self, id: &str) -> Result<Scenario> {
        parse_scenario(&self.read("scenario", id, SCENARIO_EXT)?)
    }

    pub fn put_record(&self, record: &AnalysisRecord) -> Result<(String, PathBuf)> {
        let id = record.id();
        let path = self.write(&format!("{id}.{RECORD_EXT}"), &to_canonical_json(record)?)?;
        Ok((id, path))
    }

    pub fn get_record(&self, id: &str) -> Result<AnalysisRecord> {
        Ok(serde_json::from_str(&self.read("record", id, RECORD_EXT)?)?)
    }
}

/// Saves a record under its content address in `dir`.
pub fn save_record(record: &AnalysisRecord, dir: impl Into<PathBuf>) -> Result<PathBuf> {
    Ok(Store::open(dir)?.put_record(record)?.1)
}

pub fn load_record(path: impl AsRef<Path>) -> Result<AnalysisRecord> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
