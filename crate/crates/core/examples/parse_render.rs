//! Sentence form to abstract policy and back, with source spans and errors.

use pilot::text::{parse_document, Part, RuleRef};
use pilot::{render_policy, Hierarchies, Hierarchy, LabelKind, PilotError};

const PARKET: &str = include_str!("../fixtures/parket.pilot");

pub fn run_example() -> pilot::Result<Vec<String>> {
    let hs = Hierarchies {
        entities: Hierarchy::flat(LabelKind::Entity, ["Parket", "ParketWW"]),
        datatypes: Hierarchy::flat(LabelKind::Datatype, ["number_plate"]),
        purposes: Hierarchy::flat(LabelKind::Purpose, ["commercial_offers"]),
    };
    let doc = parse_document(PARKET, &hs)?;
    let mut out = vec![serde_json::to_string_pretty(&doc.policy)?, render_policy(&doc.policy)];
    if let Some(s) = doc.span_of(RuleRef::Transfer(0), Part::Entity) {
        out.push(format!(
            "transfer entity at {}..{}: {}",
            s.start,
            s.end,
            &PARKET[s.start..s.end]
        ));
    }

    let typo =
        "Parket may collect data of type number_plate and use it for commercial_offers purposes untl 21/03/2019.";
    if let Err(PilotError::Syntax(e)) = parse_document(typo, &hs) {
        out.push(format!("{e}: `{}`", &typo[e.span.start..e.span.end]));
    }
    let undeclared = "Parket may collect data of type number_plate and use it for profiling purposes until 21/03/2019.";
    if let Err(e) = parse_document(undeclared, &hs) {
        out.push(e.to_string());
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    for line in run_example()? {
        println!("{line}");
    }
    Ok(())
}
