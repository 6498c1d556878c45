//! Joining two policies, and what happens when their entities are unrelated.

use pilot::{parse_policy, Hierarchies, Hierarchy, JoinMode, LabelKind, PilotError};

fn hierarchies() -> pilot::Result<Hierarchies> {
    Ok(Hierarchies {
        entities: Hierarchy::new(
            LabelKind::Entity,
            ["Parket", "ParketWW", "ParketGroup", "CarInsure"],
            [
                ("Parket".into(), "ParketGroup".into()),
                ("ParketWW".into(), "ParketGroup".into()),
            ],
        )?,
        datatypes: Hierarchy::flat(LabelKind::Datatype, ["number_plate"]),
        purposes: Hierarchy::new(
            LabelKind::Purpose,
            ["commercial_offers", "newsletter", "profiling"],
            [("newsletter".into(), "commercial_offers".into())],
        )?,
    })
}

pub fn run_example() -> pilot::Result<Vec<String>> {
    let hs = hierarchies()?;
    let dc = parse_policy(
        "ParketGroup may collect data of type number_plate and use it for commercial_offers \
         and profiling purposes until 30/06/2019.\n\
         This data may be transferred to ParketWW which may use it for newsletter purposes until 26/04/2019.",
        &hs,
    )?;
    let ds = parse_policy(
        "Parket may collect data of type number_plate if speed > 50 and use it for commercial_offers \
         purposes until 21/03/2019.\n\
         This data may be transferred to ParketGroup which may use it for commercial_offers purposes until 26/04/2019.",
        &hs,
    )?;

    let mut out = Vec::new();
    let joined = ds.join(&dc, &hs)?;
    out.push(joined.normalized().to_string());
    out.push(format!(
        "subsumed by both: {}",
        joined.subsumes(&ds, &hs)? && joined.subsumes(&dc, &hs)?
    ));

    let insurer = parse_policy(
        "CarInsure may collect data of type number_plate and use it for profiling purposes until 21/03/2019.",
        &hs,
    )?;
    match ds.join(&insurer, &hs) {
        Err(e @ PilotError::Incomparable { .. }) => out.push(format!("strict: {e}")),
        other => out.push(format!("strict: unexpected {other:?}")),
    }
    let literal = ds.join_with(&insurer, &hs, JoinMode::Literal)?;
    out.push(format!(
        "literal: {}\nliteral result subsumed by both: {}",
        literal.normalized(),
        literal.subsumes(&ds, &hs)? && literal.subsumes(&insurer, &hs)?
    ));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    for line in run_example()? {
        println!("{line}\n");
    }
    Ok(())
}
