//! Is Alice's policy at least as restrictive as Parket's?

use pilot::{parse_policy, Hierarchies, Hierarchy, LabelKind};

const PARKET: &str = include_str!("../fixtures/parket.pilot");
const ALICE: &str = include_str!("../fixtures/alice.pilot");

pub fn run_example() -> pilot::Result<(bool, bool)> {
    let hs = Hierarchies {
        entities: Hierarchy::flat(LabelKind::Entity, ["Alice", "Parket", "ParketWW"]),
        datatypes: Hierarchy::flat(LabelKind::Datatype, ["number_plate"]),
        purposes: Hierarchy::flat(LabelKind::Purpose, ["commercial_offers"]),
    };
    let parket = parse_policy(PARKET, &hs)?;
    let alice = parse_policy(ALICE, &hs)?;
    // Alice only allows collection in Lyon and no transfer.
    Ok((alice.subsumes(&parket, &hs)?, parket.subsumes(&alice, &hs)?))
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    let (forward, converse) = run_example()?;
    println!("alice <= parket: {forward}");
    println!("parket <= alice: {converse}");
    Ok(())
}
