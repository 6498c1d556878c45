//! One risk question with its witness, replayed step by step.

use pilot::analysis::{answer, check_witness, explore, Query};
use pilot::scenario::load_scenario;

pub fn run_example() -> pilot::Result<Vec<String>> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/anpr.scenario.json"))?;
    let ids = ["parketww_leaks_to_carinsure", "carinsure_profiles"];
    let (world, init) = scenario.instantiate(Some("p_trans"), &ids)?;
    let graph = explore(&world, init.clone())?;

    let query = Query::CanReceive {
        entity: "CarInsure".into(),
        item: "plate_Alice".into(),
    };
    let verdict = answer(&query, &graph, &world)?;
    let mut out = vec![format!(
        "{} ({} states, {})",
        verdict.answer,
        verdict.states_explored,
        if verdict.respected {
            "consistent with Alice's policy"
        } else {
            "violates Alice's policy"
        }
    )];
    let witness = verdict.witness.unwrap_or_default();
    out.extend(witness.iter().map(|ev| format!("  at {}: {ev}", scenario.now)));
    out.push(format!("replays: {}", check_witness(&query, &witness, &world, &init)?));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    for line in run_example()? {
        println!("{line}");
    }
    Ok(())
}
