//! Verdict table for the bundled vehicle-tracking scenario.

use pilot::scenario::load_scenario;

pub fn run_example() -> pilot::Result<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/anpr.scenario.json");
    let scenario = load_scenario(path)?;
    Ok(scenario.table(None)?.to_string())
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
