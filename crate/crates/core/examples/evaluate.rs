//! Three-valued evaluation of a condition on a device's data.

use std::collections::BTreeMap;

use pilot::text::parse_condition;
use pilot::{entails, TruthValue, Value};

pub fn run_example() -> pilot::Result<Vec<(String, TruthValue)>> {
    let cond = parse_condition("car_location is Lyon and add(hour, 1) < 20")?;
    let valuations: Vec<(&str, BTreeMap<String, Value>)> = vec![
        (
            "Lyon at 18h",
            BTreeMap::from([
                ("car_location".into(), Value::Str("Lyon".into())),
                ("hour".into(), Value::Int(18)),
            ]),
        ),
        (
            "Paris at 18h",
            BTreeMap::from([
                ("car_location".into(), Value::Str("Paris".into())),
                ("hour".into(), Value::Int(18)),
            ]),
        ),
        // No hour known: undefined, even though the location already fails.
        (
            "Paris, hour unknown",
            BTreeMap::from([("car_location".into(), Value::Str("Paris".into()))]),
        ),
    ];
    let mut out = Vec::new();
    for (name, nu) in &valuations {
        out.push((name.to_string(), cond.evaluate(nu)?));
    }
    let weaker = parse_condition("car_location is Lyon")?;
    out.push((
        format!("`{cond}` entails `{weaker}`"),
        TruthValue::from(entails(&cond, &weaker)),
    ));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    for (name, v) in run_example()? {
        println!("{name}: {v}");
    }
    Ok(())
}
