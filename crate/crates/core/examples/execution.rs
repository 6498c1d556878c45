//! Stepping the execution model by hand: Parket asks for Alice's plate,
//! Alice sends it, and Parket passes it on to its web service.

use pilot::exec::{Event, SystemState};
use pilot::scenario::load_scenario;

pub fn run_example() -> pilot::Result<(SystemState, Vec<String>)> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/anpr.scenario.json"))?;
    let (world, mut st) = scenario.instantiate(Some("p_trans"), &[])?;
    let p_parket = st
        .own_policies("Parket")
        .next()
        .cloned()
        .expect("Parket declares a policy");
    let p_parketww = st
        .own_policies("ParketWW")
        .next()
        .cloned()
        .expect("ParketWW declares a policy");

    let send = Event::Send {
        sender: "Alice".into(),
        receiver: "Parket".into(),
        item: "plate_Alice".into(),
    };
    let mut log = vec![format!(
        "before any request, `{send}` enabled: {}",
        world.enabled(&send, &st)
    )];

    let script = [
        Event::Request {
            sender: "Parket".into(),
            receiver: "Alice".into(),
            datatype: "number_plate".into(),
            policy: p_parket,
        },
        send,
        Event::Request {
            sender: "ParketWW".into(),
            receiver: "Parket".into(),
            datatype: "number_plate".into(),
            policy: p_parketww,
        },
        Event::Transfer {
            sender: "Parket".into(),
            receiver: "ParketWW".into(),
            item: "plate_Alice".into(),
        },
        Event::Use {
            device: "ParketWW".into(),
            item: "plate_Alice".into(),
            purpose: "commercial_offers".into(),
        },
    ];
    for ev in &script {
        st = world.apply(ev, &st)?;
        log.push(format!("{ev}"));
    }
    let profiling = Event::Use {
        device: "ParketWW".into(),
        item: "plate_Alice".into(),
        purpose: "profiling".into(),
    };
    log.push(format!("`{profiling}` enabled: {}", world.enabled(&profiling, &st)));
    Ok((st, log))
}

#[allow(dead_code)]
fn main() -> pilot::Result<()> {
    let (st, log) = run_example()?;
    for line in log {
        println!("{line}");
    }
    for (dev, items) in &st.valuation {
        for (i, v) in items {
            println!("nu[{dev}]: {i} = {v}");
        }
    }
    for (dev, set) in &st.policies {
        for (origin, _) in set {
            println!("pi[{dev}]: policy from {origin}");
        }
    }
    for (dev, set) in &st.received {
        for r in set {
            println!("rho[{dev}]: {} from {}", r.item, r.sender);
        }
    }
    Ok(())
}
