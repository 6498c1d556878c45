//! The HTTP API on an ephemeral port: store the scenario, then verify a question.

use pilot::scenario::Store;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

async fn call(addr: std::net::SocketAddr, method: &str, path: &str, body: &Value) -> std::io::Result<(u16, Value)> {
    let payload = body.to_string();
    let mut conn = TcpStream::connect(addr).await?;
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    conn.write_all(req.as_bytes()).await?;
    let mut raw = String::new();
    conn.read_to_string(&mut raw).await?;
    let status = raw.get(9..12).and_then(|s| s.parse().ok()).unwrap_or(0);
    let body = raw.split_once("\r\n\r\n").map(|(_, b)| b).unwrap_or_default();
    Ok((status, serde_json::from_str(body).unwrap_or(Value::Null)))
}

async fn run_example_async() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let app = pilot::service::router(Store::open(dir.path())?);
    tokio::spawn(async move { axum::serve(listener, app).await });

    let scenario: Value = serde_json::from_str(include_str!("../fixtures/anpr.scenario.json"))?;
    let (status, created) = call(addr, "POST", "/scenarios", &scenario).await?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    let mut out = vec![format!("POST /scenarios -> {status}")];

    let (status, verdict) = call(
        addr,
        "POST",
        &format!("/scenarios/{id}/verify"),
        &json!({
            "variant": "p_trans",
            "assumptions": ["parketww_leaks_to_carinsure", "carinsure_profiles"],
            "question": "carinsure_receives"
        }),
    )
    .await?;
    out.push(format!(
        "verify -> {status}: {} / {}",
        verdict["answer"], verdict["respected"]
    ));
    for step in verdict["witness"].as_array().into_iter().flatten() {
        out.push(format!("  {}", step["text"].as_str().unwrap_or_default()));
    }

    let (status, parsed) = call(
        addr,
        "POST",
        "/policies/parse",
        &json!({ "text": include_str!("../fixtures/alice.pilot") }),
    )
    .await?;
    out.push(format!("parse -> {status}: {}", parsed["rendered"]));
    Ok(out)
}

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?
        .block_on(run_example_async())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    for line in run_example()? {
        println!("{line}");
    }
    Ok(())
}
