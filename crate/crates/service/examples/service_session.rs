//! Starts the service on an ephemeral local port, runs SA through the HTTP
//! API and follows it on the event stream, the way the console does.

use std::sync::Arc;

use anyhow::Result;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use transponder_core::Profile;
use transponder_service::{router, Registry};

async fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> Result<String> {
    let mut s = TcpStream::connect(addr).await?;
    let req = format!(
        "{method} {path} HTTP/1.1\r\nhost: {addr}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).await?;
    let mut out = String::new();
    s.read_to_string(&mut out).await?;
    Ok(out.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default())
}

#[tokio::main]
async fn main() -> Result<()> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let app = router(Arc::new(Registry::new(Profile::default())));
    tokio::spawn(async move { axum::serve(listener, app).await });
    println!("service on http://{addr}");

    let created = request(addr, "POST", "/runs", r#"{"kind":"sa","config":{"max_steps":5000,"seed":1}}"#).await?;
    println!("POST /runs -> {created}");
    let id = serde_json::from_str::<serde_json::Value>(&created)?["id"].as_str().unwrap_or_default().to_string();

    // the stream replays every point, then ends with the final handle
    let events = request(addr, "GET", &format!("/runs/{id}/events"), "").await?;
    let points = events.matches("event: point").count();
    println!("event stream delivered {points} points");

    let state = request(addr, "GET", &format!("/runs/{id}/state"), "").await?;
    let v: serde_json::Value = serde_json::from_str(&state)?;
    println!("final reward {}", v["reward"]);
    println!("gauges {}", v["state"]["gauges"]);
    for l in v["state"]["links"].as_array().into_iter().flatten() {
        println!("link {} W, margin_ok {}", l["eirp"], l["margin_ok"]);
    }
    Ok(())
}
