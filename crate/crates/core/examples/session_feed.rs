//! Drives an interactive session with JSON commands, the way the steering
//! UI does, and reads snapshots from a subscriber feed.

use needle_sim::session::{FeedEvent, ScenarioRef, Session, SessionCommand};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut session = Session::open(&ScenarioRef::Preset("chicken".into()))?;
    let feed = session.subscribe();

    let wire = [
        r#"{"cmd":"advance","payload":{"distance":0.005}}"#,
        r#"{"cmd":"advance","payload":{"distance":0.005}}"#,
        r#"{"cmd":"set_v_input","payload":{"target":"base","deflection":0.001}}"#,
        r#"{"cmd":"advance","payload":{"distance":0.01}}"#,
        r#"{"cmd":"retract","payload":{"distance":0.004}}"#,
        r#"{"cmd":"get_state"}"#,
    ];
    for (i, text) in wire.iter().enumerate() {
        let command: SessionCommand = serde_json::from_str(text)?;
        session.submit(i as u64 + 1, command)?;
    }
    let stale = session.submit(3, SessionCommand::GetState).unwrap_err();
    println!("resubmitting seq 3: {stale} (expected {:?})", stale.expected_seq());

    loop {
        match feed.poll() {
            FeedEvent::Snapshot(s) => println!(
                "step {:>2}: depth {:>5.2} mm, tip ({:.2}, {:.3}) mm, {} constraints",
                s.step,
                s.depth,
                s.tip.x,
                s.tip.y,
                s.constraints.len()
            ),
            FeedEvent::Gap { dropped } => println!("feed dropped {dropped} snapshots"),
            FeedEvent::Heartbeat | FeedEvent::Closed => break,
        }
    }
    let last = session.snapshot();
    println!("latest snapshot JSON is {} bytes", serde_json::to_string(&*last)?.len());
    Ok(())
}
