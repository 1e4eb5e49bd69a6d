use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use riskmaps::rldm::Side;
use riskmaps::sim::{EgoCommand, Scenario, TraceRecord, VehicleMode, World};
use riskmaps::stream::{Inbound, Outbound, StateMessage, STREAM_VERSION};
use tokio::net::TcpListener;
use tokio::sync::Notify;

use crate::Failure;

/// Outbound messages kept for a slow client before the oldest are dropped.
pub const OUTBOX_DEPTH: usize = 16;

struct ServeConfig {
    template: Scenario,
    speed: f64,
}

pub fn serve(mut template: Scenario, addr: SocketAddr, autopilot: bool, speed: f64) -> Result<(), Failure> {
    if !autopilot {
        for v in template.vehicles.iter_mut().filter(|v| v.mode.is_ego()) {
            v.mode = VehicleMode::HumanEgo;
        }
    }
    World::new(template.clone()).map_err(Failure::config)?;
    let rt = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    rt.block_on(async move {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::config(anyhow::anyhow!("binding {addr}: {e}")))?;
        let local = listener.local_addr().map_err(Failure::runtime)?;
        // tests and scripts read the bound port from this line
        println!("listening on ws://{local}/ws");
        tracing::info!(%local, scenario = %template.name, autopilot, speed, "serving");
        let app = Router::new()
            .route("/ws", get(upgrade))
            .with_state(Arc::new(ServeConfig { template, speed }));
        axum::serve(listener, app).await.map_err(Failure::runtime)
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(cfg): State<Arc<ServeConfig>>) -> Response {
    ws.on_upgrade(move |socket| session(socket, cfg))
}

/// Bounded, drop-oldest queue between the cycle loop and the socket writer.
struct Outbox {
    queue: Mutex<VecDeque<String>>,
    notify: Notify,
    closed: Mutex<bool>,
}

impl Outbox {
    fn new() -> Self {
        Self {
            queue: Mutex::new(VecDeque::with_capacity(OUTBOX_DEPTH)),
            notify: Notify::new(),
            closed: Mutex::new(false),
        }
    }

    fn push(&self, msg: &Outbound) {
        let text = serde_json::to_string(msg).expect("plain data serializes");
        let mut q = self.queue.lock().expect("outbox lock");
        if q.len() == OUTBOX_DEPTH {
            q.pop_front();
            tracing::debug!("client is slow, dropped oldest message");
        }
        q.push_back(text);
        drop(q);
        self.notify.notify_one();
    }

    fn close(&self) {
        *self.closed.lock().expect("outbox lock") = true;
        self.notify.notify_one();
    }

    async fn pop(&self) -> Option<String> {
        loop {
            if let Some(m) = self.queue.lock().expect("outbox lock").pop_front() {
                return Some(m);
            }
            if *self.closed.lock().expect("outbox lock") {
                return None;
            }
            self.notify.notified().await;
        }
    }
}

/// Latest-wins inbound state: the newest acceleration holds until replaced,
/// a lane request is consumed by the next cycle.
#[derive(Default)]
struct Mailbox {
    acceleration: f64,
    lane_request: Option<Side>,
    paused: bool,
    reset: bool,
}

impl Mailbox {
    fn apply(&mut self, msg: Inbound) {
        match msg {
            Inbound::Command {
                acceleration_mps2,
                lane_request,
            } => {
                self.acceleration = acceleration_mps2;
                self.lane_request = lane_request.or(self.lane_request);
            }
            Inbound::Pause => self.paused = true,
            Inbound::Resume => self.paused = false,
            Inbound::Reset => self.reset = true,
        }
    }

    fn take_command(&mut self) -> EgoCommand {
        EgoCommand {
            acceleration_mps2: self.acceleration,
            lane_request: self.lane_request.take(),
        }
    }
}

async fn session(socket: WebSocket, cfg: Arc<ServeConfig>) {
    let (mut sink, mut stream) = socket.split();
    let outbox = Arc::new(Outbox::new());
    let mailbox = Arc::new(Mutex::new(Mailbox::default()));

    let writer = {
        let outbox = outbox.clone();
        tokio::spawn(async move {
            while let Some(text) = outbox.pop().await {
                if sink.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            let _ = sink.close().await;
        })
    };

    let reader = {
        let mailbox = mailbox.clone();
        async move {
            while let Some(Ok(msg)) = stream.next().await {
                match msg {
                    Message::Text(text) => match Inbound::parse(&text) {
                        Ok(m) => mailbox.lock().expect("mailbox lock").apply(m),
                        Err(e) => tracing::warn!(error = %e, "ignoring malformed message"),
                    },
                    Message::Close(_) => break,
                    _ => {}
                }
            }
        }
    };

    tokio::select! {
        _ = reader => tracing::info!("client disconnected"),
        res = cycle_loop(&cfg, &mailbox, &outbox) => {
            if let Err(e) = res {
                tracing::error!(error = %e, "session stopped");
            }
        }
    }
    outbox.close();
    let _ = writer.await;
}

async fn cycle_loop(cfg: &ServeConfig, mailbox: &Mutex<Mailbox>, outbox: &Outbox) -> riskmaps::Result<()> {
    let mut world = World::new(cfg.template.clone())?;
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(cfg.template.dt() / cfg.speed));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut last: Option<TraceRecord> = None;
    let mut finished_sent = false;
    let mut was_paused = false;
    loop {
        ticker.tick().await;
        let (command, paused, reset) = {
            let mut m = mailbox.lock().expect("mailbox lock");
            let reset = std::mem::take(&mut m.reset);
            let command = if m.paused { None } else { Some(m.take_command()) };
            (command, m.paused, reset)
        };
        if reset {
            world = World::new(cfg.template.clone())?;
            last = None;
            finished_sent = false;
        }
        if paused {
            if !was_paused {
                if let Some(r) = &last {
                    outbox.push(&Outbound::State(Box::new(StateMessage::from_world(&world, r, true))));
                }
            }
            was_paused = true;
            continue;
        }
        was_paused = false;
        if world.is_finished() {
            if !finished_sent {
                outbox.push(&Outbound::Finished {
                    version: STREAM_VERSION,
                    cycles: world.cycle(),
                });
                finished_sent = true;
            }
            continue;
        }
        let record = world.step(command)?;
        outbox.push(&Outbound::State(Box::new(StateMessage::from_world(
            &world, &record, false,
        ))));
        last = Some(record);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outbox_drops_oldest() {
        let ob = Outbox::new();
        for c in 0..(OUTBOX_DEPTH + 4) {
            ob.push(&Outbound::Finished { version: 1, cycles: c });
        }
        let q = ob.queue.lock().unwrap();
        assert_eq!(q.len(), OUTBOX_DEPTH);
        assert!(q[0].contains("\"cycles\":4"));
    }

    #[test]
    fn mailbox_latest_wins() {
        let mut m = Mailbox::default();
        m.apply(Inbound::Command {
            acceleration_mps2: 1.0,
            lane_request: Some(Side::Left),
        });
        m.apply(Inbound::Command {
            acceleration_mps2: -2.0,
            lane_request: None,
        });
        let c = m.take_command();
        assert_eq!(c.acceleration_mps2, -2.0);
        assert_eq!(c.lane_request, Some(Side::Left));
        assert_eq!(m.take_command().lane_request, None);
        assert_eq!(m.take_command().acceleration_mps2, -2.0);
    }
}
