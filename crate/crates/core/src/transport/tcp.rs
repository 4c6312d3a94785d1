// SPDX-License-Identifier: Apache-2.0

//! TCP transport and the threaded runtime that drives a component over it.
//!
//! One connection per message: connect, write one frame, close. Each node
//! has an accept thread feeding an event-loop thread, so a component only
//! ever sees one event at a time.

use std::io::BufReader;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crate::ports::{PortPlan, PortRange};
use crate::profile::{HostProfile, HostSampler};
use crate::protocol::{decode_message, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{Component, Env, Factory, SpawnError, Timer, TransportError};

use super::frame::{encode_frame, read_frame, write_frame};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(2);
const POLL: Duration = Duration::from_millis(50);

pub fn wall_clock_ms() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64() * 1000.0)
        .unwrap_or(0.0)
}

/// Stamps `sentAtSourceTimestamp` and writes `msg` to its destination.
pub fn send(mut msg: MessageEnvelope) -> Result<(), TransportError> {
    msg.sent_at_source_timestamp = wall_clock_ms();
    let frame = encode_frame(&msg)?;
    let dest = msg.destination.addr.clone();
    let addr = dest.socket_addr()?;
    let mut stream =
        TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT).map_err(|_| TransportError::Unreachable(dest.clone()))?;
    std::io::Write::write_all(&mut stream, &frame)?;
    let _ = stream.shutdown(Shutdown::Write);
    Ok(())
}

/// A bound socket with its accept thread.
pub struct Listener {
    endpoint: Endpoint,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Listener {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn close(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn bind(ep: &Endpoint) -> Result<TcpListener, TransportError> {
    let addr = ep.socket_addr()?;
    let sock = TcpListener::bind(addr).map_err(|e| TransportError::Bind(ep.clone(), e.to_string()))?;
    sock.set_nonblocking(true)?;
    Ok(sock)
}

fn serve(sock: TcpListener, ep: Endpoint, mut handler: impl FnMut(MessageEnvelope) + Send + 'static) -> Listener {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let name = ep.clone();
    let thread = thread::spawn(move || {
        let ep = name;
        while !flag.load(Ordering::SeqCst) {
            match sock.accept() {
                Ok((stream, _)) => {
                    let _ = stream.set_nonblocking(false);
                    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
                    let mut r = BufReader::new(stream);
                    loop {
                        match read_frame(&mut r) {
                            Ok(Some(raw)) => match decode_message(&raw) {
                                Ok(mut msg) => {
                                    msg.received_at_local_timestamp = wall_clock_ms();
                                    handler(msg);
                                }
                                Err(e) => log::warn!("{ep}: dropping undecodable message: {e}"),
                            },
                            Ok(None) => break,
                            Err(e) => {
                                log::warn!("{ep}: bad frame: {e}");
                                break;
                            }
                        }
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) => {
                    log::warn!("{ep}: accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    });
    Listener {
        endpoint: ep,
        stop,
        thread: Some(thread),
    }
}

/// Binds `bind` (which must lie in `range`) and calls `handler` for every
/// decoded message, stamped with its arrival time.
pub fn listen(
    bind_at: &Endpoint,
    range: PortRange,
    handler: impl FnMut(MessageEnvelope) + Send + 'static,
) -> Result<Listener, TransportError> {
    if !range.contains(bind_at.port()) {
        return Err(TransportError::OutOfRange {
            port: bind_at.port(),
            range,
        });
    }
    let sock = bind(bind_at)?;
    Ok(serve(sock, bind_at.clone(), handler))
}

/// Shared by a node and everything it spawns.
#[derive(Default)]
pub struct NodeOptions {
    pub plan: PortPlan,
    /// Overrides live sampling, e.g. to emulate a weaker host.
    pub profile: Option<HostProfile>,
    /// Checked after every event; the node stops once it returns true.
    pub stop_when: Option<Box<dyn Fn(&dyn Component) -> bool + Send>>,
}


struct Shared {
    plan: PortPlan,
    profile: Option<HostProfile>,
    sampler: Mutex<HostSampler>,
    children: Mutex<Vec<NodeHandle>>,
}

enum NodeEvent {
    Message(MessageEnvelope),
    Stop,
}

pub struct NodeHandle {
    endpoint: Endpoint,
    tx: Sender<NodeEvent>,
    thread: Option<JoinHandle<Box<dyn Component>>>,
    listener: Option<Listener>,
    shared: Arc<Shared>,
}

impl NodeHandle {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn is_finished(&self) -> bool {
        self.thread.as_ref().is_none_or(|t| t.is_finished())
    }

    pub fn stop(&self) {
        let _ = self.tx.send(NodeEvent::Stop);
    }

    /// Waits for the component to finish, then stops everything it spawned.
    /// Returns the component for inspection.
    pub fn join(mut self) -> Option<Box<dyn Component>> {
        let component = self.thread.take().and_then(|t| t.join().ok());
        self.teardown();
        component
    }

    /// Like [`join`](Self::join) but gives up after `timeout`, stopping the
    /// node first.
    pub fn join_timeout(self, timeout: Duration) -> Option<Box<dyn Component>> {
        let deadline = Instant::now() + timeout;
        while !self.is_finished() && Instant::now() < deadline {
            thread::sleep(Duration::from_millis(10));
        }
        self.stop();
        self.join()
    }

    fn teardown(&mut self) {
        if let Some(l) = self.listener.take() {
            l.close();
        }
        let children: Vec<NodeHandle> = std::mem::take(&mut *self.shared.children.lock().unwrap());
        for c in children {
            c.stop();
            c.join();
        }
    }
}

impl Drop for NodeHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop();
            if let Some(t) = self.thread.take() {
                let _ = t.join();
            }
        }
        self.teardown();
    }
}

/// Binds `bind_at` and runs the component built by `factory` on its own
/// thread.
pub fn start_node(bind_at: Endpoint, opts: NodeOptions, factory: Factory) -> Result<NodeHandle, TransportError> {
    let sock = bind(&bind_at)?;
    let shared = Arc::new(Shared {
        plan: opts.plan,
        profile: opts.profile,
        sampler: Mutex::new(HostSampler::new()),
        children: Mutex::new(Vec::new()),
    });
    Ok(launch(sock, bind_at, shared, opts.stop_when, factory))
}

fn launch(
    sock: TcpListener,
    ep: Endpoint,
    shared: Arc<Shared>,
    stop_when: Option<Box<dyn Fn(&dyn Component) -> bool + Send>>,
    factory: Factory,
) -> NodeHandle {
    let (tx, rx) = mpsc::channel();
    let feed = tx.clone();
    let listener = serve(sock, ep.clone(), move |msg| {
        let _ = feed.send(NodeEvent::Message(msg));
    });
    let component = factory(ep.clone());
    let loop_shared = shared.clone();
    let me = ep.clone();
    let thread = thread::spawn(move || event_loop(component, me, loop_shared, rx, stop_when));
    NodeHandle {
        endpoint: ep,
        tx,
        thread: Some(thread),
        listener: Some(listener),
        shared,
    }
}

fn event_loop(
    mut component: Box<dyn Component>,
    me: Endpoint,
    shared: Arc<Shared>,
    rx: Receiver<NodeEvent>,
    stop_when: Option<Box<dyn Fn(&dyn Component) -> bool + Send>>,
) -> Box<dyn Component> {
    let mut env = RealEnv {
        me,
        shared,
        timers: Vec::new(),
        seq: 0,
        busy_until: None,
        terminated: false,
    };
    component.start(&mut env);
    let done = |c: &dyn Component| stop_when.as_ref().is_some_and(|f| f(c));
    while !env.terminated && !done(component.as_ref()) {
        let now = Instant::now();
        let due = env.timers.iter().enumerate().min_by_key(|(_, t)| (t.0, t.1)).map(|(i, t)| (i, t.0));
        if let Some((i, at)) = due {
            if at <= now {
                let (_, _, timer) = env.timers.swap_remove(i);
                component.on_timer(timer, &mut env);
                continue;
            }
        }
        let wait = due.map_or(POLL, |(_, at)| (at - now).min(POLL));
        match rx.recv_timeout(wait) {
            Ok(NodeEvent::Message(msg)) => component.handle(msg, &mut env),
            Ok(NodeEvent::Stop) | Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => {}
        }
    }
    component
}

struct RealEnv {
    me: Endpoint,
    shared: Arc<Shared>,
    timers: Vec<(Instant, u64, Timer)>,
    seq: u64,
    busy_until: Option<Instant>,
    terminated: bool,
}

impl Env for RealEnv {
    fn now_ms(&self) -> f64 {
        wall_clock_ms()
    }

    fn send(&mut self, msg: MessageEnvelope) -> Result<(), TransportError> {
        send(msg)
    }

    fn set_timer(&mut self, after_ms: f64, timer: Timer) {
        self.seq += 1;
        let after = Duration::from_secs_f64(after_ms.max(0.0) / 1000.0);
        let base = self.busy_until.unwrap_or_else(Instant::now).max(Instant::now());
        self.timers.push((base + after, self.seq, timer));
    }

    fn spawn(&mut self, role: ComponentRole, factory: Factory) -> Result<Endpoint, SpawnError> {
        let range = self.shared.plan.range(role);
        for port in range.iter() {
            let Ok(ep) = Endpoint::new(self.me.ip(), port) else { continue };
            let Ok(sock) = bind(&ep) else { continue };
            let handle = launch(sock, ep.clone(), self.shared.clone(), None, factory);
            self.shared.children.lock().unwrap().push(handle);
            return Ok(ep);
        }
        Err(SpawnError::PortsExhausted { role, range })
    }

    fn host_profile(&mut self) -> HostProfile {
        match &self.shared.profile {
            Some(p) => p.clone(),
            None => self.shared.sampler.lock().unwrap().sample(),
        }
    }

    fn charge_compute(&mut self, _work: f64, wall_ms: f64) -> f64 {
        wall_ms
    }

    fn terminate(&mut self) {
        self.terminated = true;
    }
}

/// Writes raw bytes as one frame; for tests that need malformed input.
pub fn send_raw(dest: &Endpoint, payload: &[u8]) -> Result<(), TransportError> {
    let mut stream = TcpStream::connect_timeout(&dest.socket_addr()?, CONNECT_TIMEOUT)
        .map_err(|_| TransportError::Unreachable(dest.clone()))?;
    write_frame(&mut stream, payload)?;
    let _ = stream.shutdown(Shutdown::Write);
    Ok(())
}
