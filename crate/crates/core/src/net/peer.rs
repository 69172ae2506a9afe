//! Peer connections: one reader and one writer thread per connection, a
//! shared peer table, and dialers that reconnect with backoff.

use std::collections::HashMap;
use std::io::Write;
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::frame::{read_frame, write_frame, Frame, FrameError, Hello};
use super::log::TransportEvent;
use crate::crypto::Address;
use crate::model::LabeledSample;
use crate::profiler::{Category, Profiler};
use crate::protocol::Message;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
const BACKOFF_START: Duration = Duration::from_millis(100);
const BACKOFF_MAX: Duration = Duration::from_secs(5);
const POLL: Duration = Duration::from_millis(20);

/// What connection threads hand to the protocol loop.
#[derive(Debug)]
pub(crate) enum Inbound {
    Data(Vec<LabeledSample>),
    Message(Message),
    PeerUp(Address),
    PeerDown(Address),
    Transport(TransportEvent),
}

type Outbound = (Category, Arc<Vec<u8>>);

struct PeerConn {
    id: u64,
    queue: SyncSender<Outbound>,
    stream: TcpStream,
}

/// State shared by every transport thread.
pub(crate) struct Transport {
    hello: Hello,
    me: Address,
    peers: Mutex<HashMap<Address, PeerConn>>,
    inbox: Mutex<Sender<Inbound>>,
    profiler: Arc<Profiler>,
    queue_len: usize,
    next_id: AtomicU64,
    pub(crate) stop: Arc<AtomicBool>,
}

#[derive(Debug)]
pub(crate) enum SendOutcome {
    Queued,
    Dropped(&'static str),
}

impl Transport {
    pub(crate) fn new(
        hello: Hello,
        inbox: Sender<Inbound>,
        profiler: Arc<Profiler>,
        queue_len: usize,
        stop: Arc<AtomicBool>,
    ) -> Arc<Self> {
        Arc::new(Self {
            me: hello.address(),
            hello,
            peers: Mutex::new(HashMap::new()),
            inbox: Mutex::new(inbox),
            profiler,
            queue_len,
            next_id: AtomicU64::new(0),
            stop,
        })
    }

    fn notify(&self, event: Inbound) {
        // The loop may already be gone during shutdown.
        let _ = self.inbox.lock().expect("inbox lock").send(event);
    }

    /// Queues an encoded frame without blocking; a full queue drops it.
    pub(crate) fn send(&self, to: &Address, category: Category, frame: Arc<Vec<u8>>) -> SendOutcome {
        let peers = self.peers.lock().expect("peer lock");
        let Some(conn) = peers.get(to) else {
            return SendOutcome::Dropped("peer not connected");
        };
        match conn.queue.try_send((category, frame)) {
            Ok(()) => SendOutcome::Queued,
            Err(TrySendError::Full(_)) => SendOutcome::Dropped("outbound queue full"),
            Err(TrySendError::Disconnected(_)) => SendOutcome::Dropped("connection closing"),
        }
    }

    pub(crate) fn shutdown_all(&self) {
        for (_, conn) in self.peers.lock().expect("peer lock").drain() {
            let _ = conn.stream.shutdown(Shutdown::Both);
        }
    }

    /// Exchanges hellos and, unless this peer is already connected, starts
    /// the connection's threads. Returns the reader thread to wait on.
    fn establish(self: &Arc<Self>, stream: TcpStream) -> Result<(Address, JoinHandle<()>), String> {
        let _ = stream.set_nodelay(true);
        let mut writer = stream.try_clone().map_err(|e| e.to_string())?;
        write_frame(&mut writer, &Frame::Hello(self.hello)).map_err(|e| format!("hello: {e}"))?;
        stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)).map_err(|e| e.to_string())?;
        let mut reader = stream.try_clone().map_err(|e| e.to_string())?;
        let peer = match read_frame(&mut reader) {
            Ok(Frame::Hello(h)) => h.address(),
            Ok(Frame::Message(m)) => return Err(format!("expected hello, got {}", m.kind().name())),
            Err(e) => return Err(format!("hello: {e}")),
        };
        stream.set_read_timeout(None).map_err(|e| e.to_string())?;
        if peer == self.me {
            return Err("connected to self".into());
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (queue, rx) = sync_channel::<Outbound>(self.queue_len);
        {
            let mut peers = self.peers.lock().expect("peer lock");
            if peers.contains_key(&peer) {
                return Err(format!("{peer} is already connected"));
            }
            let stream = stream.try_clone().map_err(|e| e.to_string())?;
            peers.insert(peer, PeerConn { id, queue, stream });
        }
        self.notify(Inbound::PeerUp(peer));
        let t = self.clone();
        let shut = stream.try_clone().map_err(|e| e.to_string())?;
        thread::spawn(move || t.write_loop(writer, shut, rx));
        let t = self.clone();
        let handle = thread::spawn(move || t.read_loop(reader, stream, peer, id));
        Ok((peer, handle))
    }

    fn write_loop(&self, mut w: TcpStream, shut: TcpStream, rx: Receiver<Outbound>) {
        while let Ok((category, bytes)) = rx.recv() {
            let r = self.profiler.time(category, || w.write_all(&bytes).and_then(|_| w.flush()));
            if r.is_err() {
                let _ = shut.shutdown(Shutdown::Both);
                break;
            }
        }
    }

    fn read_loop(&self, mut r: TcpStream, stream: TcpStream, peer: Address, id: u64) {
        loop {
            match read_frame(&mut r) {
                Ok(Frame::Message(m)) => self.notify(Inbound::Message(m)),
                Ok(Frame::Hello(_)) => self.notify(Inbound::Transport(TransportEvent::FrameDropped {
                    peer,
                    cause: "repeated hello".into(),
                })),
                Err(e) if e.is_recoverable() => {
                    log::warn!("frame from {peer} dropped: {e}");
                    self.notify(Inbound::Transport(TransportEvent::FrameDropped { peer, cause: e.to_string() }));
                }
                Err(FrameError::Closed) => break,
                Err(e) => {
                    log::warn!("connection to {peer} failed: {e}");
                    break;
                }
            }
        }
        let _ = stream.shutdown(Shutdown::Both);
        let mut peers = self.peers.lock().expect("peer lock");
        if peers.get(&peer).is_some_and(|c| c.id == id) {
            peers.remove(&peer);
            drop(peers);
            self.notify(Inbound::PeerDown(peer));
        }
    }

    fn sleep_unless_stopped(&self, d: Duration) -> bool {
        let mut left = d;
        while !left.is_zero() {
            if self.stop.load(Ordering::Relaxed) {
                return false;
            }
            let step = left.min(POLL);
            thread::sleep(step);
            left -= step;
        }
        !self.stop.load(Ordering::Relaxed)
    }

    /// Accepts inbound connections until stopped.
    pub(crate) fn accept_loop(self: Arc<Self>, listener: TcpListener) {
        if let Err(e) = listener.set_nonblocking(true) {
            log::error!("listener: {e}");
            return;
        }
        while !self.stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((stream, from)) => {
                    let _ = stream.set_nonblocking(false);
                    let t = self.clone();
                    thread::spawn(move || {
                        if let Err(e) = t.establish(stream) {
                            log::info!("inbound connection from {from} rejected: {e}");
                        }
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    }

    /// Keeps one connection to `target` alive, reconnecting with
    /// exponential backoff. Failures are logged, never fatal.
    pub(crate) fn dial_loop(self: Arc<Self>, target: String) {
        let mut backoff = BACKOFF_START;
        while !self.stop.load(Ordering::Relaxed) {
            let attempt = target
                .to_socket_addrs()
                .map_err(|e| e.to_string())
                .and_then(|mut a| a.next().ok_or_else(|| "no address".to_string()))
                .and_then(|a| TcpStream::connect_timeout(&a, HANDSHAKE_TIMEOUT).map_err(|e| e.to_string()))
                .and_then(|s| self.establish(s));
            match attempt {
                Ok((peer, reader)) => {
                    log::info!("connected to {peer} at {target}");
                    backoff = BACKOFF_START;
                    let _ = reader.join();
                    log::info!("lost {peer} at {target}");
                }
                Err(e) => {
                    log::info!("dial {target} failed: {e}; retrying in {backoff:?}");
                    self.notify(Inbound::Transport(TransportEvent::DialFailed {
                        target: target.clone(),
                        cause: e,
                    }));
                    if !self.sleep_unless_stopped(backoff) {
                        break;
                    }
                    backoff = (backoff * 2).min(BACKOFF_MAX);
                }
            }
        }
    }
}
