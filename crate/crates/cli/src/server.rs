//! Steering service: one worker thread per session drains a bounded FIFO of
//! requests; each connection gets its replies in request order.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TryRecvError, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use nalgebra::Vector3;
use tungstenite::Message;

use forge_core::camera::{pose_line, ActionKey, CameraPose, Intrinsics};
use forge_core::codec::decode_frame;
use forge_core::denoise::Denoiser;
use forge_core::extend::SessionState;
use forge_core::Rgba8Image;

use crate::config::RunConfig;
use crate::preview::{render_preview, Scene};
use crate::protocol::{self, b64, ErrorKind, Status, SteerMessage, SteerReply, Verb};

enum Request {
    Key(ActionKey),
    Reset,
    Export,
}

struct Job {
    request: Request,
    verb: Verb,
    reply: Sender<SteerReply>,
}

#[derive(Clone)]
struct SessionHandle {
    jobs: SyncSender<Job>,
    queued: Arc<AtomicUsize>,
}

struct Shared {
    cfg: RunConfig,
    denoiser: Arc<dyn Denoiser>,
    scene: Scene,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    next_id: AtomicU64,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
}

/// Stops a server started with [`Server::spawn`].
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<thread::JoinHandle<()>>,
}

impl ServerHandle {
    /// Stops accepting connections. Open connections finish on their own.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Server {
    pub fn bind(cfg: RunConfig, denoiser: Arc<dyn Denoiser>) -> io::Result<Self> {
        let listener = TcpListener::bind((cfg.serve.host.as_str(), cfg.serve.port))?;
        let scene = Scene { scale: cfg.serve.preview_scale, ..Scene::default() };
        let shared = Arc::new(Shared {
            cfg,
            denoiser,
            scene,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        });
        Ok(Self { listener, shared, stop: Arc::new(AtomicBool::new(false)) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn serve(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let shared = Arc::clone(&self.shared);
            thread::spawn(move || {
                let _ = handle_connection(&shared, stream);
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::clone(&self.stop);
        let thread = thread::spawn(move || {
            let _ = self.serve();
        });
        Ok(ServerHandle { addr, stop, thread: Some(thread) })
    }
}

fn ready(reply: SteerReply) -> Receiver<SteerReply> {
    let (tx, rx) = mpsc::channel();
    let _ = tx.send(reply);
    rx
}

fn png_b64(img: &Rgba8Image) -> String {
    b64::encode(&img.to_png_bytes().expect("png encoding to memory"))
}

impl Shared {
    fn dispatch(self: &Arc<Self>, payload: &[u8]) -> Receiver<SteerReply> {
        let msg: SteerMessage = match serde_json::from_slice(payload) {
            Ok(m) => m,
            Err(e) => return ready(SteerReply::error(None, None, ErrorKind::BadMessage, e.to_string())),
        };
        let bad = |m: &SteerMessage, text: &str| ready(SteerReply::error(m.session.clone(), m.verb, ErrorKind::BadMessage, text));
        let Some(verb) = msg.verb else { return bad(&msg, "missing verb") };
        if verb == Verb::Start {
            return ready(self.start(&msg));
        }
        let Some(id) = msg.session.clone() else { return bad(&msg, "missing session") };
        let request = match verb {
            Verb::Key => match msg.key.as_deref().map(str::parse::<ActionKey>) {
                Some(Ok(k)) => Request::Key(k),
                Some(Err(e)) => return bad(&msg, &e.to_string()),
                None => return bad(&msg, "key verb without key"),
            },
            Verb::Reset => Request::Reset,
            Verb::Export => Request::Export,
            Verb::Start => unreachable!(),
        };
        let handle = self.sessions.lock().unwrap().get(&id).cloned();
        let Some(handle) = handle else {
            return ready(SteerReply::error(Some(id.clone()), Some(verb), ErrorKind::UnknownSession, format!("no session {id:?}")));
        };
        let (tx, rx) = mpsc::channel();
        handle.queued.fetch_add(1, Ordering::SeqCst);
        match handle.jobs.try_send(Job { request, verb, reply: tx }) {
            Ok(()) => rx,
            Err(TrySendError::Full(job)) => {
                handle.queued.fetch_sub(1, Ordering::SeqCst);
                let depth = self.cfg.serve.queue_depth;
                ready(SteerReply::error(Some(id), Some(job.verb), ErrorKind::QueueOverflow, format!("{depth} requests already queued")))
            }
            Err(TrySendError::Disconnected(_)) => {
                handle.queued.fetch_sub(1, Ordering::SeqCst);
                ready(SteerReply::error(Some(id), Some(verb), ErrorKind::UnknownSession, "session worker stopped"))
            }
        }
    }

    fn start_pose(&self, image: &Rgba8Image) -> CameraPose {
        let s = &self.cfg.session;
        CameraPose::looking_forward(
            Vector3::new(0.0, s.eye_height, 0.0),
            Intrinsics::centered(image.width(), image.height(), s.fov),
        )
    }

    fn start(self: &Arc<Self>, msg: &SteerMessage) -> SteerReply {
        let bad = |text: String| SteerReply::error(None, Some(Verb::Start), ErrorKind::BadMessage, text);
        let Some(text) = &msg.image else { return bad("start without image".into()) };
        let bytes = match b64::decode(text) {
            Ok(b) => b,
            Err(e) => return bad(format!("image is not base64: {e}")),
        };
        let image = match Rgba8Image::from_png_bytes(&bytes) {
            Ok(i) => i,
            Err(e) => return bad(e.to_string()),
        };
        let pose = self.start_pose(&image);
        let state = match SessionState::start(&image, pose, self.cfg.session_config()) {
            Ok(s) => s,
            Err(e) => return bad(e.to_string()),
        };
        let id = format!("session-{:04}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let reply = self.frames_reply(&id, Verb::Start, Status::Started, &state, 0, 0);
        let (jobs, rx) = mpsc::sync_channel(self.cfg.serve.queue_depth);
        let queued = Arc::new(AtomicUsize::new(0));
        let worker = Worker { id: id.clone(), state, image, pose, shared: Arc::clone(self), queued: Arc::clone(&queued) };
        thread::spawn(move || worker.run(rx));
        self.sessions.lock().unwrap().insert(id, SessionHandle { jobs, queued });
        reply
    }

    fn frames_reply(&self, id: &str, verb: Verb, status: Status, state: &SessionState, from: usize, queued: usize) -> SteerReply {
        let end = state.frame_count();
        let poses = &state.trajectory().poses[from..end];
        SteerReply {
            session: Some(id.to_string()),
            verb: Some(verb),
            status,
            frame_range: Some((from, end)),
            frame_count: end,
            poses: poses.iter().enumerate().map(|(k, p)| pose_line(from + k, p)).collect(),
            previews: poses.iter().map(|p| png_b64(&render_preview(p, &self.scene))).collect(),
            frames: (from..end).map(|t| png_b64(&decode_frame(state.timeline(), t).expect("frame in range"))).collect(),
            queued,
            path: None,
            error: None,
        }
    }
}

struct Worker {
    id: String,
    state: SessionState,
    image: Rgba8Image,
    pose: CameraPose,
    shared: Arc<Shared>,
    queued: Arc<AtomicUsize>,
}

impl Worker {
    fn run(mut self, jobs: Receiver<Job>) {
        for job in jobs {
            self.queued.fetch_sub(1, Ordering::SeqCst);
            let reply = self.handle(job.request, job.verb);
            let _ = job.reply.send(reply);
        }
    }

    fn handle(&mut self, request: Request, verb: Verb) -> SteerReply {
        let queued = self.queued.load(Ordering::SeqCst);
        let fail = |kind, e: &dyn std::fmt::Display| SteerReply { queued, ..SteerReply::error(Some(self.id.clone()), Some(verb), kind, e.to_string()) };
        match request {
            Request::Key(key) => {
                let from = self.state.frame_count();
                let kind = self.shared.cfg.session.kind;
                match self.state.extend(&[key], kind, self.shared.denoiser.as_ref()) {
                    Ok(_) => self.shared.frames_reply(&self.id, verb, Status::Extended, &self.state, from, queued),
                    Err(e) => fail(ErrorKind::Rejected, &e),
                }
            }
            Request::Reset => match SessionState::start(&self.image, self.pose, self.shared.cfg.session_config()) {
                Ok(s) => {
                    self.state = s;
                    self.shared.frames_reply(&self.id, verb, Status::Reset, &self.state, 0, queued)
                }
                Err(e) => fail(ErrorKind::Internal, &e),
            },
            Request::Export => {
                let dir = self.shared.cfg.serve.session_root.join(&self.id);
                match self.state.export(&dir) {
                    Ok(()) => {
                        let n = self.state.frame_count();
                        SteerReply {
                            frame_range: Some((n, n)),
                            frame_count: n,
                            status: Status::Exported,
                            path: Some(dir.display().to_string()),
                            error: None,
                            ..fail(ErrorKind::Internal, &"")
                        }
                    }
                    Err(e) => fail(ErrorKind::Internal, &e),
                }
            }
        }
    }
}

fn handle_connection(shared: &Arc<Shared>, stream: TcpStream) -> io::Result<()> {
    let mut head = [0u8; 4];
    let mut waited = 0;
    loop {
        let n = stream.peek(&mut head)?;
        if n == 0 {
            return Ok(());
        }
        if n == 4 || waited > 5000 {
            break;
        }
        thread::sleep(Duration::from_millis(1));
        waited += 1;
    }
    if &head == b"GET " {
        handle_http(shared, stream)
    } else {
        handle_framed(shared, stream)
    }
}

fn handle_framed(shared: &Arc<Shared>, stream: TcpStream) -> io::Result<()> {
    let mut reader = stream.try_clone()?;
    let mut writer = stream;
    let (order_tx, order_rx) = mpsc::channel::<Receiver<SteerReply>>();
    let out = thread::spawn(move || {
        for pending in order_rx {
            let reply = pending
                .recv()
                .unwrap_or_else(|_| SteerReply::error(None, None, ErrorKind::Internal, "session worker stopped"));
            if protocol::send(&mut writer, &reply).is_err() {
                break;
            }
        }
    });
    loop {
        match protocol::read_frame(&mut reader) {
            Ok(Some(payload)) => {
                let _ = order_tx.send(shared.dispatch(&payload));
            }
            Ok(None) => break,
            Err(e) => {
                let _ = order_tx.send(ready(SteerReply::error(None, None, ErrorKind::BadMessage, e.to_string())));
                break;
            }
        }
    }
    drop(order_tx);
    let _ = out.join();
    Ok(())
}

/// Reads up to the end of the request head without consuming it.
fn peek_head(stream: &TcpStream) -> io::Result<Option<String>> {
    let mut buf = vec![0u8; 16 << 10];
    for _ in 0..5000 {
        let n = stream.peek(&mut buf)?;
        if let Some(end) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            return Ok(Some(String::from_utf8_lossy(&buf[..end + 4]).into_owned()));
        }
        if n == buf.len() || n == 0 {
            return Ok(None);
        }
        thread::sleep(Duration::from_millis(1));
    }
    Ok(None)
}

fn handle_http(shared: &Arc<Shared>, mut stream: TcpStream) -> io::Result<()> {
    let Some(head) = peek_head(&stream)? else { return Ok(()) };
    let upgrade = head.lines().any(|l| {
        let l = l.to_ascii_lowercase();
        l.starts_with("upgrade:") && l.contains("websocket")
    });
    if upgrade {
        return handle_websocket(shared, stream);
    }
    let mut consumed = vec![0u8; head.len()];
    stream.read_exact(&mut consumed)?;
    let path = head.split_whitespace().nth(1).unwrap_or("/");
    let (status, ctype, body) = match shared.cfg.serve.static_dir.as_deref().and_then(|root| static_file(root, path)) {
        Some(file) => match std::fs::read(&file) {
            Ok(body) => ("200 OK", content_type(&file), body),
            Err(_) => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
        },
        None => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
    };
    write!(stream, "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len())?;
    stream.write_all(&body)?;
    stream.flush()
}

fn static_file(root: &Path, url: &str) -> Option<PathBuf> {
    let rel = url.split(['?', '#']).next().unwrap_or("/").trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    let path = root.join(rel);
    path.is_file().then_some(path)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "png" => "image/png",
        "svg" => "image/svg+xml",
        "wasm" => "application/wasm",
        _ => "application/octet-stream",
    }
}

/// WebSocket transport: a binary message carries one length-prefixed frame,
/// a text message carries bare JSON. Replies use the same form as the
/// request they answer.
fn handle_websocket(shared: &Arc<Shared>, stream: TcpStream) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(5)))?;
    let mut pending: VecDeque<(Receiver<SteerReply>, bool)> = VecDeque::new();
    let mut open = true;
    while open || !pending.is_empty() {
        if open {
            match ws.read() {
                Ok(Message::Binary(bytes)) => {
                    let rx = match protocol::unframe(&bytes) {
                        Some(payload) => shared.dispatch(payload),
                        None => ready(SteerReply::error(None, None, ErrorKind::BadMessage, "binary message is not one length-prefixed frame")),
                    };
                    pending.push_back((rx, true));
                }
                Ok(Message::Text(text)) => pending.push_back((shared.dispatch(text.as_bytes()), false)),
                Ok(Message::Close(_)) => open = false,
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                Err(_) => return Ok(()),
            }
        } else {
            thread::sleep(Duration::from_millis(2));
        }
        while let Some((rx, binary)) = pending.front() {
            let reply = match rx.try_recv() {
                Ok(r) => r,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => SteerReply::error(None, None, ErrorKind::Internal, "session worker stopped"),
            };
            let json = serde_json::to_vec(&reply)?;
            let msg = if *binary {
                Message::Binary(protocol::frame(&json).into())
            } else {
                Message::Text(String::from_utf8(json).expect("json is utf-8").into())
            };
            pending.pop_front();
            if ws.send(msg).is_err() {
                return Ok(());
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}
