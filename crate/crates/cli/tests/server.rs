use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use forge_cli::protocol::{self, b64, ErrorKind, Status, SteerMessage, SteerReply};
use forge_cli::server::Server;
use forge_cli::RunConfig;
use forge_core::denoise::{BridgeDenoiser, ConditionBundle, Denoiser};
use forge_core::{LatentVolume, Rgba8Image};

fn png() -> Vec<u8> {
    Rgba8Image::from_fn(16, 16, |x, y| [(x * 16) as u8, (y * 16) as u8, 128, 255]).to_png_bytes().unwrap()
}

fn config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.serve.port = 0;
    cfg.serve.session_root = root.join("sessions");
    cfg
}

fn spawn(cfg: RunConfig, model: Arc<dyn Denoiser>) -> SocketAddr {
    Server::bind(cfg, model).unwrap().spawn().unwrap().addr
}

struct Client(TcpStream);

impl Client {
    fn connect(addr: SocketAddr) -> Self {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
        Client(s)
    }

    fn send(&mut self, msg: &SteerMessage) {
        protocol::send(&mut self.0, msg).unwrap();
    }

    fn recv(&mut self) -> SteerReply {
        protocol::recv(&mut self.0).unwrap().expect("reply")
    }

    fn call(&mut self, msg: &SteerMessage) -> SteerReply {
        self.send(msg);
        self.recv()
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn keys_extend_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = Client::connect(spawn(config(tmp.path()), Arc::new(BridgeDenoiser)));
    let start = c.call(&SteerMessage::start(&png()));
    assert_eq!(start.status, Status::Started);
    assert_eq!(start.session.as_deref(), Some("session-0001"));
    assert_eq!(start.frame_range, Some((0, 1)));
    assert_eq!((start.frames.len(), start.previews.len(), start.poses.len()), (1, 1, 1));
    let id = start.session.unwrap();
    for key in ["W", "W", "Right"] {
        c.send(&SteerMessage::key(&id, key));
    }
    let replies: Vec<SteerReply> = (0..3).map(|_| c.recv()).collect();
    let ranges: Vec<_> = replies.iter().map(|r| r.frame_range.unwrap()).collect();
    assert_eq!(ranges, vec![(1, 9), (9, 17), (17, 25)]);
    // a console drawing the path from replies alone gets one vertex per frame
    let vertices = start.poses.len() + replies.iter().map(|r| r.poses.len()).sum::<usize>();
    assert_eq!(vertices, replies[2].frame_count);
    let left = c.call(&SteerMessage::key(&id, "Left"));
    assert_eq!(left.frame_count, 33);
    assert_eq!(left.frames.len(), 8);
    assert!(left.poses[0].starts_with("25 "), "{}", left.poses[0]);
    let preview = Rgba8Image::from_png_bytes(&b64::decode(&left.previews[0]).unwrap()).unwrap();
    assert_eq!((preview.width(), preview.height()), (32, 32));
    let frame = Rgba8Image::from_png_bytes(&b64::decode(&left.frames[7]).unwrap()).unwrap();
    assert_eq!((frame.width(), frame.height()), (16, 16));

    let reset = c.call(&SteerMessage::reset(&id));
    assert_eq!((reset.status, reset.frame_count), (Status::Reset, 1));
    assert_eq!(reset.frames[0], start.frames[0]);
}

#[test]
fn errors_are_replies() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = Client::connect(spawn(config(tmp.path()), Arc::new(BridgeDenoiser)));
    let r = c.call(&SteerMessage::key("session-0001", "W"));
    assert_eq!(r.error_kind(), Some(ErrorKind::UnknownSession));
    protocol::write_frame(&mut c.0, b"{not json").unwrap();
    assert_eq!(c.recv().error_kind(), Some(ErrorKind::BadMessage));
    protocol::write_frame(&mut c.0, br#"{"verb":"key","session":"x","key":"W","extra":1}"#).unwrap();
    assert_eq!(c.recv().error_kind(), Some(ErrorKind::BadMessage));
    let id = c.call(&SteerMessage::start(&png())).session.unwrap();
    assert_eq!(c.call(&SteerMessage::key(&id, "Q")).error_kind(), Some(ErrorKind::BadMessage));
    let mut no_image = SteerMessage::start(&png());
    no_image.image = Some("***".into());
    assert_eq!(c.call(&no_image).error_kind(), Some(ErrorKind::BadMessage));
    assert_eq!(c.call(&SteerMessage::key(&id, "W")).status, Status::Extended);
}

/// Blocks every velocity call until opened and counts entries.
#[derive(Default)]
struct Gate {
    state: Mutex<(bool, usize)>,
    cv: Condvar,
}

impl Gate {
    fn open(&self) {
        self.state.lock().unwrap().0 = true;
        self.cv.notify_all();
    }

    fn wait_entered(&self) {
        let mut s = self.state.lock().unwrap();
        while s.1 == 0 {
            s = self.cv.wait(s).unwrap();
        }
    }
}

impl Denoiser for Gate {
    fn velocity(&self, x: &LatentVolume, t: f32, cond: &ConditionBundle) -> forge_core::Result<LatentVolume> {
        let mut s = self.state.lock().unwrap();
        s.1 += 1;
        self.cv.notify_all();
        while !s.0 {
            s = self.cv.wait(s).unwrap();
        }
        drop(s);
        BridgeDenoiser.velocity(x, t, cond)
    }
}

#[test]
fn queue_overflow_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path());
    cfg.serve.queue_depth = 2;
    let gate = Arc::new(Gate::default());
    let mut c = Client::connect(spawn(cfg, gate.clone()));
    let id = c.call(&SteerMessage::start(&png())).session.unwrap();
    c.send(&SteerMessage::key(&id, "W"));
    gate.wait_entered();
    for _ in 0..3 {
        c.send(&SteerMessage::key(&id, "D"));
    }
    gate.open();
    let replies: Vec<SteerReply> = (0..4).map(|_| c.recv()).collect();
    assert_eq!(replies[..3].iter().map(|r| r.frame_range.unwrap()).collect::<Vec<_>>(), vec![(1, 9), (9, 17), (17, 25)]);
    assert_eq!(replies[3].error_kind(), Some(ErrorKind::QueueOverflow));
    assert_eq!(c.call(&SteerMessage::key(&id, "W")).frame_range, Some((25, 33)));
}

fn steer_and_export(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut c = Client::connect(spawn(config(root), Arc::new(BridgeDenoiser)));
    let id = c.call(&SteerMessage::start(&png())).session.unwrap();
    for key in ["W", "Left"] {
        assert_eq!(c.call(&SteerMessage::key(&id, key)).status, Status::Extended);
    }
    let done = c.call(&SteerMessage::export(&id));
    assert_eq!(done.status, Status::Exported);
    let path = done.path.unwrap();
    assert!(Path::new(&path).starts_with(root));
    dir_bytes(Path::new(&path))
}

#[test]
fn replayed_session_exports_identically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = steer_and_export(a.path());
    assert_eq!(first.keys().cloned().collect::<Vec<_>>(), ["config.json", "segments.jsonl", "timeline.fglv", "trajectory.txt"]);
    assert!(first == steer_and_export(b.path()), "replay differs");

    // the command-line front end, fed the same keys, lands on the same bytes
    let cli = a.path().join("cli-session");
    let image = a.path().join("start.png");
    fs::write(&image, png()).unwrap();
    let forge = env!("CARGO_BIN_EXE_forge");
    let ok = |args: &[&str]| assert!(Command::new(forge).args(args).status().unwrap().success());
    ok(&["extend", cli.to_str().unwrap(), "W", "--image", image.to_str().unwrap()]);
    ok(&["extend", cli.to_str().unwrap(), "Left"]);
    assert!(first == dir_bytes(&cli), "CLI session differs from steered session");
}

#[test]
fn websocket_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let addr = spawn(config(tmp.path()), Arc::new(BridgeDenoiser));
    let (mut ws, _) = tungstenite::client(format!("ws://{addr}/steer"), TcpStream::connect(addr).unwrap()).unwrap();
    let start = serde_json::to_string(&SteerMessage::start(&png())).unwrap();
    ws.send(tungstenite::Message::Text(start.into())).unwrap();
    let reply: SteerReply = match ws.read().unwrap() {
        tungstenite::Message::Text(t) => serde_json::from_str(t.as_str()).unwrap(),
        other => panic!("expected text, got {other:?}"),
    };
    let id = reply.session.unwrap();
    let key = serde_json::to_vec(&SteerMessage::key(&id, "S")).unwrap();
    ws.send(tungstenite::Message::Binary(protocol::frame(&key).into())).unwrap();
    let reply: SteerReply = match ws.read().unwrap() {
        tungstenite::Message::Binary(b) => serde_json::from_slice(protocol::unframe(&b).unwrap()).unwrap(),
        other => panic!("expected binary, got {other:?}"),
    };
    assert_eq!((reply.status, reply.frame_range), (Status::Extended, Some((1, 9))));
    ws.send(tungstenite::Message::Binary(vec![0, 0, 0, 9, b'x'].into())).unwrap();
    match ws.read().unwrap() {
        tungstenite::Message::Binary(b) => {
            let r: SteerReply = serde_json::from_slice(protocol::unframe(&b).unwrap()).unwrap();
            assert_eq!(r.error_kind(), Some(ErrorKind::BadMessage));
        }
        other => panic!("expected binary, got {other:?}"),
    }
    ws.close(None).unwrap();
}

#[test]
fn serves_static_files() {
    let tmp = tempfile::tempdir().unwrap();
    let site = tmp.path().join("site");
    fs::create_dir(&site).unwrap();
    fs::write(site.join("index.html"), "<p>steer</p>").unwrap();
    let mut cfg = config(tmp.path());
    cfg.serve.static_dir = Some(site);
    let addr = spawn(cfg, Arc::new(BridgeDenoiser));
    let get = |path: &str| {
        let mut s = TcpStream::connect(addr).unwrap();
        write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\n\r\n").unwrap();
        let mut text = String::new();
        s.read_to_string(&mut text).unwrap();
        text
    };
    let page = get("/");
    assert!(page.starts_with("HTTP/1.1 200"), "{page}");
    assert!(page.contains("text/html") && page.ends_with("<p>steer</p>"));
    assert!(get("/../etc/passwd").starts_with("HTTP/1.1 404"));
    assert!(get("/missing.js").starts_with("HTTP/1.1 404"));
}
