//! Wire format shared by the TCP and WebSocket transports: each message is
//! a 4-byte big-endian length followed by that many bytes of JSON.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

/// Largest accepted payload.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Start,
    Key,
    Reset,
    Export,
}

/// Client to server. `key` is an action key name such as `"W"` or
/// `"ArrowLeft"`; `image` is a base64 PNG.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub verb: Option<Verb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl SteerMessage {
    pub fn start(png: &[u8]) -> Self {
        Self { verb: Some(Verb::Start), image: Some(b64::encode(png)), ..Default::default() }
    }

    pub fn key(session: &str, key: &str) -> Self {
        Self { session: Some(session.into()), verb: Some(Verb::Key), key: Some(key.into()), ..Default::default() }
    }

    pub fn reset(session: &str) -> Self {
        Self { session: Some(session.into()), verb: Some(Verb::Reset), ..Default::default() }
    }

    pub fn export(session: &str) -> Self {
        Self { session: Some(session.into()), verb: Some(Verb::Export), ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Started,
    Extended,
    Reset,
    Exported,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    UnknownSession,
    BadMessage,
    QueueOverflow,
    /// The session rejected the request (for example an invalid
    /// conditioning choice); its state is unchanged.
    Rejected,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub kind: ErrorKind,
    pub message: String,
}

/// Server to client. Previews are base64 PNG renders of the camera for
/// each new frame, `frames` the decoded generated frames.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteerReply {
    pub session: Option<String>,
    pub verb: Option<Verb>,
    pub status: Status,
    /// Half-open range of frames this reply added or reset to.
    pub frame_range: Option<(usize, usize)>,
    /// Total frames in the session after this reply.
    pub frame_count: usize,
    /// Trajectory lines for `frame_range`.
    pub poses: Vec<String>,
    pub previews: Vec<String>,
    pub frames: Vec<String>,
    /// Keys still waiting in the session queue.
    pub queued: usize,
    pub path: Option<String>,
    pub error: Option<WireError>,
}

impl SteerReply {
    pub fn error(session: Option<String>, verb: Option<Verb>, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            session,
            verb,
            status: Status::Error,
            frame_range: None,
            frame_count: 0,
            poses: Vec::new(),
            previews: Vec::new(),
            frames: Vec::new(),
            queued: 0,
            path: None,
            error: Some(WireError { kind, message: message.into() }),
        }
    }

    pub fn error_kind(&self) -> Option<ErrorKind> {
        self.error.as_ref().map(|e| e.kind)
    }
}

pub mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;

    pub fn encode(bytes: &[u8]) -> String {
        STANDARD.encode(bytes)
    }

    pub fn decode(text: &str) -> Result<Vec<u8>, base64::DecodeError> {
        STANDARD.decode(text)
    }
}

pub fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    w.write_all(&frame(payload))?;
    w.flush()
}

/// Next payload, or `None` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds {MAX_FRAME}")));
    }
    let mut payload = vec![0; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

/// Splits a length-prefixed buffer, as carried in one WebSocket message.
pub fn unframe(buf: &[u8]) -> Option<&[u8]> {
    let len = u32::from_be_bytes(buf.get(..4)?.try_into().ok()?) as usize;
    (buf.len() == 4 + len).then(|| &buf[4..])
}

pub fn send<T: Serialize>(w: &mut impl Write, msg: &T) -> io::Result<()> {
    write_frame(w, &serde_json::to_vec(msg)?)
}

pub fn recv<T: for<'de> Deserialize<'de>>(r: &mut impl Read) -> io::Result<Option<T>> {
    match read_frame(r)? {
        Some(p) => serde_json::from_slice(&p).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"{}").unwrap();
        write_frame(&mut buf, b"[1]").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 2]);
        let mut r = buf.as_slice();
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"{}");
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"[1]");
        assert!(read_frame(&mut r).unwrap().is_none());
        assert_eq!(unframe(&frame(b"abc")), Some(&b"abc"[..]));
        assert_eq!(unframe(b"\0\0\0\x05ab"), None);
    }

    #[test]
    fn truncated_and_oversized_frames() {
        assert!(read_frame(&mut &b"\0\0"[..]).is_err());
        assert!(read_frame(&mut &b"\0\0\0\x09abc"[..]).is_err());
        assert!(read_frame(&mut &b"\xff\xff\xff\xff"[..]).is_err());
    }

    #[test]
    fn message_json_shape() {
        let m = SteerMessage::key("session-0001", "W");
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"session":"session-0001","verb":"key","key":"W"}"#);
        assert!(serde_json::from_str::<SteerMessage>(r#"{"verb":"key","bogus":1}"#).is_err());
        let r = SteerReply::error(None, Some(Verb::Key), ErrorKind::UnknownSession, "no such session");
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#""kind":"UnknownSession""#), "{text}");
        assert_eq!(serde_json::from_str::<SteerReply>(&text).unwrap(), r);
    }
}
