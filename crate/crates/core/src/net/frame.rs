//! `DFL1 | tag u8 | len u32 BE | payload`. Payloads are the canonical
//! encodings of the protocol messages; tag 0x05 is the connection hello.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode};
use crate::crypto::{Address, PublicKey};
use crate::protocol::{Message, MessageKind};

pub const MAGIC: &[u8; 4] = b"DFL1";
pub const TAG_HELLO: u8 = 0x05;
/// Refuse frames larger than this rather than allocate blindly.
pub const MAX_PAYLOAD: u32 = 256 << 20;

/// First frame on every connection, in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hello {
    pub public_key: PublicKey,
}

impl Hello {
    pub fn address(&self) -> Address {
        Address::of(&self.public_key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Hello(Hello),
    Message(Message),
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(u32),
    /// The payload was consumed; the stream is still aligned.
    #[error("unknown frame tag {0:#04x}")]
    UnknownTag(u8),
    /// The payload was consumed; the stream is still aligned.
    #[error("undecodable {kind} payload: {source}")]
    Decode {
        kind: &'static str,
        source: DecodeError,
    },
}

impl FrameError {
    /// Whether the reader can carry on with the next frame.
    pub fn is_recoverable(&self) -> bool {
        matches!(self, FrameError::UnknownTag(_) | FrameError::Decode { .. })
    }
}

impl Frame {
    pub fn tag(&self) -> u8 {
        match self {
            Frame::Hello(_) => TAG_HELLO,
            Frame::Message(m) => m.kind().tag(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload = match self {
            Frame::Hello(h) => h.public_key.to_canonical_bytes(),
            Frame::Message(m) => m.encode_payload(),
        };
        let mut out = Vec::with_capacity(payload.len() + 9);
        out.extend_from_slice(MAGIC);
        out.push(self.tag());
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(tag: u8, payload: &[u8]) -> Result<Frame, FrameError> {
        if tag == TAG_HELLO {
            return PublicKey::from_canonical_bytes(payload)
                .map(|public_key| Frame::Hello(Hello { public_key }))
                .map_err(|source| FrameError::Decode { kind: "hello", source });
        }
        let kind = MessageKind::from_tag(tag).ok_or(FrameError::UnknownTag(tag))?;
        Message::decode_payload(kind, payload)
            .map(Frame::Message)
            .map_err(|source| FrameError::Decode { kind: kind.name(), source })
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    w.write_all(&frame.encode())?;
    w.flush()
}

/// Reads one frame. A clean end of stream before the header is `Closed`.
pub fn read_frame(r: &mut impl Read) -> Result<Frame, FrameError> {
    let mut header = [0u8; 9];
    let mut filled = 0;
    while filled < header.len() {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(FrameError::Closed),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    let tag = header[4];
    let len = u32::from_be_bytes(header[5..9].try_into().expect("4 bytes"));
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Frame::decode(tag, &payload)
}
