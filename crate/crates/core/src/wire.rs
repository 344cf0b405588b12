//! Binary framing for the classical channel.
//!
//! ```text
//! +---------+----------+----------------+-----------------+---------+
//! | version | msg_type | session_id     | payload_len     | payload |
//! | u8 (=1) | u8       | u32 big-endian | u16 big-endian  | bytes   |
//! +---------+----------+----------------+-----------------+---------+
//! ```
//!
//! Every message type has a fixed payload size, so a length that disagrees
//! with the type is rejected at the framing layer.

use thiserror::Error;

use crate::exchange::EdgeConvention;

pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8;
pub const DIGEST_LEN: usize = 32;
/// `digest_alg` value for SHA-256, the only algorithm implemented.
pub const DIGEST_SHA256: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("need {needed} more bytes")]
    NeedMoreBytes { needed: usize },

    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown message type 0x{0:02x}")]
    UnknownMessageType(u8),

    #[error("{msg_type:?} payload must be {expected} bytes, got {actual}")]
    BadLength {
        msg_type: MessageType,
        expected: usize,
        actual: usize,
    },

    #[error("bit field holds {0}")]
    InvalidBit(u8),

    #[error("unknown edge convention code {0}")]
    InvalidConvention(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Hello = 0x01,
    RoundOpen = 0x02,
    AliceBit1 = 0x10,
    BobResponse = 0x11,
    AliceBit2 = 0x12,
    CheckReveal = 0x20,
    CheckResult = 0x21,
    KeyConfirm = 0x30,
    Abort = 0xFF,
}

impl MessageType {
    pub const ALL: [MessageType; 9] = [
        MessageType::Hello,
        MessageType::RoundOpen,
        MessageType::AliceBit1,
        MessageType::BobResponse,
        MessageType::AliceBit2,
        MessageType::CheckReveal,
        MessageType::CheckResult,
        MessageType::KeyConfirm,
        MessageType::Abort,
    ];

    pub fn payload_len(self) -> usize {
        match self {
            MessageType::Hello => Hello::LEN,
            MessageType::RoundOpen => 4,
            MessageType::AliceBit1 | MessageType::BobResponse | MessageType::AliceBit2 => 5,
            MessageType::CheckReveal => 20,
            MessageType::CheckResult => 5,
            MessageType::KeyConfirm => DIGEST_LEN,
            MessageType::Abort => 1,
        }
    }
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        MessageType::ALL
            .into_iter()
            .find(|t| *t as u8 == b)
            .ok_or(WireError::UnknownMessageType(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub version: u8,
    pub msg_type: MessageType,
    pub session_id: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MessageType, session_id: u32, payload: Vec<u8>) -> Self {
        Self {
            version: VERSION,
            msg_type,
            session_id,
            payload,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

/// Serializes a frame. The payload length must fit in 16 bits; every
/// message type defined here is far below that.
pub fn encode_frame(f: &Frame) -> Vec<u8> {
    let len = u16::try_from(f.payload.len()).expect("payload exceeds 65535 bytes");
    let mut out = Vec::with_capacity(f.encoded_len());
    out.push(f.version);
    out.push(f.msg_type as u8);
    out.extend_from_slice(&f.session_id.to_be_bytes());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&f.payload);
    out
}

/// Parses the header fields, returning `(msg_type, session_id, payload_len)`.
pub fn decode_header(header: &[u8; HEADER_LEN]) -> Result<(MessageType, u32, usize), WireError> {
    if header[0] != VERSION {
        return Err(WireError::UnsupportedVersion(header[0]));
    }
    let msg_type = MessageType::try_from(header[1])?;
    let session_id = u32::from_be_bytes(header[2..6].try_into().unwrap());
    let len = u16::from_be_bytes(header[6..8].try_into().unwrap()) as usize;
    if len != msg_type.payload_len() {
        return Err(WireError::BadLength {
            msg_type,
            expected: msg_type.payload_len(),
            actual: len,
        });
    }
    Ok((msg_type, session_id, len))
}

/// Decodes one frame from the front of `buf`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Frame, usize), WireError> {
    if buf.len() < HEADER_LEN {
        // Reject a bad version as soon as it is visible.
        if let Some(&v) = buf.first() {
            if v != VERSION {
                return Err(WireError::UnsupportedVersion(v));
            }
        }
        return Err(WireError::NeedMoreBytes {
            needed: HEADER_LEN - buf.len(),
        });
    }
    let (msg_type, session_id, len) = decode_header(buf[..HEADER_LEN].try_into().unwrap())?;
    let total = HEADER_LEN + len;
    if buf.len() < total {
        return Err(WireError::NeedMoreBytes {
            needed: total - buf.len(),
        });
    }
    let frame = Frame {
        version: VERSION,
        msg_type,
        session_id,
        payload: buf[HEADER_LEN..total].to_vec(),
    };
    Ok((frame, total))
}

/// Session parameters both peers must agree on before the first round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub digest_alg: u8,
    pub convention: EdgeConvention,
    pub set_size: u16,
    pub code_base: u16,
    pub window_lo: u16,
    pub window_hi: u16,
    pub rounds: u32,
    pub check_fraction_ppm: u32,
    pub seed: u64,
    /// SHA-256 over the source configuration, including its priors.
    pub config_digest: [u8; DIGEST_LEN],
}

impl Hello {
    pub const LEN: usize = 1 + 1 + 2 + 2 + 2 + 2 + 4 + 4 + 8 + DIGEST_LEN;

    fn write(&self, out: &mut Vec<u8>) {
        out.push(self.digest_alg);
        out.push(self.convention.wire_code());
        out.extend_from_slice(&self.set_size.to_be_bytes());
        out.extend_from_slice(&self.code_base.to_be_bytes());
        out.extend_from_slice(&self.window_lo.to_be_bytes());
        out.extend_from_slice(&self.window_hi.to_be_bytes());
        out.extend_from_slice(&self.rounds.to_be_bytes());
        out.extend_from_slice(&self.check_fraction_ppm.to_be_bytes());
        out.extend_from_slice(&self.seed.to_be_bytes());
        out.extend_from_slice(&self.config_digest);
    }

    fn read(p: &[u8]) -> Result<Self, WireError> {
        let convention =
            EdgeConvention::from_wire_code(p[1]).ok_or(WireError::InvalidConvention(p[1]))?;
        Ok(Hello {
            digest_alg: p[0],
            convention,
            set_size: be_u16(&p[2..]),
            code_base: be_u16(&p[4..]),
            window_lo: be_u16(&p[6..]),
            window_hi: be_u16(&p[8..]),
            rounds: be_u32(&p[10..]),
            check_fraction_ppm: be_u32(&p[14..]),
            seed: be_u64(&p[18..]),
            config_digest: p[26..26 + DIGEST_LEN].try_into().unwrap(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    /// A transcript no world explains.
    Tamper,
    KeyMismatch,
    ProtocolViolation,
    ParameterMismatch,
    Timeout,
    Other(u8),
}

impl AbortReason {
    pub fn code(self) -> u8 {
        match self {
            AbortReason::Tamper => 1,
            AbortReason::KeyMismatch => 2,
            AbortReason::ProtocolViolation => 3,
            AbortReason::ParameterMismatch => 4,
            AbortReason::Timeout => 5,
            AbortReason::Other(c) => c,
        }
    }

    pub fn from_code(c: u8) -> Self {
        match c {
            1 => AbortReason::Tamper,
            2 => AbortReason::KeyMismatch,
            3 => AbortReason::ProtocolViolation,
            4 => AbortReason::ParameterMismatch,
            5 => AbortReason::Timeout,
            other => AbortReason::Other(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello(Hello),
    RoundOpen { round_id: u32 },
    AliceBit1 { round_id: u32, bit: u8 },
    BobResponse { round_id: u32, bit: u8 },
    AliceBit2 { round_id: u32, bit: u8 },
    CheckReveal { round_id: u32, values: [u64; 2] },
    CheckResult { round_id: u32, pass: bool },
    KeyConfirm { digest: [u8; DIGEST_LEN] },
    Abort { reason: AbortReason },
}

impl Message {
    pub fn msg_type(&self) -> MessageType {
        match self {
            Message::Hello(_) => MessageType::Hello,
            Message::RoundOpen { .. } => MessageType::RoundOpen,
            Message::AliceBit1 { .. } => MessageType::AliceBit1,
            Message::BobResponse { .. } => MessageType::BobResponse,
            Message::AliceBit2 { .. } => MessageType::AliceBit2,
            Message::CheckReveal { .. } => MessageType::CheckReveal,
            Message::CheckResult { .. } => MessageType::CheckResult,
            Message::KeyConfirm { .. } => MessageType::KeyConfirm,
            Message::Abort { .. } => MessageType::Abort,
        }
    }

    pub fn round_id(&self) -> Option<u32> {
        match self {
            Message::RoundOpen { round_id }
            | Message::AliceBit1 { round_id, .. }
            | Message::BobResponse { round_id, .. }
            | Message::AliceBit2 { round_id, .. }
            | Message::CheckReveal { round_id, .. }
            | Message::CheckResult { round_id, .. } => Some(*round_id),
            _ => None,
        }
    }

    pub fn to_frame(&self, session_id: u32) -> Frame {
        let mut p = Vec::with_capacity(self.msg_type().payload_len());
        match self {
            Message::Hello(h) => h.write(&mut p),
            Message::RoundOpen { round_id } => p.extend_from_slice(&round_id.to_be_bytes()),
            Message::AliceBit1 { round_id, bit }
            | Message::BobResponse { round_id, bit }
            | Message::AliceBit2 { round_id, bit } => {
                p.extend_from_slice(&round_id.to_be_bytes());
                p.push(*bit);
            }
            Message::CheckReveal { round_id, values } => {
                p.extend_from_slice(&round_id.to_be_bytes());
                p.extend_from_slice(&values[0].to_be_bytes());
                p.extend_from_slice(&values[1].to_be_bytes());
            }
            Message::CheckResult { round_id, pass } => {
                p.extend_from_slice(&round_id.to_be_bytes());
                p.push(u8::from(*pass));
            }
            Message::KeyConfirm { digest } => p.extend_from_slice(digest),
            Message::Abort { reason } => p.push(reason.code()),
        }
        Frame::new(self.msg_type(), session_id, p)
    }

    pub fn from_frame(f: &Frame) -> Result<Self, WireError> {
        let p = &f.payload;
        let expected = f.msg_type.payload_len();
        if p.len() != expected {
            return Err(WireError::BadLength {
                msg_type: f.msg_type,
                expected,
                actual: p.len(),
            });
        }
        let bit = |b: u8| {
            if b <= 1 {
                Ok(b)
            } else {
                Err(WireError::InvalidBit(b))
            }
        };
        Ok(match f.msg_type {
            MessageType::Hello => Message::Hello(Hello::read(p)?),
            MessageType::RoundOpen => Message::RoundOpen {
                round_id: be_u32(p),
            },
            MessageType::AliceBit1 => Message::AliceBit1 {
                round_id: be_u32(p),
                bit: bit(p[4])?,
            },
            MessageType::BobResponse => Message::BobResponse {
                round_id: be_u32(p),
                bit: bit(p[4])?,
            },
            MessageType::AliceBit2 => Message::AliceBit2 {
                round_id: be_u32(p),
                bit: bit(p[4])?,
            },
            MessageType::CheckReveal => Message::CheckReveal {
                round_id: be_u32(p),
                values: [be_u64(&p[4..]), be_u64(&p[12..])],
            },
            MessageType::CheckResult => Message::CheckResult {
                round_id: be_u32(p),
                pass: bit(p[4])? == 1,
            },
            MessageType::KeyConfirm => Message::KeyConfirm {
                digest: p[..DIGEST_LEN].try_into().unwrap(),
            },
            MessageType::Abort => Message::Abort {
                reason: AbortReason::from_code(p[0]),
            },
        })
    }

    pub fn encode(&self, session_id: u32) -> Vec<u8> {
        encode_frame(&self.to_frame(session_id))
    }
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes(b[..2].try_into().unwrap())
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b[..4].try_into().unwrap())
}

fn be_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes(b[..8].try_into().unwrap())
}

/// Lowercase hex, used for digests in reports.
pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
