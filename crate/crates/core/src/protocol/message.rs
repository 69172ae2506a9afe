use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::crypto::{Address, Digest};
use crate::ledger::{Block, Confirmation, Transaction};

/// Everything nodes exchange while running the protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// A freshly trained model, sent by its generator.
    Transaction(Transaction),
    /// A transaction with at least one receipt appended by a receiver.
    ReceiptedTransaction(Transaction),
    DraftBlock(Block),
    Confirmation(Confirmation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Transaction,
    ReceiptedTransaction,
    DraftBlock,
    Confirmation,
}

impl MessageKind {
    pub fn tag(self) -> u8 {
        match self {
            MessageKind::Transaction => 0x01,
            MessageKind::ReceiptedTransaction => 0x02,
            MessageKind::DraftBlock => 0x03,
            MessageKind::Confirmation => 0x04,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0x01 => MessageKind::Transaction,
            0x02 => MessageKind::ReceiptedTransaction,
            0x03 => MessageKind::DraftBlock,
            0x04 => MessageKind::Confirmation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Transaction => "transaction",
            MessageKind::ReceiptedTransaction => "receipted_transaction",
            MessageKind::DraftBlock => "draft_block",
            MessageKind::Confirmation => "confirmation",
        }
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Transaction(_) => MessageKind::Transaction,
            Message::ReceiptedTransaction(_) => MessageKind::ReceiptedTransaction,
            Message::DraftBlock(_) => MessageKind::DraftBlock,
            Message::Confirmation(_) => MessageKind::Confirmation,
        }
    }

    /// Identifying digest: the transaction digest, the draft digest, or the
    /// confirmation's own digest.
    pub fn digest(&self) -> Digest {
        match self {
            Message::Transaction(t) | Message::ReceiptedTransaction(t) => t.digest,
            Message::DraftBlock(b) => b.draft_digest,
            Message::Confirmation(c) => c.digest(),
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        match self {
            Message::Transaction(t) | Message::ReceiptedTransaction(t) => t.to_canonical_bytes(),
            Message::DraftBlock(b) => b.to_canonical_bytes(),
            Message::Confirmation(c) => c.to_canonical_bytes(),
        }
    }

    pub fn decode_payload(kind: MessageKind, payload: &[u8]) -> Result<Self, DecodeError> {
        Ok(match kind {
            MessageKind::Transaction => Message::Transaction(Transaction::from_canonical_bytes(payload)?),
            MessageKind::ReceiptedTransaction => {
                Message::ReceiptedTransaction(Transaction::from_canonical_bytes(payload)?)
            }
            MessageKind::DraftBlock => Message::DraftBlock(Block::from_canonical_bytes(payload)?),
            MessageKind::Confirmation => Message::Confirmation(Confirmation::from_canonical_bytes(payload)?),
        })
    }
}

impl Encode for Message {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.kind().tag());
        w.bytes(&self.encode_payload());
    }
}

impl Decode for Message {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let tag = r.u8()?;
        let kind = MessageKind::from_tag(tag).ok_or(DecodeError::Invalid {
            field: "message tag",
            reason: format!("unknown tag {tag:#04x}"),
        })?;
        Message::decode_payload(kind, r.bytes()?)
    }
}

/// Where an outgoing message should go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    AllPeers,
    Peer(Address),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub target: Target,
    pub message: Message,
}

impl Outgoing {
    pub fn all(message: Message) -> Self {
        Self {
            target: Target::AllPeers,
            message,
        }
    }

    pub fn to(peer: Address, message: Message) -> Self {
        Self {
            target: Target::Peer(peer),
            message,
        }
    }
}
