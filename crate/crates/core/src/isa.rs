//! Control-transfer decoding for Z80 and 6502.
//!
//! Only CALL/JP/JR style instructions (and their 6502 counterparts) are
//! understood. Every other byte is reported as a one-byte [`TransferKind::Other`];
//! callers locate instruction boundaries through pattern anchoring, not by
//! sweeping.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::{Architecture, RomImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferKind {
    CallAbs,
    JumpAbs,
    JumpRel,
    BranchRel,
    RtsReturn,
    Other,
}

impl TransferKind {
    pub fn has_target(self) -> bool {
        matches!(
            self,
            TransferKind::CallAbs | TransferKind::JumpAbs | TransferKind::JumpRel | TransferKind::BranchRel
        )
    }

    pub fn is_relative(self) -> bool {
        matches!(self, TransferKind::JumpRel | TransferKind::BranchRel)
    }
}

/// Condition attached to a transfer. Z80 and 6502 flag tests share names
/// where the flag semantics coincide; `Indirect` marks `JMP (abs)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    NonZero,
    Zero,
    NoCarry,
    Carry,
    ParityOdd,
    ParityEven,
    Positive,
    Negative,
    OverflowClear,
    OverflowSet,
    Indirect,
}

const Z80_CONDITIONS: [Condition; 8] = [
    Condition::NonZero,
    Condition::Zero,
    Condition::NoCarry,
    Condition::Carry,
    Condition::ParityOdd,
    Condition::ParityEven,
    Condition::Positive,
    Condition::Negative,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlTransfer {
    pub kind: TransferKind,
    pub opcode: u8,
    pub length: u8,
    pub target: Option<u16>,
    pub condition: Option<Condition>,
}

/// Static shape of one opcode: what it is and how long it is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpcodeForm {
    pub opcode: u8,
    pub kind: TransferKind,
    pub condition: Option<Condition>,
    pub length: u8,
}

fn form(opcode: u8, kind: TransferKind, condition: Option<Condition>, length: u8) -> OpcodeForm {
    OpcodeForm {
        opcode,
        kind,
        condition,
        length,
    }
}

pub fn opcode_form(arch: Architecture, opcode: u8) -> OpcodeForm {
    use TransferKind::*;
    match arch {
        Architecture::Z80 => match opcode {
            0xCD => form(opcode, CallAbs, None, 3),
            0xC3 => form(opcode, JumpAbs, None, 3),
            0x18 => form(opcode, JumpRel, None, 2),
            0xC9 => form(opcode, RtsReturn, None, 1),
            op if op & 0xC7 == 0xC4 => form(op, CallAbs, Some(Z80_CONDITIONS[(op >> 3 & 7) as usize]), 3),
            op if op & 0xC7 == 0xC2 => form(op, JumpAbs, Some(Z80_CONDITIONS[(op >> 3 & 7) as usize]), 3),
            op if op & 0xE7 == 0x20 => form(op, JumpRel, Some(Z80_CONDITIONS[(op >> 3 & 3) as usize]), 2),
            // RST n: one-byte call into page zero
            op if op & 0xC7 == 0xC7 => form(op, CallAbs, None, 1),
            op => form(op, Other, None, 1),
        },
        Architecture::M6502 => match opcode {
            0x20 => form(opcode, CallAbs, None, 3),
            0x4C => form(opcode, JumpAbs, None, 3),
            0x6C => form(opcode, JumpAbs, Some(Condition::Indirect), 3),
            0x60 => form(opcode, RtsReturn, None, 1),
            0x10 => form(opcode, BranchRel, Some(Condition::Positive), 2),
            0x30 => form(opcode, BranchRel, Some(Condition::Negative), 2),
            0x50 => form(opcode, BranchRel, Some(Condition::OverflowClear), 2),
            0x70 => form(opcode, BranchRel, Some(Condition::OverflowSet), 2),
            0x90 => form(opcode, BranchRel, Some(Condition::NoCarry), 2),
            0xB0 => form(opcode, BranchRel, Some(Condition::Carry), 2),
            0xD0 => form(opcode, BranchRel, Some(Condition::NonZero), 2),
            0xF0 => form(opcode, BranchRel, Some(Condition::Zero), 2),
            op => form(op, Other, None, 1),
        },
    }
}

/// Every opcode that is not [`TransferKind::Other`] for `arch`, ascending.
pub fn transfer_opcodes(arch: Architecture) -> Vec<OpcodeForm> {
    (0..=255u8)
        .map(|op| opcode_form(arch, op))
        .filter(|f| f.kind != TransferKind::Other)
        .collect()
}

fn transfer_table(arch: Architecture) -> &'static [OpcodeForm] {
    static TABLES: OnceLock<[Vec<OpcodeForm>; 2]> = OnceLock::new();
    let t = TABLES.get_or_init(|| [transfer_opcodes(Architecture::Z80), transfer_opcodes(Architecture::M6502)]);
    match arch {
        Architecture::Z80 => &t[0],
        Architecture::M6502 => &t[1],
    }
}

/// Target of a relative transfer whose opcode sits at `at`.
pub fn relative_target(at: u16, displacement: u8) -> u16 {
    at.wrapping_add(2).wrapping_add(displacement as i8 as u16)
}

/// Decodes the instruction at the start of `bytes`, which lives at address `at`.
pub fn decode_bytes(arch: Architecture, bytes: &[u8], at: u16) -> Result<ControlTransfer> {
    let Some(&opcode) = bytes.first() else {
        return Err(Error::TruncatedInstruction {
            offset: 0,
            needed: 1,
            available: 0,
        });
    };
    let f = opcode_form(arch, opcode);
    let len = f.length as usize;
    if bytes.len() < len {
        return Err(Error::TruncatedInstruction {
            offset: 0,
            needed: len,
            available: bytes.len(),
        });
    }
    let target = match (f.kind, f.length) {
        (TransferKind::CallAbs, 1) => Some((opcode & 0x38) as u16),
        (TransferKind::CallAbs | TransferKind::JumpAbs, _) => Some(u16::from_le_bytes([bytes[1], bytes[2]])),
        (TransferKind::JumpRel | TransferKind::BranchRel, _) => Some(relative_target(at, bytes[1])),
        _ => None,
    };
    Ok(ControlTransfer {
        kind: f.kind,
        opcode,
        length: f.length,
        target,
        condition: f.condition,
    })
}

pub fn decode_at(rom: &RomImage, offset: usize) -> Result<ControlTransfer> {
    rom.ensure_addressable()?;
    let bytes = rom.bytes();
    let tail = bytes.get(offset..).unwrap_or(&[]);
    decode_bytes(rom.arch(), tail, rom.address_of(offset)).map_err(|e| match e {
        Error::TruncatedInstruction { needed, available, .. } => Error::TruncatedInstruction {
            offset,
            needed,
            available,
        },
        other => other,
    })
}

/// Unconditional encoding of `kind` at `at_address`.
pub fn encode_transfer(kind: TransferKind, target: u16, at_address: u16, arch: Architecture) -> Result<Vec<u8>> {
    encode_with_condition(kind, None, target, at_address, arch)
}

/// Encodes a transfer. `target` is ignored for [`TransferKind::RtsReturn`].
pub fn encode_with_condition(
    kind: TransferKind,
    condition: Option<Condition>,
    target: u16,
    at_address: u16,
    arch: Architecture,
) -> Result<Vec<u8>> {
    let opcode = transfer_table(arch)
        .iter()
        .find(|f| f.kind == kind && f.condition == condition && (f.length != 1 || kind == TransferKind::RtsReturn))
        .map(|f| f.opcode)
        .ok_or_else(|| {
            Error::Unencodable(format!("{kind:?} with condition {condition:?} has no {arch} encoding"))
        })?;
    let [lo, hi] = target.to_le_bytes();
    match kind {
        TransferKind::CallAbs | TransferKind::JumpAbs => Ok(vec![opcode, lo, hi]),
        TransferKind::JumpRel | TransferKind::BranchRel => {
            let displacement = target as i32 - (at_address as i32 + 2);
            // the displacement is taken mod 0x10000, so pick the representative nearest zero
            let wrapped = ((displacement + 0x8000).rem_euclid(0x1_0000)) - 0x8000;
            if !(-128..=127).contains(&wrapped) {
                return Err(Error::Range {
                    at: at_address,
                    target,
                    displacement,
                });
            }
            Ok(vec![opcode, wrapped as i8 as u8])
        }
        TransferKind::RtsReturn => Ok(vec![opcode]),
        TransferKind::Other => unreachable!("no opcode form is Other with a match"),
    }
}
