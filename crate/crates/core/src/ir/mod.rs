//! The mini-IR: opcodes and their feature taxonomy, the program model with
//! its text format, and structural validation.

mod opcode;
mod program;
mod validate;
mod value;

pub use opcode::{opcode_group, GroupTag, Opcode, Shape, UnknownOpcode};
pub use program::{
    parse_program, Block, Decl, Instruction, Operand, ParseError, ParseErrorKind, Program,
};
pub use validate::{validate_program, ValidationReport, Violation};
pub use value::{
    compute, format_float, shift_amount, truncation_widths, Intrinsic, Modifier, OperandKind,
    Predicate, Trap, Value,
};
