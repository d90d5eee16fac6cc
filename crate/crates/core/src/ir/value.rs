use std::fmt;
use std::str::FromStr;

use super::Opcode;

/// Operand kind. Labels name blocks, predicates or intrinsics and carry no
/// injectable bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperandKind {
    I32,
    F64,
    Ptr,
    Label,
}

impl OperandKind {
    pub fn bit_width(self) -> u32 {
        match self {
            OperandKind::I32 | OperandKind::Ptr => 32,
            OperandKind::F64 => 64,
            OperandKind::Label => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperandKind::I32 => "i32",
            OperandKind::F64 => "f64",
            OperandKind::Ptr => "ptr",
            OperandKind::Label => "label",
        }
    }
}

impl fmt::Display for OperandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i32" => Ok(OperandKind::I32),
            "f64" => Ok(OperandKind::F64),
            "ptr" => Ok(OperandKind::Ptr),
            "label" => Ok(OperandKind::Label),
            other => Err(format!("unknown operand kind `{other}`")),
        }
    }
}

/// A runtime value: a kind plus its raw bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    I32(u32),
    F64(u64),
    Ptr(u32),
}

impl Value {
    pub fn int(v: i32) -> Value {
        Value::I32(v as u32)
    }

    pub fn float(v: f64) -> Value {
        Value::F64(v.to_bits())
    }

    pub fn kind(self) -> OperandKind {
        match self {
            Value::I32(_) => OperandKind::I32,
            Value::F64(_) => OperandKind::F64,
            Value::Ptr(_) => OperandKind::Ptr,
        }
    }

    pub fn width(self) -> u32 {
        self.kind().bit_width()
    }

    pub fn bits(self) -> u64 {
        match self {
            Value::I32(b) | Value::Ptr(b) => b as u64,
            Value::F64(b) => b,
        }
    }

    /// Rebuilds a value from a kind and raw bits. Bits above the kind's width
    /// are discarded.
    pub fn from_bits(kind: OperandKind, bits: u64) -> Option<Value> {
        match kind {
            OperandKind::I32 => Some(Value::I32(bits as u32)),
            OperandKind::Ptr => Some(Value::Ptr(bits as u32)),
            OperandKind::F64 => Some(Value::F64(bits)),
            OperandKind::Label => None,
        }
    }

    pub fn flip(self, bit: u32) -> Value {
        debug_assert!(bit < self.width());
        match self {
            Value::I32(b) => Value::I32(b ^ (1 << bit)),
            Value::Ptr(b) => Value::Ptr(b ^ (1 << bit)),
            Value::F64(b) => Value::F64(b ^ (1 << bit)),
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::F64(b) => Some(f64::from_bits(b)),
            _ => None,
        }
    }

    pub fn as_i32(self) -> Option<i32> {
        match self {
            Value::I32(b) => Some(b as i32),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Value::I32(b) => write!(f, "{}", b as i32),
            Value::Ptr(b) => write!(f, "@{b}"),
            Value::F64(b) => f.write_str(&format_float(f64::from_bits(b))),
        }
    }
}

/// Renders a float so that it always reads back as a float literal (it
/// always contains a `.`).
pub fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || !v.is_finite() {
        return s;
    }
    match s.find(['e', 'E']) {
        Some(pos) => format!("{}.0{}", &s[..pos], &s[pos..]),
        None => format!("{s}.0"),
    }
}

/// Comparison predicate for `icmp` / `fcmp`. The code is what traces store
/// in the `pred` aux field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    Eq,
    Ne,
    Slt,
    Sle,
    Sgt,
    Sge,
    Ult,
    Ule,
    Ugt,
    Uge,
    Oeq,
    One,
    Olt,
    Ole,
    Ogt,
    Oge,
}

impl Predicate {
    const ALL: [Predicate; 16] = [
        Predicate::Eq,
        Predicate::Ne,
        Predicate::Slt,
        Predicate::Sle,
        Predicate::Sgt,
        Predicate::Sge,
        Predicate::Ult,
        Predicate::Ule,
        Predicate::Ugt,
        Predicate::Uge,
        Predicate::Oeq,
        Predicate::One,
        Predicate::Olt,
        Predicate::Ole,
        Predicate::Ogt,
        Predicate::Oge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::Eq => "eq",
            Predicate::Ne => "ne",
            Predicate::Slt => "slt",
            Predicate::Sle => "sle",
            Predicate::Sgt => "sgt",
            Predicate::Sge => "sge",
            Predicate::Ult => "ult",
            Predicate::Ule => "ule",
            Predicate::Ugt => "ugt",
            Predicate::Uge => "uge",
            Predicate::Oeq => "oeq",
            Predicate::One => "one",
            Predicate::Olt => "olt",
            Predicate::Ole => "ole",
            Predicate::Ogt => "ogt",
            Predicate::Oge => "oge",
        }
    }

    pub fn from_name(name: &str) -> Option<Predicate> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn from_code(code: u64) -> Option<Predicate> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_float(self) -> bool {
        self.code() >= Predicate::Oeq.code()
    }
}

/// Built-in functions reachable through `call`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intrinsic {
    Sqrt,
    Fabs,
    Abs,
}

impl Intrinsic {
    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::Sqrt => "sqrt",
            Intrinsic::Fabs => "fabs",
            Intrinsic::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Intrinsic> {
        [Intrinsic::Sqrt, Intrinsic::Fabs, Intrinsic::Abs]
            .into_iter()
            .find(|i| i.name() == name)
    }
}

/// Reasons an execution stops abnormally.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Trap {
    #[error("div-by-zero")]
    DivByZero,
    #[error("out-of-range address {0:#x}")]
    AddressOutOfRange(u32),
    #[error("non-finite float in integer context")]
    NonFiniteToInt,
    #[error("type mismatch in `{0}`")]
    TypeMismatch(Opcode),
    #[error("bad bit width {0}")]
    BadWidth(i32),
    #[error("fell off the end of the program")]
    FellOffEnd,
    #[error("read of undefined register %{0}")]
    Undefined(String),
}

/// Static payload of an instruction that is not a value operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Modifier {
    pub predicate: Option<Predicate>,
    pub intrinsic: Option<Intrinsic>,
}

/// Source and destination widths of a truncation-family instance.
pub fn truncation_widths(op: Opcode, inputs: &[Value]) -> Option<(u32, u32)> {
    let width_arg = || inputs.get(1).and_then(|v| v.as_i32()).map(|w| w as u32);
    match op {
        Opcode::Trunc => Some((32, width_arg()?)),
        Opcode::Zext | Opcode::Sext => Some((width_arg()?, 32)),
        Opcode::Fptrunc => Some((64, 32)),
        Opcode::Fpext => Some((32, 64)),
        Opcode::Bitcast => Some((32, 32)),
        _ => None,
    }
}

/// Effective shift amount of a shift instance.
pub fn shift_amount(inputs: &[Value]) -> Option<u32> {
    match inputs.get(1)? {
        Value::I32(b) => Some(b & 31),
        _ => None,
    }
}

fn both_i32(op: Opcode, a: Value, b: Value) -> Result<(u32, u32), Trap> {
    match (a, b) {
        (Value::I32(x), Value::I32(y)) => Ok((x, y)),
        _ => Err(Trap::TypeMismatch(op)),
    }
}

fn both_f64(op: Opcode, a: Value, b: Value) -> Result<(f64, f64), Trap> {
    match (a, b) {
        (Value::F64(x), Value::F64(y)) => Ok((f64::from_bits(x), f64::from_bits(y))),
        _ => Err(Trap::TypeMismatch(op)),
    }
}

fn bit_width_arg(v: Value) -> Result<u32, Trap> {
    match v {
        Value::I32(w) if (1..=32).contains(&(w as i32)) => Ok(w),
        Value::I32(w) => Err(Trap::BadWidth(w as i32)),
        _ => Err(Trap::TypeMismatch(Opcode::Trunc)),
    }
}

fn low_bits(x: u32, w: u32) -> u32 {
    if w >= 32 {
        x
    } else {
        x & ((1u32 << w) - 1)
    }
}

/// Evaluates a value-producing instruction on its (already loaded) inputs.
///
/// Memory and control transfer are handled by the interpreter; this covers
/// every opcode whose result is a pure function of its inputs, including
/// `select` and `getelementptr`. `phi` takes the incoming value already
/// chosen by the interpreter as its only input.
pub fn compute(op: Opcode, inputs: &[Value], modifier: Modifier) -> Result<Value, Trap> {
    use Opcode::*;
    let arg = |i: usize| inputs.get(i).copied().ok_or(Trap::TypeMismatch(op));
    match op {
        Add | Sub | Mul | Sdiv | Srem | And | Or | Xor | Shl | Lshr | Ashr => {
            let (a, b) = both_i32(op, arg(0)?, arg(1)?)?;
            let r = match op {
                Add => a.wrapping_add(b),
                Sub => a.wrapping_sub(b),
                Mul => a.wrapping_mul(b),
                Sdiv | Srem => {
                    if b == 0 {
                        return Err(Trap::DivByZero);
                    }
                    let (a, b) = (a as i32, b as i32);
                    if op == Sdiv {
                        a.wrapping_div(b) as u32
                    } else {
                        a.wrapping_rem(b) as u32
                    }
                }
                And => a & b,
                Or => a | b,
                Xor => a ^ b,
                Shl => a << (b & 31),
                Lshr => a >> (b & 31),
                Ashr => ((a as i32) >> (b & 31)) as u32,
                _ => unreachable!(),
            };
            Ok(Value::I32(r))
        }
        Fadd | Fsub | Fmul | Fdiv => {
            let (a, b) = both_f64(op, arg(0)?, arg(1)?)?;
            let r = match op {
                Fadd => a + b,
                Fsub => a - b,
                Fmul => a * b,
                Fdiv => a / b,
                _ => unreachable!(),
            };
            Ok(Value::float(r))
        }
        Icmp | Fcmp => {
            let pred = modifier.predicate.ok_or(Trap::TypeMismatch(op))?;
            let r = if op == Icmp {
                if pred.is_float() {
                    return Err(Trap::TypeMismatch(op));
                }
                let (a, b) = match (arg(0)?, arg(1)?) {
                    (Value::I32(x), Value::I32(y)) | (Value::Ptr(x), Value::Ptr(y)) => (x, y),
                    _ => return Err(Trap::TypeMismatch(op)),
                };
                let (sa, sb) = (a as i32, b as i32);
                match pred {
                    Predicate::Eq => a == b,
                    Predicate::Ne => a != b,
                    Predicate::Slt => sa < sb,
                    Predicate::Sle => sa <= sb,
                    Predicate::Sgt => sa > sb,
                    Predicate::Sge => sa >= sb,
                    Predicate::Ult => a < b,
                    Predicate::Ule => a <= b,
                    Predicate::Ugt => a > b,
                    Predicate::Uge => a >= b,
                    _ => unreachable!(),
                }
            } else {
                if !pred.is_float() {
                    return Err(Trap::TypeMismatch(op));
                }
                let (a, b) = both_f64(op, arg(0)?, arg(1)?)?;
                match pred {
                    Predicate::Oeq => a == b,
                    Predicate::One => !a.is_nan() && !b.is_nan() && a != b,
                    Predicate::Olt => a < b,
                    Predicate::Ole => a <= b,
                    Predicate::Ogt => a > b,
                    Predicate::Oge => a >= b,
                    _ => unreachable!(),
                }
            };
            Ok(Value::I32(r as u32))
        }
        Select => match arg(0)? {
            Value::I32(c) => {
                let (a, b) = (arg(1)?, arg(2)?);
                if a.kind() != b.kind() {
                    return Err(Trap::TypeMismatch(op));
                }
                Ok(if c != 0 { a } else { b })
            }
            _ => Err(Trap::TypeMismatch(op)),
        },
        Phi => arg(0),
        Call => {
            let intrinsic = modifier.intrinsic.ok_or(Trap::TypeMismatch(op))?;
            match (intrinsic, arg(0)?) {
                (Intrinsic::Sqrt, Value::F64(b)) => Ok(Value::float(f64::from_bits(b).sqrt())),
                (Intrinsic::Fabs, Value::F64(b)) => Ok(Value::float(f64::from_bits(b).abs())),
                (Intrinsic::Abs, Value::I32(b)) => Ok(Value::int((b as i32).wrapping_abs())),
                _ => Err(Trap::TypeMismatch(op)),
            }
        }
        Getelementptr => match (arg(0)?, arg(1)?) {
            (Value::Ptr(base), Value::I32(off)) => Ok(Value::Ptr(base.wrapping_add(off))),
            _ => Err(Trap::TypeMismatch(op)),
        },
        Trunc | Zext => match arg(0)? {
            Value::I32(x) => Ok(Value::I32(low_bits(x, bit_width_arg(arg(1)?)?))),
            _ => Err(Trap::TypeMismatch(op)),
        },
        Sext => match arg(0)? {
            Value::I32(x) => {
                let w = bit_width_arg(arg(1)?)?;
                let shift = 32 - w;
                Ok(Value::I32((((x << shift) as i32) >> shift) as u32))
            }
            _ => Err(Trap::TypeMismatch(op)),
        },
        Fptrunc => match arg(0)? {
            Value::F64(b) => {
                let v = f64::from_bits(b);
                if !v.is_finite() {
                    return Err(Trap::NonFiniteToInt);
                }
                let t = v.trunc();
                if t < i32::MIN as f64 || t > i32::MAX as f64 {
                    return Err(Trap::NonFiniteToInt);
                }
                Ok(Value::int(t as i32))
            }
            _ => Err(Trap::TypeMismatch(op)),
        },
        Fpext => match arg(0)? {
            Value::I32(b) => Ok(Value::float(b as i32 as f64)),
            _ => Err(Trap::TypeMismatch(op)),
        },
        Bitcast => match arg(0)? {
            Value::I32(b) => Ok(Value::Ptr(b)),
            Value::Ptr(b) => Ok(Value::I32(b)),
            Value::F64(_) => Err(Trap::TypeMismatch(op)),
        },
        Br | BrCond | Load | Store | Output | Halt => Err(Trap::TypeMismatch(op)),
    }
}
