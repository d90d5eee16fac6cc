use std::fmt;
use std::str::FromStr;

/// Instruction-type bucket used for feature counting.
///
/// The first four tags are the broad instruction groups; `Condition`,
/// `Shift` and `Truncation` are resilience patterns that are pulled out of
/// those groups and counted on their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupTag {
    Cfi,
    Fpi,
    Ii,
    Mi,
    Condition,
    Shift,
    Truncation,
}

impl GroupTag {
    pub const ALL: [GroupTag; 7] = [
        GroupTag::Cfi,
        GroupTag::Fpi,
        GroupTag::Ii,
        GroupTag::Mi,
        GroupTag::Condition,
        GroupTag::Shift,
        GroupTag::Truncation,
    ];

    /// Position of this tag in the foundation feature vector.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupTag::Cfi => "CFI",
            GroupTag::Fpi => "FPI",
            GroupTag::Ii => "II",
            GroupTag::Mi => "MI",
            GroupTag::Condition => "Condition",
            GroupTag::Shift => "Shift",
            GroupTag::Truncation => "Truncation",
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

macro_rules! opcodes {
    ($($variant:ident => $name:literal, $group:ident;)*) => {
        /// Mini-IR opcode.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Opcode {
            $($variant,)*
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Opcode::$variant => $name,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Opcode> {
                match name {
                    $($name => Some(Opcode::$variant),)*
                    _ => None,
                }
            }

            pub fn group(self) -> GroupTag {
                match self {
                    $(Opcode::$variant => GroupTag::$group,)*
                }
            }
        }
    };
}

opcodes! {
    Br => "br", Cfi;
    BrCond => "br_cond", Cfi;
    Select => "select", Cfi;
    Phi => "phi", Cfi;
    Call => "call", Cfi;
    Add => "add", Ii;
    Sub => "sub", Ii;
    Mul => "mul", Ii;
    Sdiv => "sdiv", Ii;
    Srem => "srem", Ii;
    Fadd => "fadd", Fpi;
    Fsub => "fsub", Fpi;
    Fmul => "fmul", Fpi;
    Fdiv => "fdiv", Fpi;
    Load => "load", Mi;
    Store => "store", Mi;
    Getelementptr => "getelementptr", Mi;
    Trunc => "trunc", Truncation;
    Zext => "zext", Truncation;
    Sext => "sext", Truncation;
    Fptrunc => "fptrunc", Truncation;
    Fpext => "fpext", Truncation;
    Bitcast => "bitcast", Truncation;
    Shl => "shl", Shift;
    Lshr => "lshr", Shift;
    Ashr => "ashr", Shift;
    Icmp => "icmp", Condition;
    Fcmp => "fcmp", Condition;
    And => "and", Condition;
    Or => "or", Condition;
    Xor => "xor", Condition;
    Output => "output", Cfi;
    Halt => "halt", Cfi;
}

/// Classifies an opcode into its feature bucket.
pub fn opcode_group(op: Opcode) -> GroupTag {
    op.group()
}

/// Static shape of an instruction: which source slots are labels, whether a
/// destination register is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    /// One entry per source operand; `true` where the slot must be a `$label`.
    pub label_slots: &'static [bool],
    pub has_dest: bool,
}

impl Opcode {
    pub fn shape(self) -> Shape {
        use Opcode::*;
        const V1: &[bool] = &[false];
        const V2: &[bool] = &[false, false];
        const V3: &[bool] = &[false, false, false];
        const L1: &[bool] = &[true];
        const LV: &[bool] = &[true, false];
        const LVV: &[bool] = &[true, false, false];
        const VLL: &[bool] = &[false, true, true];
        let (label_slots, has_dest): (&'static [bool], bool) = match self {
            Br => (L1, false),
            BrCond => (VLL, false),
            Select => (V3, true),
            Phi => (LVV, true),
            Call => (LV, true),
            Add | Sub | Mul | Sdiv | Srem | Fadd | Fsub | Fmul | Fdiv => (V2, true),
            Shl | Lshr | Ashr | And | Or | Xor => (V2, true),
            Icmp | Fcmp => (LVV, true),
            Load => (V1, true),
            Store => (V2, false),
            Getelementptr => (V2, true),
            Trunc | Zext | Sext => (V2, true),
            Fptrunc | Fpext | Bitcast => (V1, true),
            Output => (V1, false),
            Halt => (&[], false),
        };
        Shape {
            label_slots,
            has_dest,
        }
    }

    /// Number of (input, output) operand records a dynamic instance carries
    /// in a trace. Loads read the addressed memory cell as a second input and
    /// stores write the addressed cell as their output.
    pub fn trace_arity(self) -> (usize, usize) {
        use Opcode::*;
        match self {
            Br | Halt => (0, 0),
            BrCond | Output => (1, 0),
            Load => (2, 1),
            Store => (2, 1),
            Call | Fptrunc | Fpext | Bitcast => (1, 1),
            Select => (3, 1),
            _ => {
                let shape = self.shape();
                let values = shape.label_slots.iter().filter(|l| !**l).count();
                (values, usize::from(shape.has_dest))
            }
        }
    }

    pub fn is_terminator(self) -> bool {
        matches!(self, Opcode::Br | Opcode::BrCond | Opcode::Halt)
    }

    /// `output` and `halt` are never chosen as injection targets.
    pub fn is_injectable(self) -> bool {
        !matches!(self, Opcode::Output | Opcode::Halt)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown opcode `{0}`")]
pub struct UnknownOpcode(pub String);

impl FromStr for Opcode {
    type Err = UnknownOpcode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Opcode::from_name(s).ok_or_else(|| UnknownOpcode(s.to_string()))
    }
}
