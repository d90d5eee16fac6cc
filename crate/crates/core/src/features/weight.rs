use crate::ir::{compute, GroupTag, Modifier, Opcode, Predicate, Value};
use crate::trace::InstructionRecord;

/// Fraction of an instance's operand bits at which a single flip is
/// tolerated.
///
/// Output bits count as tolerated for every value-producing opcode outside
/// the control-flow group. Shifts add the bits shifted out, truncations the
/// bits dropped or invented, and comparison-like opcodes every input bit
/// whose flip leaves this instance's result unchanged.
pub fn resilience_weight(rec: &InstructionRecord) -> f64 {
    let total = rec.total_bits();
    if total == 0 {
        return 0.0;
    }
    let out_bits = rec.output().map_or(0, |o| o.width);
    let tolerated = match rec.opcode.group() {
        GroupTag::Fpi | GroupTag::Ii | GroupTag::Mi => out_bits,
        GroupTag::Shift => {
            let value_width = rec.inputs().next().map_or(0, |o| o.width);
            rec.aux.shamt.unwrap_or(0).min(value_width) + out_bits
        }
        GroupTag::Truncation => match (rec.aux.srcw, rec.aux.dstw) {
            (Some(s), Some(d)) => s.abs_diff(d) + out_bits,
            _ => out_bits,
        },
        GroupTag::Condition => masked_input_bits(rec) + out_bits,
        GroupTag::Cfi => match rec.opcode {
            Opcode::BrCond => masked_input_bits(rec),
            Opcode::Select => masked_input_bits(rec) + out_bits,
            _ => 0,
        },
    };
    (tolerated.min(total)) as f64 / total as f64
}

fn branch_taken(inputs: &[Value]) -> Option<bool> {
    match inputs.first()? {
        Value::I32(c) => Some(*c != 0),
        _ => None,
    }
}

fn evaluate(rec: &InstructionRecord, inputs: &[Value]) -> Option<u64> {
    if rec.opcode == Opcode::BrCond {
        return branch_taken(inputs).map(u64::from);
    }
    let modifier = Modifier {
        predicate: rec.aux.pred.and_then(|p| Predicate::from_code(p as u64)),
        intrinsic: None,
    };
    compute(rec.opcode, inputs, modifier).ok().map(Value::bits)
}

/// Counts input bits whose individual flip reproduces the recorded result,
/// by re-evaluating the instruction once per bit.
fn masked_input_bits(rec: &InstructionRecord) -> u32 {
    let inputs: Option<Vec<Value>> = rec.inputs().map(|o| o.value()).collect();
    let Some(inputs) = inputs else {
        return 0;
    };
    let Some(golden) = evaluate(rec, &inputs) else {
        return 0;
    };
    let mut masked = 0;
    let mut flipped = inputs.clone();
    for (slot, op) in rec.inputs().enumerate() {
        for bit in 0..op.width.min(inputs[slot].width()) {
            flipped[slot] = inputs[slot].flip(bit);
            if evaluate(rec, &flipped) == Some(golden) {
                masked += 1;
            }
        }
        flipped[slot] = inputs[slot];
    }
    masked
}
