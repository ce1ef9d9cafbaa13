use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Square,
    SqrtAbs,
    LogAbs,
    ExpClip,
    Sin,
    Cos,
    Tanh,
    ReciprocalSafe,
    Cube,
    StandScaler,
    MinmaxScaler,
    Plus,
    Minus,
    Multiply,
    DivideSafe,
}

const KINDS: [(OpKind, &str, u8); 15] = [
    (OpKind::Square, "square", 1),
    (OpKind::SqrtAbs, "sqrt_abs", 1),
    (OpKind::LogAbs, "log_abs", 1),
    (OpKind::ExpClip, "exp_clip", 1),
    (OpKind::Sin, "sin", 1),
    (OpKind::Cos, "cos", 1),
    (OpKind::Tanh, "tanh", 1),
    (OpKind::ReciprocalSafe, "reciprocal_safe", 1),
    (OpKind::Cube, "cube", 1),
    (OpKind::StandScaler, "stand_scaler", 1),
    (OpKind::MinmaxScaler, "minmax_scaler", 1),
    (OpKind::Plus, "plus", 2),
    (OpKind::Minus, "minus", 2),
    (OpKind::Multiply, "multiply", 2),
    (OpKind::DivideSafe, "divide_safe", 2),
];

/// Size of the default operation set.
pub const N_OPS: usize = KINDS.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub id: usize,
    pub name: &'static str,
    pub arity: u8,
    pub kind: OpKind,
}

impl Operation {
    pub fn is_binary(&self) -> bool {
        self.arity == 2
    }
}

/// Eleven unary operations followed by four binary ones, with dense ids.
pub fn default_operation_set() -> Vec<Operation> {
    (0..N_OPS).filter_map(operation_by_id).collect()
}

pub fn operation_by_id(id: usize) -> Option<Operation> {
    KINDS.get(id).map(|&(kind, name, arity)| Operation {
        id,
        name,
        arity,
        kind,
    })
}

pub fn operation_by_name(name: &str) -> Option<Operation> {
    KINDS
        .iter()
        .position(|&(_, n, _)| n == name)
        .and_then(operation_by_id)
}

const GUARD: f64 = 1e-8;

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Elementwise application with numeric guards. Any entry that still
/// overflows is written as 0, so finite inputs always give finite outputs.
pub fn apply_operation(op: &Operation, a: &[f64], b: Option<&[f64]>) -> Result<Vec<f64>> {
    let out = match (op.arity, b) {
        (1, None) => match op.kind {
            OpKind::Square => a.iter().map(|x| x * x).collect(),
            OpKind::SqrtAbs => a.iter().map(|x| x.abs().sqrt()).collect(),
            OpKind::LogAbs => a.iter().map(|x| (x.abs() + GUARD).ln()).collect(),
            OpKind::ExpClip => a.iter().map(|x| x.min(50.0).exp()).collect(),
            OpKind::Sin => a.iter().map(|x| x.sin()).collect(),
            OpKind::Cos => a.iter().map(|x| x.cos()).collect(),
            OpKind::Tanh => a.iter().map(|x| x.tanh()).collect(),
            OpKind::ReciprocalSafe => a.iter().map(|x| x / (x * x + GUARD)).collect(),
            OpKind::Cube => a.iter().map(|x| x * x * x).collect(),
            OpKind::StandScaler => stand_scale(a),
            OpKind::MinmaxScaler => minmax_scale(a),
            _ => unreachable!("binary kind with arity 1"),
        },
        (2, Some(b)) => {
            if a.len() != b.len() {
                return Err(Error::shape(a.len(), b.len()));
            }
            let f: fn(f64, f64) -> f64 = match op.kind {
                OpKind::Plus => |x, y| x + y,
                OpKind::Minus => |x, y| x - y,
                OpKind::Multiply => |x, y| x * y,
                OpKind::DivideSafe => |x, y| x * y / (y * y + GUARD),
                _ => unreachable!("unary kind with arity 2"),
            };
            a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
        }
        (arity, b) => {
            return Err(Error::InvalidArgument(format!(
                "{} has arity {arity} but got {} operand(s)",
                op.name,
                1 + b.is_some() as usize
            )))
        }
    };
    Ok(out.into_iter().map(finite_or_zero).collect())
}

fn stand_scale(a: &[f64]) -> Vec<f64> {
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return vec![0.0; a.len()];
    }
    a.iter().map(|x| (x - mean) / sd).collect()
}

fn minmax_scale(a: &[f64]) -> Vec<f64> {
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return vec![0.0; a.len()];
    }
    a.iter().map(|x| (x - lo) / range).collect()
}
