use std::fmt;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{operation_by_id, operation_by_name, Operation, N_OPS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Start,
    End,
    Sep,
    /// Original feature index.
    Feat(usize),
    /// Operation id in the default operation set.
    Op(usize),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Start => f.write_str("<start>"),
            Token::End => f.write_str("<end>"),
            Token::Sep => f.write_str("<sep>"),
            Token::Feat(k) => write!(f, "f{k}"),
            Token::Op(id) => match operation_by_id(*id) {
                Some(op) => f.write_str(op.name),
                None => write!(f, "op#{id}"),
            },
        }
    }
}

/// A postfix program over original features that produces one column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expr(Vec<Token>);

impl Expr {
    pub fn feature(index: usize) -> Self {
        Expr(vec![Token::Feat(index)])
    }

    /// Validates operand counts and token kinds.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        let mut depth: usize = 0;
        for t in &tokens {
            match *t {
                Token::Feat(_) => depth += 1,
                Token::Op(id) => {
                    let op = operation_by_id(id)
                        .ok_or_else(|| Error::Sequence(format!("unknown operation id {id}")))?;
                    let need = op.arity as usize;
                    if depth < need {
                        return Err(Error::Sequence(format!("stack underflow at {}", op.name)));
                    }
                    depth = depth - need + 1;
                }
                other => {
                    return Err(Error::Sequence(format!("{other} inside an expression")));
                }
            }
        }
        match depth {
            1 => Ok(Expr(tokens)),
            0 => Err(Error::Sequence("empty expression".into())),
            n => Err(Error::Sequence(format!("expression leaves {n} operands"))),
        }
    }

    /// Postfix combination `head [tail] op`.
    pub fn apply(op: &Operation, head: &Expr, tail: Option<&Expr>) -> Self {
        let mut tokens = head.0.clone();
        if let Some(t) = tail {
            tokens.extend_from_slice(&t.0);
        }
        tokens.push(Token::Op(op.id));
        Expr(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.0
            .iter()
            .filter_map(|t| match t {
                Token::Feat(k) => Some(*k),
                _ => None,
            })
            .max()
    }

    /// Function-call rendering with feature names, e.g. `multiply(x1,x2)`.
    pub fn to_infix(&self, names: &[String]) -> String {
        let mut stack: Vec<String> = Vec::new();
        for t in &self.0 {
            match *t {
                Token::Feat(k) => stack.push(names.get(k).cloned().unwrap_or_else(|| format!("f{k}"))),
                Token::Op(id) => {
                    let op = operation_by_id(id).expect("validated expression");
                    let args = stack.split_off(stack.len() - op.arity as usize);
                    stack.push(format!("{}({})", op.name, args.join(",")));
                }
                _ => {}
            }
        }
        stack.pop().unwrap_or_default()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// `<start> expr (<sep> expr)* <end>`: one postfix expression per live
/// feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransformationSequence {
    tokens: Vec<Token>,
    expr_spans: Vec<Range<usize>>,
}

impl TransformationSequence {
    pub fn from_exprs(exprs: &[Expr]) -> Self {
        let mut tokens = vec![Token::Start];
        let mut expr_spans = Vec::with_capacity(exprs.len());
        for (i, e) in exprs.iter().enumerate() {
            if i > 0 {
                tokens.push(Token::Sep);
            }
            let start = tokens.len();
            tokens.extend_from_slice(e.tokens());
            expr_spans.push(start..tokens.len());
        }
        tokens.push(Token::End);
        TransformationSequence { tokens, expr_spans }
    }

    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        if tokens.first() != Some(&Token::Start) {
            return Err(Error::Sequence("sequence must begin with <start>".into()));
        }
        if tokens.len() < 2 || tokens.last() != Some(&Token::End) {
            return Err(Error::Sequence("sequence must end with <end>".into()));
        }
        let body = &tokens[1..tokens.len() - 1];
        let exprs = body
            .split(|t| *t == Token::Sep)
            .map(|chunk| Expr::from_tokens(chunk.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_exprs(&exprs))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn expr_spans(&self) -> &[Range<usize>] {
        &self.expr_spans
    }

    pub fn n_exprs(&self) -> usize {
        self.expr_spans.len()
    }

    pub fn exprs(&self) -> Vec<Expr> {
        self.expr_spans
            .iter()
            .map(|r| Expr(self.tokens[r.clone()].to_vec()))
            .collect()
    }
}

impl fmt::Display for TransformationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

pub fn serialize_sequence(seq: &TransformationSequence) -> String {
    seq.to_string()
}

pub fn parse_sequence(text: &str) -> Result<TransformationSequence> {
    let tokens = text
        .split_whitespace()
        .map(|w| match w {
            "<start>" => Ok(Token::Start),
            "<end>" => Ok(Token::End),
            "<sep>" => Ok(Token::Sep),
            _ => {
                if let Some(k) = w.strip_prefix('f').and_then(|d| d.parse::<usize>().ok()) {
                    Ok(Token::Feat(k))
                } else if let Some(op) = operation_by_name(w) {
                    Ok(Token::Op(op.id))
                } else {
                    Err(Error::Sequence(format!("unknown token {w:?}")))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if tokens.iter().skip(1).take(tokens.len().saturating_sub(2)).any(|t| matches!(t, Token::Start | Token::End)) {
        return Err(Error::Sequence("<start>/<end> inside the sequence body".into()));
    }
    TransformationSequence::from_tokens(tokens)
}

/// Random expression over `n_original` features with at most `max_depth`
/// nested operations.
pub fn random_expr<R: Rng + ?Sized>(n_original: usize, max_depth: usize, rng: &mut R) -> Expr {
    if max_depth == 0 || rng.random_bool(0.3) {
        return Expr::feature(rng.random_range(0..n_original));
    }
    let op = operation_by_id(rng.random_range(0..N_OPS)).expect("id in range");
    let head = random_expr(n_original, max_depth - 1, rng);
    let tail = op.is_binary().then(|| random_expr(n_original, max_depth - 1, rng));
    Expr::apply(&op, &head, tail.as_ref())
}

/// Random sequence of `n_exprs` expressions.
pub fn random_sequence<R: Rng + ?Sized>(
    n_original: usize,
    n_exprs: usize,
    max_depth: usize,
    rng: &mut R,
) -> TransformationSequence {
    let exprs: Vec<Expr> = (0..n_exprs).map(|_| random_expr(n_original, max_depth, rng)).collect();
    TransformationSequence::from_exprs(&exprs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::N_OPS;
    use proptest::prelude::*;

    #[test]
    fn minimal_sequence_text() {
        let s = TransformationSequence::from_exprs(&[Expr::feature(0)]);
        assert_eq!(s.tokens(), &[Token::Start, Token::Feat(0), Token::End]);
        assert_eq!(serialize_sequence(&s), "<start> f0 <end>");
    }

    #[test]
    fn grammar_examples() {
        let s = parse_sequence("<start> f0 f1 plus <sep> f2 square <end>").unwrap();
        assert_eq!(s.n_exprs(), 2);
        assert_eq!(s.exprs()[1].tokens(), &[Token::Feat(2), Token::Op(0)]);
        assert!(matches!(parse_sequence("<start> plus <end>"), Err(Error::Sequence(_))));
        assert!(parse_sequence("<start> f0 f1 <end>").is_err());
        assert!(parse_sequence("f0 <end>").is_err());
        assert!(parse_sequence("<start> f0").is_err());
        assert!(parse_sequence("<start> f0 wobble <end>").is_err());
        assert!(parse_sequence("<start> f0 <sep> <end>").is_err());
        assert!(parse_sequence("<start> f0 <start> f1 <end>").is_err());
    }

    #[test]
    fn infix_rendering() {
        let e = parse_sequence("<start> f0 f1 multiply stand_scaler <end>").unwrap().exprs().remove(0);
        let names = vec!["w".to_string(), "g".to_string()];
        assert_eq!(e.to_infix(&names), "stand_scaler(multiply(w,g))");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = (0usize..6).prop_map(Expr::feature);
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), 0usize..11).prop_map(|(e, id)| {
                    Expr::apply(&operation_by_id(id).unwrap(), &e, None)
                }),
                (inner.clone(), inner, 11usize..N_OPS).prop_map(|(a, b, id)| {
                    Expr::apply(&operation_by_id(id).unwrap(), &a, Some(&b))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(exprs in prop::collection::vec(arb_expr(), 1..8)) {
            let s = TransformationSequence::from_exprs(&exprs);
            let back = parse_sequence(&serialize_sequence(&s)).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.exprs(), exprs);
        }
    }
}
