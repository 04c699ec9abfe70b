//! Closed-form scalar expressions over chart coordinates, evaluated as jets.
//!
//! The grammar is standard infix with precedence `^` > unary `-` > `*`,`/` >
//! `+`,`-`, all binary operators left-associative, parentheses allowed.
//! Variables are `x1`..`xn`; `r` is syntactic sugar for
//! `sqrt(x1^2 + ... + xn^2)` and expands at parse time. Exponents of `^` must
//! be constant subexpressions (real exponents). Named parameters may be bound
//! to constants at parse time.

mod ast;
pub mod jet;
mod parse;

pub use ast::{Ast, FuncKind};
pub use jet::{Jet, JetError, JetShape};
pub use parse::ParseError;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("singular evaluation at node `{node}`: {reason}")]
    Singular { node: String, reason: String },
    #[error("point has {got} coordinates, expression is over {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// A parsed scalar expression over `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    ast: Ast,
    dim: usize,
}

/// Parse with no bound parameters.
pub fn parse(text: &str, dim: usize) -> Result<Expression, ParseError> {
    parse_with_params(text, dim, &BTreeMap::new())
}

/// Parse with named parameters substituted as constants.
pub fn parse_with_params(
    text: &str,
    dim: usize,
    params: &BTreeMap<String, f64>,
) -> Result<Expression, ParseError> {
    let ast = parse::parse_ast(text, dim, params)?;
    Ok(Expression { ast, dim })
}

impl Expression {
    pub fn constant(value: f64, dim: usize) -> Expression {
        Expression {
            ast: Ast::Const(value),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    /// Evaluate value and partial derivatives up to `order` at `point`.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet, EvalError> {
        if point.len() != self.dim {
            return Err(EvalError::PointDimension {
                expected: self.dim,
                got: point.len(),
            });
        }
        let shape = JetShape::get(self.dim, order)?;
        let vars: Vec<Jet> = (0..self.dim)
            .map(|i| Jet::variable(shape.clone(), i, point[i]))
            .collect();
        eval_node(&self.ast, &shape, &vars)
    }

    pub fn eval_value(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(self.eval_jet(point, 0)?.value())
    }

    /// Textual form that reparses to an identical AST.
    pub fn to_text(&self) -> String {
        self.ast.to_string()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

fn eval_node(node: &Ast, shape: &Arc<JetShape>, vars: &[Jet]) -> Result<Jet, EvalError> {
    let sing = |node: &str, err: JetError| EvalError::Singular {
        node: node.to_string(),
        reason: err.to_string(),
    };
    match node {
        Ast::Const(c) => Ok(Jet::constant(shape.clone(), *c)),
        Ast::Var(i) => Ok(vars[*i - 1].clone()),
        Ast::Neg(a) => Ok(eval_node(a, shape, vars)?.neg()),
        Ast::Add(a, b) => Ok(eval_node(a, shape, vars)?.add(&eval_node(b, shape, vars)?)),
        Ast::Sub(a, b) => Ok(eval_node(a, shape, vars)?.sub(&eval_node(b, shape, vars)?)),
        Ast::Mul(a, b) => Ok(eval_node(a, shape, vars)?.mul(&eval_node(b, shape, vars)?)),
        Ast::Div(a, b) => {
            let num = eval_node(a, shape, vars)?;
            let den = eval_node(b, shape, vars)?;
            num.div(&den).map_err(|e| sing("/", e))
        }
        Ast::Pow(base, p) => {
            let b = eval_node(base, shape, vars)?;
            b.powf(*p).map_err(|e| sing("^", e))
        }
        Ast::Func(kind, arg) => {
            let a = eval_node(arg, shape, vars)?;
            match kind {
                FuncKind::Sin => Ok(a.sin()),
                FuncKind::Cos => Ok(a.cos()),
                FuncKind::Tan => a.tan().map_err(|e| sing("tan", e)),
                FuncKind::Exp => Ok(a.exp()),
                FuncKind::Log => a.ln().map_err(|e| sing("log", e)),
                FuncKind::Sqrt => a.sqrt().map_err(|e| sing("sqrt", e)),
                FuncKind::Sinh => Ok(a.sinh()),
                FuncKind::Cosh => Ok(a.cosh()),
                FuncKind::Tanh => Ok(a.tanh()),
                FuncKind::Atan => Ok(a.atan()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_simple_sum() {
        let e = parse("x1 + 2*x2", 3).unwrap();
        assert_eq!(
            e.ast(),
            &Ast::Add(
                Box::new(Ast::Var(1)),
                Box::new(Ast::Mul(Box::new(Ast::Const(2.0)), Box::new(Ast::Var(2))))
            )
        );
    }

    #[test]
    fn r_expands_to_sqrt_of_squares() {
        let mut params = BTreeMap::new();
        params.insert("m".to_string(), 1.0);
        let e = parse_with_params("(1 + m/(2*r))^4", 3, &params).unwrap();
        // Evaluates like the isotropic Schwarzschild conformal factor.
        let v = e.eval_value(&[3.0, 0.0, 4.0]).unwrap();
        let expected = (1.0f64 + 1.0 / (2.0 * 5.0)).powi(4);
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn dimension_exceeded() {
        match parse("x4", 3) {
            Err(ParseError::DimensionExceeded { name, dim, .. }) => {
                assert_eq!(name, "x4");
                assert_eq!(dim, 3);
            }
            other => panic!("expected DimensionExceeded, got {other:?}"),
        }
    }

    #[test]
    fn product_jet_example() {
        let e = parse("x1*x2", 3).unwrap();
        let j = e.eval_jet(&[3.0, 5.0, 0.0], 2).unwrap();
        assert_eq!(j.value(), 15.0);
        assert_eq!(j.partial(&[1, 0, 0]), 5.0);
        assert_eq!(j.partial(&[0, 1, 0]), 3.0);
        assert_eq!(j.partial(&[1, 1, 0]), 1.0);
        assert_eq!(j.partial(&[2, 0, 0]), 0.0);
        assert_eq!(j.partial(&[0, 2, 0]), 0.0);
        assert_eq!(j.partial(&[0, 0, 2]), 0.0);
    }

    #[test]
    fn inverse_radius_jet_example() {
        let e = parse("1/r", 3).unwrap();
        let j = e.eval_jet(&[1.0, 0.0, 0.0], 1).unwrap();
        assert!((j.value() - 1.0).abs() < 1e-15);
        assert!((j.d(0) + 1.0).abs() < 1e-15);
        assert!(j.d(1).abs() < 1e-15);
        assert!(j.d(2).abs() < 1e-15);
    }

    #[test]
    fn cosh_r_second_partial_matches_finite_differences() {
        let e = parse("cosh(r)", 3).unwrap();
        let j = e.eval_jet(&[0.7, 0.0, 0.0], 2).unwrap();
        let f = |x: f64| {
            parse("cosh(r)", 3)
                .unwrap()
                .eval_value(&[x, 0.0, 0.0])
                .unwrap()
        };
        let h = 1e-4;
        let fd = (f(0.7 + h) - 2.0 * f(0.7) + f(0.7 - h)) / (h * h);
        assert!((j.partial(&[2, 0, 0]) - fd).abs() < 1e-6);
    }

    #[test]
    fn singular_evaluation_reports_node() {
        let e = parse("log(x1)", 1).unwrap();
        match e.eval_jet(&[-1.0], 1) {
            Err(EvalError::Singular { node, .. }) => assert_eq!(node, "log"),
            other => panic!("expected singular evaluation, got {other:?}"),
        }
        let e = parse("1/x1", 1).unwrap();
        assert!(matches!(
            e.eval_jet(&[0.0], 1),
            Err(EvalError::Singular { .. })
        ));
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "x1 + 2*x2",
            "(1 + 1/(2*r))^4 - 1",
            "-x1^2*sin(x2)/cosh(x3)",
            "x1^-2 + tan(x2)*atan(x3)",
            "sqrt(x1^2 + exp(-x2))",
        ] {
            let e1 = parse(text, 3).unwrap();
            let e2 = parse(&e1.to_text(), 3).unwrap();
            assert_eq!(e1.ast(), e2.ast(), "round trip failed for `{text}`");
        }
    }
}
