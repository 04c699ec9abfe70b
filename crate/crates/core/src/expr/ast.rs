use std::fmt;

/// Function catalog. Every entry takes exactly one argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuncKind {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
}

impl FuncKind {
    pub fn from_name(name: &str) -> Option<FuncKind> {
        Some(match name {
            "sin" => FuncKind::Sin,
            "cos" => FuncKind::Cos,
            "tan" => FuncKind::Tan,
            "exp" => FuncKind::Exp,
            "log" => FuncKind::Log,
            "sqrt" => FuncKind::Sqrt,
            "sinh" => FuncKind::Sinh,
            "cosh" => FuncKind::Cosh,
            "tanh" => FuncKind::Tanh,
            "atan" => FuncKind::Atan,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FuncKind::Sin => "sin",
            FuncKind::Cos => "cos",
            FuncKind::Tan => "tan",
            FuncKind::Exp => "exp",
            FuncKind::Log => "log",
            FuncKind::Sqrt => "sqrt",
            FuncKind::Sinh => "sinh",
            FuncKind::Cosh => "cosh",
            FuncKind::Tanh => "tanh",
            FuncKind::Atan => "atan",
        }
    }
}

/// Expression tree. Variables are 1-based (`Var(1)` is `x1`); `r` never
/// appears here (it expands to the sqrt form during parsing). Power exponents
/// are constant-folded reals.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Const(f64),
    Var(usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, f64),
    Func(FuncKind, Box<Ast>),
}

/// Binding power of a node, for parenthesization while printing.
fn precedence(node: &Ast) -> u8 {
    match node {
        Ast::Add(..) | Ast::Sub(..) => 1,
        Ast::Mul(..) | Ast::Div(..) => 2,
        Ast::Neg(..) => 3,
        Ast::Pow(..) => 4,
        // Negative constants (from parameter substitution) always print
        // parenthesized so the text reparses to the same node.
        Ast::Const(c) if *c < 0.0 => 0,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Ast, min_prec: u8) -> fmt::Result {
    if precedence(child) < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Const(c) => write!(f, "{c}"),
            Ast::Var(i) => write!(f, "x{i}"),
            Ast::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 4)
            }
            Ast::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Ast::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Ast::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Ast::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Ast::Pow(a, p) => {
                write_child(f, a, 5)?;
                if *p < 0.0 {
                    write!(f, "^({p})")
                } else {
                    write!(f, "^{p}")
                }
            }
            Ast::Func(kind, a) => write!(f, "{}({a})", kind.name()),
        }
    }
}
