//! Equation parsing and evaluation.
//!
//! The input format is one equation per line, `lhs = rhs`, with `#` starting a
//! comment and blank lines ignored. Expressions follow the grammar
//!
//! ```text
//! expr   := term { ('+' | '-') term }
//! term   := factor { ('*' | '/') factor }
//! factor := '-' factor | power
//! power  := atom [ '^' factor ]
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `^` binds tighter than unary minus (`-x^2` is `-(x^2)`) and is
//! right-associative, with exponents like `x^-2` legal. The recognised
//! functions are `sin`, `cos`, `exp`, `ln`, `sqrt`, and `abs`; any other
//! identifier is a variable. Variables are ordered by first appearance in the
//! source text.
//!
//! Each equation `lhs = rhs` is stored as the residual expression `lhs - rhs`,
//! so a point solves the system exactly when every residual evaluates to zero.

use std::fmt;

// ============================================================================
// AST
// ============================================================================

/// Expression tree over `f64` constants and named variables.
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Constant(f64),
    Variable(String),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl UnaryOp {
    fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Ln => Some("ln"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    fn from_function_name(name: &str) -> Option<UnaryOp> {
        match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "ln" => Some(UnaryOp::Ln),
            "sqrt" => Some(UnaryOp::Sqrt),
            "abs" => Some(UnaryOp::Abs),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

// ============================================================================
// Errors
// ============================================================================

/// Parse failure with a 1-based source position.
#[derive(Clone, Debug, PartialEq)]
pub enum ParseError {
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    UnknownFunction {
        line: usize,
        column: usize,
        name: String,
    },
    UnbalancedParentheses {
        line: usize,
        column: usize,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax {
                line,
                column,
                message,
            } => write!(f, "line {line}, column {column}: {message}"),
            ParseError::UnknownFunction { line, column, name } => {
                write!(f, "line {line}, column {column}: unknown function '{name}'")
            }
            ParseError::UnbalancedParentheses { line, column } => {
                write!(f, "line {line}, column {column}: unbalanced parentheses")
            }
        }
    }
}

impl std::error::Error for ParseError {}

/// Evaluation left the domain of a partial operation, or a value stopped
/// being finite.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainError {
    LogNonPositive(f64),
    SqrtNegative(f64),
    DivisionByZero,
    PowUndefined { base: f64, exponent: f64 },
    NonFinite,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::LogNonPositive(v) => write!(f, "logarithm of non-positive value {v}"),
            DomainError::SqrtNegative(v) => write!(f, "square root of negative value {v}"),
            DomainError::DivisionByZero => write!(f, "division by zero"),
            DomainError::PowUndefined { base, exponent } => {
                write!(f, "{base}^{exponent} is undefined over the reals")
            }
            DomainError::NonFinite => write!(f, "value is not finite"),
        }
    }
}

impl std::error::Error for DomainError {}

/// A [`DomainError`] raised while evaluating a system, tagged with the
/// offending equation index.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDomainError {
    pub equation: usize,
    pub error: DomainError,
}

impl fmt::Display for SystemDomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "equation {}: {}", self.equation + 1, self.error)
    }
}

impl std::error::Error for SystemDomainError {}

// ============================================================================
// Equation system
// ============================================================================

/// A system of `m` residual expressions over `n` named variables.
///
/// Invariants: at least one variable and one residual, and every `Variable`
/// node in the residual trees names an entry of `variables`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquationSystem {
    variables: Vec<String>,
    residuals: Vec<Expression>,
}

impl EquationSystem {
    /// Builds a system from parts.
    ///
    /// Panics if the parts violate the type invariants; parsing is the
    /// validated construction path.
    pub fn new(variables: Vec<String>, residuals: Vec<Expression>) -> EquationSystem {
        assert!(
            !variables.is_empty(),
            "system must have at least one variable"
        );
        assert!(
            !residuals.is_empty(),
            "system must have at least one equation"
        );
        for r in &residuals {
            assert_variables_declared(r, &variables);
        }
        EquationSystem {
            variables,
            residuals,
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn residuals(&self) -> &[Expression] {
        &self.residuals
    }

    /// Number of equations.
    pub fn equation_count(&self) -> usize {
        self.residuals.len()
    }

    /// Number of variables.
    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn is_square(&self) -> bool {
        self.residuals.len() == self.variables.len()
    }

    /// Evaluates every residual at `point` (indexed like `variables`).
    pub fn residual_vector(&self, point: &[f64]) -> Result<Vec<f64>, SystemDomainError> {
        self.residuals
            .iter()
            .enumerate()
            .map(|(i, r)| {
                evaluate(r, &self.variables, point)
                    .map_err(|error| SystemDomainError { equation: i, error })
            })
            .collect()
    }

    /// Euclidean norm of the residual vector; zero exactly when `point`
    /// solves the system exactly.
    pub fn residual_norm(&self, point: &[f64]) -> Result<f64, SystemDomainError> {
        let r = self.residual_vector(point)?;
        Ok(r.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

fn assert_variables_declared(e: &Expression, variables: &[String]) {
    match e {
        Expression::Constant(_) => {}
        Expression::Variable(name) => {
            assert!(
                variables.iter().any(|v| v == name),
                "variable '{name}' is not declared in the system"
            );
        }
        Expression::Unary(_, inner) => assert_variables_declared(inner, variables),
        Expression::Binary(_, l, r) => {
            assert_variables_declared(l, variables);
            assert_variables_declared(r, variables);
        }
    }
}

// ============================================================================
// Evaluation
// ============================================================================

/// Evaluates `e` at `point`, where `point[i]` is the value of `variables[i]`.
///
/// Any operation leaving the reals raises a [`DomainError`]: `ln` of a value
/// `<= 0`, square root of a negative, division by zero, `0` raised to a
/// negative power, a negative base raised to a non-integer power, and any
/// intermediate result that is not finite. `0^0` evaluates to 1. A negative
/// base with an integer exponent is computed exactly with sign tracking.
///
/// Panics if a variable in the tree is missing from `variables`, which the
/// [`EquationSystem`] invariants rule out.
pub fn evaluate(e: &Expression, variables: &[String], point: &[f64]) -> Result<f64, DomainError> {
    let v = match e {
        Expression::Constant(c) => *c,
        Expression::Variable(name) => {
            let idx = variables
                .iter()
                .position(|v| v == name)
                .unwrap_or_else(|| panic!("variable '{name}' is not declared"));
            point[idx]
        }
        Expression::Unary(op, inner) => {
            let x = evaluate(inner, variables, point)?;
            match op {
                UnaryOp::Neg => -x,
                UnaryOp::Sin => x.sin(),
                UnaryOp::Cos => x.cos(),
                UnaryOp::Exp => x.exp(),
                UnaryOp::Ln => {
                    if x <= 0.0 {
                        return Err(DomainError::LogNonPositive(x));
                    }
                    x.ln()
                }
                UnaryOp::Sqrt => {
                    if x < 0.0 {
                        return Err(DomainError::SqrtNegative(x));
                    }
                    x.sqrt()
                }
                UnaryOp::Abs => x.abs(),
            }
        }
        Expression::Binary(op, l, r) => {
            let a = evaluate(l, variables, point)?;
            let b = evaluate(r, variables, point)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(DomainError::DivisionByZero);
                    }
                    a / b
                }
                BinaryOp::Pow => real_pow(a, b)?,
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::NonFinite)
    }
}

/// `a^b` restricted to the reals.
fn real_pow(a: f64, b: f64) -> Result<f64, DomainError> {
    if a == 0.0 {
        if b > 0.0 {
            Ok(0.0)
        } else if b == 0.0 {
            Ok(1.0)
        } else {
            Err(DomainError::PowUndefined {
                base: a,
                exponent: b,
            })
        }
    } else if a > 0.0 {
        Ok(a.powf(b))
    } else if b.fract() == 0.0 && b.abs() <= 2f64.powi(53) {
        // Negative base, integer exponent: compute on the magnitude and
        // restore the sign from the exponent's parity.
        let magnitude = (-a).powf(b);
        let odd = (b / 2.0).fract() != 0.0;
        Ok(if odd { -magnitude } else { magnitude })
    } else {
        Err(DomainError::PowUndefined {
            base: a,
            exponent: b,
        })
    }
}

// ============================================================================
// Tokenizer
// ============================================================================

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Equals,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier '{s}'"),
            Token::Plus => "'+'".into(),
            Token::Minus => "'-'".into(),
            Token::Star => "'*'".into(),
            Token::Slash => "'/'".into(),
            Token::Caret => "'^'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Equals => "'='".into(),
        }
    }
}

/// Token plus the 1-based column where it starts.
struct Spanned {
    token: Token,
    column: usize,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '+' => {
                tokens.push(Spanned {
                    token: Token::Plus,
                    column,
                });
                i += 1;
            }
            '-' => {
                tokens.push(Spanned {
                    token: Token::Minus,
                    column,
                });
                i += 1;
            }
            '*' => {
                tokens.push(Spanned {
                    token: Token::Star,
                    column,
                });
                i += 1;
            }
            '/' => {
                tokens.push(Spanned {
                    token: Token::Slash,
                    column,
                });
                i += 1;
            }
            '^' => {
                tokens.push(Spanned {
                    token: Token::Caret,
                    column,
                });
                i += 1;
            }
            '(' => {
                tokens.push(Spanned {
                    token: Token::LParen,
                    column,
                });
                i += 1;
            }
            ')' => {
                tokens.push(Spanned {
                    token: Token::RParen,
                    column,
                });
                i += 1;
            }
            '=' => {
                tokens.push(Spanned {
                    token: Token::Equals,
                    column,
                });
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Exponent part only when it is unambiguously numeric;
                // otherwise the 'e' starts an identifier token.
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    line: line_no,
                    column,
                    message: format!("invalid number '{text}'"),
                })?;
                tokens.push(Spanned {
                    token: Token::Number(value),
                    column,
                });
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                tokens.push(Spanned {
                    token: Token::Ident(name),
                    column,
                });
            }
            _ => {
                return Err(ParseError::Syntax {
                    line: line_no,
                    column,
                    message: format!("unexpected character '{c}'"),
                });
            }
        }
    }
    Ok(tokens)
}

// ============================================================================
// Parser
// ============================================================================

struct Parser<'a> {
    tokens: &'a [Spanned],
    pos: usize,
    line: usize,
    line_len: usize,
    /// Shared across all equations of a system so variables keep their order
    /// of first appearance in the source.
    variables: &'a mut Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|s| s.column)
            .unwrap_or(self.line_len + 1)
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos).map(|s| &s.token);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinaryOp::Add,
                Some(Token::Minus) => BinaryOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinaryOp::Mul,
                Some(Token::Slash) => BinaryOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.advance();
            let inner = self.factor()?;
            Ok(Expression::Unary(UnaryOp::Neg, Box::new(inner)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.advance();
            // Right-associative, and the exponent may carry a unary minus.
            let exponent = self.factor()?;
            Ok(Expression::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let column = self.column();
        match self.advance() {
            Some(Token::Number(v)) => Ok(Expression::Constant(*v)),
            Some(Token::Ident(name)) => {
                let name = name.clone();
                if matches!(self.peek(), Some(Token::LParen)) {
                    let op =
                        UnaryOp::from_function_name(&name).ok_or(ParseError::UnknownFunction {
                            line: self.line,
                            column,
                            name: name.clone(),
                        })?;
                    self.advance();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expression::Unary(op, Box::new(arg)))
                } else {
                    if !self.variables.contains(&name) {
                        self.variables.push(name.clone());
                    }
                    Ok(Expression::Variable(name))
                }
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(t) => {
                let message = format!("expected a value, found {}", t.describe());
                Err(ParseError::Syntax {
                    line: self.line,
                    column,
                    message,
                })
            }
            None => Err(ParseError::Syntax {
                line: self.line,
                column,
                message: "expected a value, found end of line".into(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Some(Token::RParen)) {
            self.advance();
            Ok(())
        } else {
            Err(ParseError::UnbalancedParentheses {
                line: self.line,
                column: self.column(),
            })
        }
    }
}

/// Parses the one-equation-per-line text format into a system.
///
/// `#` starts a comment, blank lines are skipped, and every remaining line
/// must contain exactly one `=`. Variables are collected in order of first
/// appearance across the whole input.
pub fn parse_system(text: &str) -> Result<EquationSystem, ParseError> {
    let mut variables = Vec::new();
    let mut residuals = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let tokens = tokenize(line, line_no)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            line: line_no,
            line_len: line.chars().count(),
            variables: &mut variables,
        };
        let lhs = parser.expr()?;
        match parser.advance() {
            Some(Token::Equals) => {}
            Some(t) => {
                let message = format!("expected '=', found {}", t.describe());
                let column = parser.tokens[parser.pos - 1].column;
                if matches!(t, Token::RParen) {
                    return Err(ParseError::UnbalancedParentheses {
                        line: line_no,
                        column,
                    });
                }
                return Err(ParseError::Syntax {
                    line: line_no,
                    column,
                    message,
                });
            }
            None => {
                return Err(ParseError::Syntax {
                    line: line_no,
                    column: parser.column(),
                    message: "equation is missing '='".into(),
                });
            }
        }
        let rhs = parser.expr()?;
        if let Some(t) = parser.peek() {
            let column = parser.column();
            if matches!(t, Token::Equals) {
                return Err(ParseError::Syntax {
                    line: line_no,
                    column,
                    message: "equation contains more than one '='".into(),
                });
            }
            if matches!(t, Token::RParen) {
                return Err(ParseError::UnbalancedParentheses {
                    line: line_no,
                    column,
                });
            }
            let message = format!("unexpected trailing {}", t.describe());
            return Err(ParseError::Syntax {
                line: line_no,
                column,
                message,
            });
        }
        residuals.push(Expression::Binary(
            BinaryOp::Sub,
            Box::new(lhs),
            Box::new(rhs),
        ));
    }
    if residuals.is_empty() {
        return Err(ParseError::Syntax {
            line: text.lines().count().max(1),
            column: 1,
            message: "input contains no equations".into(),
        });
    }
    if variables.is_empty() {
        return Err(ParseError::Syntax {
            line: 1,
            column: 1,
            message: "input contains no variables".into(),
        });
    }
    Ok(EquationSystem {
        variables,
        residuals,
    })
}

// ============================================================================
// Printing
// ============================================================================

impl fmt::Display for Expression {
    /// Fully parenthesised form that the parser maps back onto the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Constant(v) => write!(f, "{v}"),
            Expression::Variable(name) => f.write_str(name),
            // The outer parentheses keep the form atomic even as the left
            // operand of `^`, which binds tighter than unary minus.
            Expression::Unary(UnaryOp::Neg, inner) => write!(f, "(-({inner}))"),
            Expression::Unary(op, inner) => {
                write!(
                    f,
                    "{}({inner})",
                    op.function_name().expect("named function")
                )
            }
            Expression::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl fmt::Display for EquationSystem {
    /// One equation per line. A residual built as `lhs - rhs` at the top level
    /// prints as `lhs = rhs`, so parsed systems round-trip to identical trees;
    /// other residuals print as `residual = 0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.residuals {
            match r {
                Expression::Binary(BinaryOp::Sub, lhs, rhs) => {
                    writeln!(f, "{lhs} = {rhs}")?;
                }
                other => writeln!(f, "{other} = 0")?,
            }
        }
        Ok(())
    }
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> EquationSystem {
        parse_system(text).expect("parse failed")
    }

    #[test]
    fn parses_two_equation_system_with_variable_order() {
        let s = parse("x1^2 + x2^2 = 25\nx1 - x2 = 1\n");
        assert_eq!(s.variables(), ["x1".to_string(), "x2".to_string()]);
        assert_eq!(s.equation_count(), 2);
        let r = s.residual_vector(&[4.0, 3.0]).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn variable_order_follows_first_appearance() {
        let s = parse("ln(x3 + x2) = 1\nexp(x1) + cos(x2) = 5\nx1^3 - x2 = 3");
        assert_eq!(
            s.variables(),
            ["x3".to_string(), "x2".to_string(), "x1".to_string()]
        );
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let s = parse("# heading\n\nx + y = 3  # trailing\n\nx - y = 1\n");
        assert_eq!(s.equation_count(), 2);
        assert_eq!(s.residual_vector(&[2.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn tautology_parses_and_is_zero_everywhere() {
        let s = parse("x1 = x1");
        for v in [-3.0, 0.0, 7.5] {
            assert_eq!(s.residual_vector(&[v]).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let s = parse("-x1^2 = y");
        // -(x1^2), not (-x1)^2.
        let r = s.residual_vector(&[2.0, 0.0]).unwrap();
        assert_eq!(r, vec![-4.0]);
    }

    #[test]
    fn power_is_right_associative() {
        let s = parse("x1^x2^2 = 0");
        // 2^(3^2) = 512, not (2^3)^2 = 64.
        assert_eq!(s.residual_vector(&[2.0, 3.0]).unwrap(), vec![512.0]);
    }

    #[test]
    fn negative_exponent_parses() {
        let s = parse("x1^-1 = 0");
        assert_eq!(s.residual_vector(&[2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn unary_minus_allowed_after_multiplication() {
        let s = parse("2*-x1 = 0");
        assert_eq!(s.residual_vector(&[3.0]).unwrap(), vec![-6.0]);
    }

    #[test]
    fn scientific_notation_constants() {
        let s = parse("1e-3*x1 = 2.5e2");
        assert_eq!(s.residual_vector(&[1000.0]).unwrap(), vec![1.0 - 250.0]);
    }

    #[test]
    fn missing_close_paren_is_unbalanced() {
        let err = parse_system("sin(x1 + cos(x2) = 1").unwrap_err();
        assert!(matches!(err, ParseError::UnbalancedParentheses { .. }));
    }

    #[test]
    fn stray_close_paren_is_unbalanced() {
        let err = parse_system("x1) = 1").unwrap_err();
        assert!(matches!(err, ParseError::UnbalancedParentheses { .. }));
    }

    #[test]
    fn unknown_function_is_reported_by_name() {
        let err = parse_system("tan(x1) = 0").unwrap_err();
        match err {
            ParseError::UnknownFunction { name, .. } => assert_eq!(name, "tan"),
            other => panic!("expected UnknownFunction, got {other:?}"),
        }
    }

    #[test]
    fn missing_equals_is_syntax_error() {
        let err = parse_system("x1 + x2").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn double_equals_is_syntax_error() {
        let err = parse_system("x1 = x2 = 3").unwrap_err();
        match err {
            ParseError::Syntax { message, .. } => {
                assert!(message.contains("more than one '='"), "{message}");
            }
            other => panic!("expected Syntax, got {other:?}"),
        }
    }

    #[test]
    fn error_position_is_reported() {
        let err = parse_system("x1 + = 3").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 1);
                assert_eq!(column, 6);
            }
            other => panic!("expected Syntax, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_basic_arithmetic() {
        let s = parse("x1^2 + x2^2 = 25\nx1 - x2 = 1");
        let vars = s.variables();
        assert_eq!(evaluate(&s.residuals()[0], vars, &[4.0, 3.0]).unwrap(), 0.0);
        assert_eq!(
            evaluate(&s.residuals()[1], vars, &[0.0, 0.0]).unwrap(),
            -1.0
        );
    }

    #[test]
    fn domain_errors_by_kind() {
        let vars = vec!["x".to_string()];
        let ln = parse("ln(x) = 1");
        assert!(matches!(
            evaluate(&ln.residuals()[0], &vars, &[-0.5]),
            Err(DomainError::LogNonPositive(_))
        ));
        assert!(matches!(
            evaluate(&ln.residuals()[0], &vars, &[0.0]),
            Err(DomainError::LogNonPositive(_))
        ));
        let sqrt = parse("sqrt(x) = 1");
        assert!(matches!(
            evaluate(&sqrt.residuals()[0], &vars, &[-4.0]),
            Err(DomainError::SqrtNegative(_))
        ));
        let div = parse("1/x = 1");
        assert!(matches!(
            evaluate(&div.residuals()[0], &vars, &[0.0]),
            Err(DomainError::DivisionByZero)
        ));
        let overflow = parse("exp(x) = 0");
        assert!(matches!(
            evaluate(&overflow.residuals()[0], &vars, &[1000.0]),
            Err(DomainError::NonFinite)
        ));
    }

    #[test]
    fn system_domain_error_carries_equation_index() {
        let s = parse("x2 + x3 = 1\nln(x3 + x2) = 1");
        let err = s.residual_vector(&[-1.0, 0.5]).unwrap_err();
        assert_eq!(err.equation, 1);
        assert!(matches!(err.error, DomainError::LogNonPositive(_)));
    }

    #[test]
    fn power_domain_rules() {
        let vars = vec!["x".to_string(), "y".to_string()];
        let s = parse("x^y = 0");
        let e = &s.residuals()[0];
        // 0^0 = 1
        assert_eq!(evaluate(e, &vars, &[0.0, 0.0]).unwrap(), 1.0);
        // 0^positive = 0
        assert_eq!(evaluate(e, &vars, &[0.0, 3.0]).unwrap(), 0.0);
        // 0^negative undefined
        assert!(matches!(
            evaluate(e, &vars, &[0.0, -1.0]),
            Err(DomainError::PowUndefined { .. })
        ));
        // negative base, integer exponent: sign tracking
        assert_eq!(evaluate(e, &vars, &[-2.0, 3.0]).unwrap(), -8.0);
        assert_eq!(evaluate(e, &vars, &[-2.0, 4.0]).unwrap(), 16.0);
        assert_eq!(evaluate(e, &vars, &[-2.0, -2.0]).unwrap(), 0.25);
        // negative base, fractional exponent undefined
        assert!(matches!(
            evaluate(e, &vars, &[-2.0, 0.5]),
            Err(DomainError::PowUndefined { .. })
        ));
    }

    #[test]
    fn residual_vector_and_norm() {
        let s = parse("3*x1 + 2*x2 = 5\n4*x1 - x2 = 1");
        assert_eq!(s.residual_vector(&[0.0, 0.0]).unwrap(), vec![-5.0, -1.0]);
        let norm = s.residual_norm(&[0.0, 0.0]).unwrap();
        assert!((norm - 26f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.residual_norm(&[7.0 / 11.0, 17.0 / 11.0]).unwrap(), 0.0);
    }

    #[test]
    fn printed_form_reparses_to_identical_system() {
        let text = "x1^2 + x2^2 = 25\nx1 - x2 = 1\nsin(x1) - exp(-x2) = 0.5\n";
        let s1 = parse(text);
        let s2 = parse(&s1.to_string());
        assert_eq!(s1, s2);
        let s3 = parse(&s2.to_string());
        assert_eq!(s2, s3);
    }

    #[test]
    fn negation_as_power_base_round_trips() {
        // Unary minus binds looser than `^`, so the printed form of a negated
        // power base has to stay atomic or it reparses as -(x^2).
        let s1 = parse("(-x1) ^ 2 = 4");
        let s2 = parse(&s1.to_string());
        assert_eq!(s1, s2);
        assert_eq!(s1.residual_vector(&[-2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn printer_handles_non_subtraction_residual() {
        let sys = EquationSystem::new(
            vec!["x".to_string()],
            vec![Expression::Variable("x".to_string())],
        );
        let printed = sys.to_string();
        assert_eq!(printed, "x = 0\n");
        assert_eq!(parse(&printed).residual_vector(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(parse_system("").is_err());
        assert!(parse_system("# only a comment\n").is_err());
    }

    #[test]
    fn constant_only_equation_is_rejected() {
        // No variables anywhere in the input.
        assert!(parse_system("1 = 1").is_err());
    }
}
