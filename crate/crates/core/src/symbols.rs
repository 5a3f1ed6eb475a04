//! Symbols sigma(x, xi): expression language, class seminorms, and the
//! elementary (Fourier-windowed) decomposition along the spectral axis.

use crate::calculus::PartitionOfUnity;
use crate::fit::{linfit, LinFit};
use crate::operator::SpectralData;
use crate::space::MetricMeasureSpace;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Expression language
// ---------------------------------------------------------------------------

/// Parse failure with the byte offset into the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

/// Abstract syntax of a symbol expression over the spectral variable `xi`
/// and the space features `x0`, `x1`, ...
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Xi,
    Feature(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, feats: &[f64], xi: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Xi => xi,
            Expr::Feature(k) => feats[*k],
            Expr::Neg(e) => -e.eval(feats, xi),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(feats, xi), b.eval(feats, xi));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(feats, xi);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Min => a.min(args[1].eval(feats, xi)),
                    Func::Max => a.max(args[1].eval(feats, xi)),
                }
            }
        }
    }

    /// Largest feature index referenced, if any.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Xi => None,
            Expr::Feature(k) => Some(*k),
            Expr::Neg(e) => e.max_feature(),
            Expr::Bin(_, a, b) => match (a.max_feature(), b.max_feature()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Call(_, args) => args.iter().filter_map(|e| e.max_feature()).max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> std::result::Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Tok::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Tok::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                return Err(ParseError {
                    offset: i,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.src_len)
    }
    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t);
        self.pos += 1;
        t
    }
    fn expect(&mut self, want: Tok, what: &str) -> std::result::Result<(), ParseError> {
        let off = self.offset();
        match self.next() {
            Some(t) if *t == want => Ok(()),
            got => Err(ParseError {
                offset: off,
                message: format!("expected {what}, found {}", describe(got)),
            }),
        }
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            // right-associative; exponent may carry a unary minus
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, ParseError> {
        let off = self.offset();
        match self.next().cloned() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if name == "xi" {
                    return Ok(Expr::Xi);
                }
                if let Some(rest) = name.strip_prefix('x') {
                    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                        let k: usize = rest.parse().map_err(|_| ParseError {
                            offset: off,
                            message: format!("feature index out of range in '{name}'"),
                        })?;
                        return Ok(Expr::Feature(k));
                    }
                }
                let func = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "min" => Func::Min,
                    "max" => Func::Max,
                    _ => {
                        return Err(ParseError {
                            offset: off,
                            message: format!(
                                "unknown identifier '{name}'; expected xi, x<k>, or one of sin, cos, exp, log, min, max"
                            ),
                        })
                    }
                };
                self.expect(Tok::LParen, "'(' after function name")?;
                let mut args = vec![self.expr()?];
                while matches!(self.peek(), Some(Tok::Comma)) {
                    self.next();
                    args.push(self.expr()?);
                }
                let close_off = self.offset();
                self.expect(Tok::RParen, "')'")?;
                if args.len() != func.arity() {
                    return Err(ParseError {
                        offset: close_off,
                        message: format!(
                            "{} takes {} argument(s), found {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            got => Err(ParseError {
                offset: off,
                message: format!(
                    "expected number, 'xi', feature 'x<k>', function call, '(' or '-', found {}",
                    describe(got.as_ref())
                ),
            }),
        }
    }
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of input".into(),
        Some(Tok::Num(v)) => format!("number {v}"),
        Some(Tok::Ident(s)) => format!("identifier '{s}'"),
        Some(Tok::Plus) => "'+'".into(),
        Some(Tok::Minus) => "'-'".into(),
        Some(Tok::Star) => "'*'".into(),
        Some(Tok::Slash) => "'/'".into(),
        Some(Tok::Caret) => "'^'".into(),
        Some(Tok::LParen) => "'('".into(),
        Some(Tok::RParen) => "')'".into(),
        Some(Tok::Comma) => "','".into(),
    }
}

/// Parse a symbol expression.
pub fn parse_expr(src: &str) -> std::result::Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks: &toks, pos: 0, src_len: src.len() };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(ParseError {
            offset: p.offset(),
            message: format!("trailing input: found {}", describe(p.peek())),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

/// Class parameters of S^s_{rho,delta}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolClass {
    pub s: f64,
    pub rho: f64,
    pub delta: f64,
}

impl SymbolClass {
    pub fn order_zero() -> Self {
        SymbolClass { s: 0.0, rho: 1.0, delta: 0.0 }
    }
}

#[derive(Clone)]
enum SymbolKind {
    Expr { ast: Arc<Expr>, features: Arc<Vec<Vec<f64>>> },
    RealFn(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
    ComplexFn(Arc<dyn Fn(usize, f64) -> Complex64 + Send + Sync>),
}

/// A symbol sigma(x, xi) over a fixed space: evaluable at any point index and
/// any nonnegative spectral value (expressions extend smoothly to a
/// neighborhood, which the finite-difference probes use).
#[derive(Clone)]
pub struct Symbol {
    pub name: String,
    pub class: SymbolClass,
    kind: SymbolKind,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({}, class s={} rho={} delta={})", self.name, self.class.s, self.class.rho, self.class.delta)
    }
}

impl Symbol {
    pub fn from_expr_str(src: &str, space: &MetricMeasureSpace, class: SymbolClass) -> Result<Symbol> {
        let ast = parse_expr(src)?;
        if let Some(k) = ast.max_feature() {
            let dim = space.features.first().map(|f| f.len()).unwrap_or(0);
            if k >= dim {
                return Err(Error::Invalid(format!(
                    "expression references feature x{k} but the space provides {dim} feature(s)"
                )));
            }
        }
        Ok(Symbol {
            name: src.to_string(),
            class,
            kind: SymbolKind::Expr { ast: Arc::new(ast), features: Arc::new(space.features.clone()) },
        })
    }

    /// x-independent spectral multiplier as a symbol.
    pub fn multiplier(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        class: SymbolClass,
    ) -> Symbol {
        Symbol {
            name: name.to_string(),
            class,
            kind: SymbolKind::RealFn(Arc::new(move |_, xi| f(xi))),
        }
    }

    pub fn real_fn(
        name: &str,
        f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        class: SymbolClass,
    ) -> Symbol {
        Symbol { name: name.to_string(), class, kind: SymbolKind::RealFn(Arc::new(f)) }
    }

    pub fn complex_fn(
        name: &str,
        f: impl Fn(usize, f64) -> Complex64 + Send + Sync + 'static,
        class: SymbolClass,
    ) -> Symbol {
        Symbol { name: name.to_string(), class, kind: SymbolKind::ComplexFn(Arc::new(f)) }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self.kind, SymbolKind::ComplexFn(_))
    }

    pub fn eval(&self, x: usize, xi: f64) -> Complex64 {
        match &self.kind {
            SymbolKind::Expr { ast, features } => Complex64::new(ast.eval(&features[x], xi), 0.0),
            SymbolKind::RealFn(f) => Complex64::new(f(x, xi), 0.0),
            SymbolKind::ComplexFn(f) => f(x, xi),
        }
    }

    /// Real-part evaluation; exact for real symbols.
    pub fn eval_re(&self, x: usize, xi: f64) -> f64 {
        match &self.kind {
            SymbolKind::Expr { ast, features } => ast.eval(&features[x], xi),
            SymbolKind::RealFn(f) => f(x, xi),
            SymbolKind::ComplexFn(f) => f(x, xi).re,
        }
    }

    /// Product with a spectral multiplier (used for scale-localized families).
    pub fn scaled_by(&self, name: &str, w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Symbol {
        let inner = self.clone();
        let is_real = self.is_real();
        let fname = format!("{} * {}", self.name, name);
        if is_real {
            let f = move |x: usize, xi: f64| inner.eval_re(x, xi) * w(xi);
            Symbol { name: fname, class: self.class, kind: SymbolKind::RealFn(Arc::new(f)) }
        } else {
            let f = move |x: usize, xi: f64| inner.eval(x, xi) * w(xi);
            Symbol { name: fname, class: self.class, kind: SymbolKind::ComplexFn(Arc::new(f)) }
        }
    }
}

// ---------------------------------------------------------------------------
// Seminorms
// ---------------------------------------------------------------------------

/// Weighted seminorm table: values[(i, beta)] is the sup over the probe grid
/// and over x of |Delta^alpha_i d^beta_xi sigma(x, xi)| (1+xi)^{-e} with class
/// exponent e = s/m - rho beta + (2 delta / m) alpha.
#[derive(Debug, Clone)]
pub struct SeminormTable {
    pub alphas: Vec<f64>,
    pub beta_max: usize,
    pub values: Array2<f64>,
    pub constant: f64,
}

const STENCILS: [&[(i32, f64)]; 5] = [
    &[(0, 1.0)],
    &[(-1, -0.5), (1, 0.5)],
    &[(-1, 1.0), (0, -2.0), (1, 1.0)],
    &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
];

fn symbol_xi_derivative(symbol: &Symbol, n: usize, xi: f64, beta: usize) -> Result<Vec<Complex64>> {
    if beta >= STENCILS.len() {
        return Err(Error::Unsupported("xi-derivatives above order 4".into()));
    }
    let eval_vec = |at: f64| -> Vec<Complex64> { (0..n).map(|x| symbol.eval(x, at)).collect() };
    if beta == 0 {
        return Ok(eval_vec(xi));
    }
    let rel = (256.0 * f64::EPSILON).powf(1.0 / (beta as f64 + 2.0));
    // step on the (1 + xi) scale of the symbol classes, so small xi keeps an
    // O(1) absolute step and roundoff stays below the class weights
    let h0 = (1.0 + xi.abs()) * rel;
    let stencil = |h: f64| -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for &(k, c) in STENCILS[beta] {
            let v = eval_vec(xi + k as f64 * h);
            let w = c / h.powi(beta as i32);
            for x in 0..n {
                acc[x] += v[x] * w;
            }
        }
        acc
    };
    let a1 = stencil(h0);
    let a2 = stencil(h0 / 2.0);
    Ok((0..n).map(|x| (a2[x] * 4.0 - a1[x]) / 3.0).collect())
}

/// Compute the class seminorm table of a symbol against a reference operator
/// (whose spectral data supplies Delta powers in x) and class order m.
pub fn seminorm(
    symbol: &Symbol,
    sd_ref: &SpectralData,
    m_order: f64,
    alphas: &[f64],
    beta_max: usize,
    probe: &[f64],
) -> Result<SeminormTable> {
    let n = sd_ref.n();
    let cls = symbol.class;
    let mut values = Array2::zeros((alphas.len(), beta_max + 1));
    for &xi in probe {
        if !(xi >= 0.0) {
            return Err(Error::Invalid("probe points must be nonnegative".into()));
        }
        for beta in 0..=beta_max {
            let d = symbol_xi_derivative(symbol, n, xi, beta)?;
            let re: Array1<f64> = d.iter().map(|z| z.re).collect();
            let im: Array1<f64> = d.iter().map(|z| z.im).collect();
            for (ia, &alpha) in alphas.iter().enumerate() {
                let (vre, vim) = if alpha == 0.0 {
                    (re.clone(), im.clone())
                } else {
                    (
                        sd_ref.apply_multiplier(|l| l.powf(alpha), &re),
                        sd_ref.apply_multiplier(|l| l.powf(alpha), &im),
                    )
                };
                let e = cls.s / m_order - cls.rho * beta as f64 + (2.0 * cls.delta / m_order) * alpha;
                let w = (1.0 + xi).powf(-e);
                let sup = (0..n)
                    .map(|x| vre[x].hypot(vim[x]))
                    .fold(0.0f64, f64::max);
                let val = sup * w;
                if val > values[[ia, beta]] {
                    values[[ia, beta]] = val;
                }
            }
        }
    }
    let constant = values.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(SeminormTable { alphas: alphas.to_vec(), beta_max, values, constant })
}

// ---------------------------------------------------------------------------
// Elementary decomposition
// ---------------------------------------------------------------------------

/// Fourier-windowed decomposition of a symbol over a geometric scale grid:
/// sigma ~ tau + sum over scales t_i and frequencies |l| <= l_max of
/// gamma_{l, t_i}(x) psi_tilde(t_i xi) e^{2 pi i l t_i xi}, with
/// tau(x, xi) = eta(xi) sigma(x, xi) the coarse part.
#[derive(Debug, Clone)]
pub struct ElementaryDecomposition {
    pub l_max: usize,
    pub q_per_octave: usize,
    pub t_grid: Vec<f64>,
    /// Quadrature weight h = ln 2 / q of the geometric grid.
    pub log_weight: f64,
    /// One (2 l_max + 1) x n matrix per scale; row l + l_max holds
    /// gamma_{l, t_i}(x).
    pub gammas: Vec<Array2<Complex64>>,
    pub partition: PartitionOfUnity,
}

/// Compute the decomposition coefficients
/// gamma_{l,t}(x) = t int_{1/t}^{2/t} sigma(x, eta) psi(t eta) e^{-2 pi i l t eta} d eta
/// on the uniform 4(l_max+1)-node grid, where they reduce to exact DFT
/// coefficients of the windowed integrand. The scale grid is geometric with
/// q nodes per octave from 1 down to 1/lambda_max.
pub fn decompose(
    symbol: &Symbol,
    sd: &SpectralData,
    partition: PartitionOfUnity,
    l_max: usize,
    q_per_octave: usize,
) -> Result<ElementaryDecomposition> {
    let n = sd.n();
    let (t_grid, h) = crate::calculus::geometric_scale_grid(sd.lambda_max(), q_per_octave)?;

    let n_nodes = 4 * (l_max + 1);
    // psi(t eta_j) = psi(1 + j/n): scale-independent window samples
    let window: Vec<f64> = (0..n_nodes).map(|j| partition.psi(1.0 + j as f64 / n_nodes as f64)).collect();
    // twiddles W[l + l_max][j] = e^{-2 pi i l j / n}
    let n_l = 2 * l_max + 1;
    let mut twiddle = Array2::from_elem((n_l, n_nodes), Complex64::new(0.0, 0.0));
    for li in 0..n_l {
        let l = li as i64 - l_max as i64;
        for j in 0..n_nodes {
            let th = -2.0 * std::f64::consts::PI * (l * j as i64) as f64 / n_nodes as f64;
            twiddle[[li, j]] = Complex64::from_polar(1.0, th);
        }
    }

    let mut gammas = Vec::with_capacity(t_grid.len());
    let inv_n = 1.0 / n_nodes as f64;
    let mut g = vec![Complex64::new(0.0, 0.0); n_nodes];
    for &t in &t_grid {
        let mut gm = Array2::from_elem((n_l, n), Complex64::new(0.0, 0.0));
        for x in 0..n {
            for (j, gj) in g.iter_mut().enumerate() {
                let eta_j = (1.0 + j as f64 / n_nodes as f64) / t;
                *gj = symbol.eval(x, eta_j) * window[j];
            }
            for li in 0..n_l {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n_nodes {
                    acc += g[j] * twiddle[[li, j]];
                }
                gm[[li, x]] = acc * inv_n;
            }
        }
        gammas.push(gm);
    }
    Ok(ElementaryDecomposition { l_max, q_per_octave, t_grid, log_weight: h, gammas, partition })
}

impl ElementaryDecomposition {
    /// Coarse part tau(x, xi) = eta(xi) sigma(x, xi).
    pub fn tau(&self, symbol: &Symbol, x: usize, xi: f64) -> Complex64 {
        symbol.eval(x, xi) * self.partition.eta(xi)
    }

    /// Evaluate the reconstructed symbol at (x, xi).
    pub fn reconstruct_at(&self, symbol: &Symbol, x: usize, xi: f64) -> Complex64 {
        let mut acc = self.tau(symbol, x, xi);
        let two_pi = 2.0 * std::f64::consts::PI;
        for (i, &t) in self.t_grid.iter().enumerate() {
            let w = self.partition.psi_tilde(t * xi);
            if w == 0.0 {
                continue;
            }
            let gm = &self.gammas[i];
            let mut sum = Complex64::new(0.0, 0.0);
            for li in 0..(2 * self.l_max + 1) {
                let l = li as i64 - self.l_max as i64;
                let phase = Complex64::from_polar(1.0, two_pi * l as f64 * t * xi);
                sum += gm[[li, x]] * phase;
            }
            acc += sum * (w * self.log_weight);
        }
        acc
    }

    /// Sup over all points and probe frequencies of |reconstruction - sigma|.
    pub fn reconstruction_residual(&self, symbol: &Symbol, probe: &[f64]) -> f64 {
        let n = self.gammas.first().map(|g| g.ncols()).unwrap_or(0);
        let mut worst = 0.0f64;
        for &xi in probe {
            for x in 0..n {
                let err = (self.reconstruct_at(symbol, x, xi) - symbol.eval(x, xi)).norm();
                worst = worst.max(err);
            }
        }
        worst
    }

    /// sup over scales, points, and sign of |gamma_{+-l, t}(x)| per l.
    pub fn gamma_sup_by_l(&self) -> Vec<f64> {
        let mut sup = vec![0.0f64; self.l_max + 1];
        for gm in &self.gammas {
            for li in 0..(2 * self.l_max + 1) {
                let l = (li as i64 - self.l_max as i64).unsigned_abs() as usize;
                for v in gm.row(li) {
                    sup[l] = sup[l].max(v.norm());
                }
            }
        }
        sup
    }

    /// Fit of ln sup_l |gamma| against ln(1 + l); the slope estimates the
    /// polynomial decay order of the coefficient family.
    pub fn gamma_decay_fit(&self) -> LinFit {
        let sup = self.gamma_sup_by_l();
        let pts: Vec<(f64, f64)> = sup
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-300)
            .map(|(l, &v)| ((1.0 + l as f64).ln(), v.ln()))
            .collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        linfit(&xs, &ys)
    }
}

/// Probe grid for reconstruction checks: the operator's distinct eigenvalues
/// together with a log grid across the band.
pub fn default_probe(sd: &SpectralData, n_extra: usize) -> Vec<f64> {
    let mut probe: Vec<f64> = Vec::new();
    for &l in sd.eigenvalues.iter() {
        if probe.last().map(|&p: &f64| (l - p).abs() > 1e-9 * l.max(1.0)).unwrap_or(true) {
            probe.push(l);
        }
    }
    let lam_max = sd.lambda_max();
    let lo = sd
        .eigenvalues
        .iter()
        .find(|&&l| l > 1e-12)
        .map(|&l| (l * 0.5).max(1e-3))
        .unwrap_or(1e-3);
    if n_extra >= 2 && lam_max > lo {
        probe.extend(crate::calculus::log_grid(lo, lam_max, n_extra));
    }
    probe.sort_by(f64::total_cmp);
    probe
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{eigendecompose, graph_laplacian};
    use crate::space::{MeasureKind, MetricMeasureSpace, SpaceSpec};
    use proptest::prelude::*;

    fn cycle(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::build(SpaceSpec::Cycle { n }, MeasureKind::Counting).unwrap()
    }

    #[test]
    fn parser_precedence_and_unary() {
        let e = parse_expr("2+3*4^2").unwrap();
        assert_eq!(e.eval(&[], 0.0), 50.0);
        assert_eq!(parse_expr("-2^2").unwrap().eval(&[], 0.0), -4.0);
        assert_eq!(parse_expr("2^-1").unwrap().eval(&[], 0.0), 0.5);
        assert_eq!(parse_expr("2^3^2").unwrap().eval(&[], 0.0), 512.0);
        assert_eq!(parse_expr("6/3/2").unwrap().eval(&[], 0.0), 1.0);
        assert_eq!(parse_expr("1 - 2 - 3").unwrap().eval(&[], 0.0), -4.0);
        assert_eq!(parse_expr("--3").unwrap().eval(&[], 0.0), 3.0);
    }

    #[test]
    fn parser_functions_and_features() {
        let e = parse_expr("min(xi, 2) + max(x0, x1) * cos(0)").unwrap();
        assert_eq!(e.eval(&[5.0, -1.0], 7.0), 2.0 + 5.0);
        assert_eq!(e.max_feature(), Some(1));
        let e = parse_expr("exp(log(xi))").unwrap();
        assert!((e.eval(&[], 3.7) - 3.7).abs() < 1e-15);
        assert_eq!(parse_expr("x12").unwrap(), Expr::Feature(12));
    }

    #[test]
    fn parser_errors_carry_byte_offsets() {
        let err = parse_expr("1 + ").unwrap_err();
        assert_eq!(err.offset, 4);
        let err = parse_expr("2 * foo(3)").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.message.contains("foo"));
        let err = parse_expr("sin(1, 2)").unwrap_err();
        assert_eq!(err.offset, 8);
        assert!(err.message.contains("1 argument"));
        let err = parse_expr("(1 + 2").unwrap_err();
        assert_eq!(err.offset, 6);
        let err = parse_expr("1 @ 2").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = parse_expr("1 2").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.message.contains("trailing"));
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(parse_expr("1.5e2").unwrap().eval(&[], 0.0), 150.0);
        assert_eq!(parse_expr("2e-3").unwrap().eval(&[], 0.0), 0.002);
        // 'e' not followed by digits is not an exponent
        assert!(parse_expr("2e").is_err());
    }

    #[test]
    fn symbol_feature_validation() {
        let s = cycle(8);
        assert!(Symbol::from_expr_str("x0 + x1", &s, SymbolClass::order_zero()).is_ok());
        let err = Symbol::from_expr_str("x2", &s, SymbolClass::order_zero()).unwrap_err();
        assert!(err.to_string().contains("x2"));
    }

    #[test]
    fn gamma_against_independent_quadrature() {
        // Oracle: dense trapezoid integration of
        // t * int_{1/t}^{2/t} sigma(eta) psi(t eta) e^{-2 pi i l t eta} d eta.
        // The integrand vanishes at both endpoints, so the trapezoid rule
        // converges spectrally; 4096 nodes is far beyond 1e-10.
        // l_max = 20 gives 84 grid nodes, putting the nearest alias of the
        // low modes beyond 1e-10; the DFT then matches the continuous
        // coefficient to the quadrature's own accuracy.
        let s = cycle(16);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let sym = Symbol::from_expr_str("xi / (1 + xi)", &s, SymbolClass::order_zero()).unwrap();
        let part = PartitionOfUnity::default();
        let dec = decompose(&sym, &sd, part, 20, 8).unwrap();
        let sigma = |eta: f64| eta / (1.0 + eta);
        for (i, &t) in dec.t_grid.iter().enumerate().take(6) {
            for l in [-3i64, 0, 2] {
                let m = 4096usize;
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..=m {
                    let eta = (1.0 + j as f64 / m as f64) / t;
                    let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                    let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * l as f64 * t * eta);
                    acc += phase * (sigma(eta) * part.psi(t * eta) * w);
                }
                acc *= Complex64::new(t * (1.0 / (t * m as f64)), 0.0); // t * d eta
                let got = dec.gammas[i][[(l + 20) as usize, 0]];
                assert!(
                    (got - acc).norm() < 1e-9,
                    "t={t} l={l}: dft {got} vs quad {acc}"
                );
            }
        }
    }

    #[test]
    fn gamma_factorizes_for_separable_symbols() {
        let s = cycle(12);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let part = PartitionOfUnity::default();
        let full = Symbol::from_expr_str("x0 * xi / (1 + xi)", &s, SymbolClass::order_zero()).unwrap();
        let freq = Symbol::from_expr_str("xi / (1 + xi)", &s, SymbolClass::order_zero()).unwrap();
        let d_full = decompose(&full, &sd, part, 3, 8).unwrap();
        let d_freq = decompose(&freq, &sd, part, 3, 8).unwrap();
        for i in 0..d_full.t_grid.len() {
            for li in 0..7 {
                for x in 0..12 {
                    let a = d_full.gammas[i][[li, x]];
                    let b = d_freq.gammas[i][[li, x]] * s.features[x][0];
                    assert!((a - b).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn reconstruction_residual_small_on_band() {
        let s = cycle(64);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let sym = Symbol::from_expr_str("1 + 0.5 * x0 * xi / (1 + xi)", &s, SymbolClass::order_zero()).unwrap();
        let dec = decompose(&sym, &sd, PartitionOfUnity::default(), 16, 32).unwrap();
        let probe = default_probe(&sd, 48);
        let res = dec.reconstruction_residual(&sym, &probe);
        assert!(res < 2e-3, "residual = {res}");
        // decay of the coefficient family
        let fit = dec.gamma_decay_fit();
        assert!(fit.slope < -3.0, "slope = {}", fit.slope);
    }

    #[test]
    fn seminorm_of_sqrt_weight_closed_form() {
        // sigma = (1+xi)^{1/2} in S^1_{1,0} with m = 2:
        // weighted sups are exactly 1, 1/2, 1/4 for beta = 0, 1, 2
        let s = cycle(10);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let sym = Symbol::from_expr_str("(1 + xi)^0.5", &s, SymbolClass { s: 1.0, rho: 1.0, delta: 0.0 }).unwrap();
        let probe = crate::calculus::log_grid(1e-2, 1e3, 128);
        let table = seminorm(&sym, &sd, 2.0, &[0.0, 1.0], 2, &probe).unwrap();
        assert!((table.values[[0, 0]] - 1.0).abs() < 1e-6);
        assert!((table.values[[0, 1]] - 0.5).abs() < 1e-6);
        assert!((table.values[[0, 2]] - 0.25).abs() < 1e-5);
        // x-independent symbol: all positive-alpha rows vanish
        assert!(table.values[[1, 0]] < 1e-9);
        assert!(table.values[[1, 1]] < 1e-9);
    }

    #[test]
    fn seminorm_alpha_row_matches_eigenvector_symbol() {
        // sigma(x, xi) = cos(theta_x) is a Laplacian eigenvector in x:
        // Delta^alpha sigma = lambda_1^alpha sigma exactly
        let s = cycle(20);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let lam1 = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / 20.0).cos();
        let sym = Symbol::from_expr_str("x0", &s, SymbolClass::order_zero()).unwrap();
        let probe = [1.0];
        let table = seminorm(&sym, &sd, 2.0, &[0.0, 1.0, 2.0], 0, &probe).unwrap();
        assert!((table.values[[0, 0]] - 1.0).abs() < 1e-9);
        assert!((table.values[[1, 0]] - lam1).abs() < 1e-7);
        assert!((table.values[[2, 0]] - lam1 * lam1).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn parse_eval_matches_reference(a in -3.0f64..3.0, b in 0.1f64..5.0, xi in 0.0f64..10.0) {
            let src = format!("{a} + {b} * xi / (1 + xi) - sin({b}) ^ 2");
            let e = parse_expr(&src).unwrap();
            let expect = a + b * xi / (1.0 + xi) - b.sin() * b.sin();
            prop_assert!((e.eval(&[], xi) - expect).abs() < 1e-12);
        }
    }
}
