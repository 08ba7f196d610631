//! CPLEX LP text format, the subset with `Maximize`, `Subject To`,
//! `Bounds`, `Generals` and `End`.
//!
//! Numbers are written as decimals when that is exact. Otherwise the row
//! is multiplied by the least common multiple of its denominators; for the
//! objective the factor is recorded in a `\ objective scaled by K` comment
//! that [`parse_lp`] divides back out, and likewise `\ row <name> scaled
//! by K` for constraints. A bound that is not an exact
//! decimal becomes a single-term row named `bound_lo_<var>` or
//! `bound_hi_<var>`, which the parser folds back into the bound.
//!
//! Names must already be valid LP identifiers; the models built in this
//! crate only use ASCII letters, digits and `_`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{MilpModel, Rational, Relation, VarId, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;
const SCALE_COMMENT: &str = "\\ objective scaled by ";
const ROW_COMMENT: &str = "\\ row ";
const BOUND_LO: &str = "bound_lo_";
const BOUND_HI: &str = "bound_hi_";

/// Writes the model in LP format.
pub fn export_lp<W: io::Write>(model: &MilpModel, sink: &mut W) -> io::Result<()> {
    sink.write_all(to_lp_string(model).as_bytes())
}

pub fn to_lp_string(model: &MilpModel) -> String {
    let name = |v: VarId| model.var(v).name.as_str();
    let mut out = String::new();

    out.push_str("Maximize\n");
    let (scale, coefs) = scale_row(model.objective().iter().map(|(_, a)| a), None);
    if let Some(k) = &scale {
        let _ = writeln!(out, "{SCALE_COMMENT}{k}");
    }
    out.push_str(" obj:");
    write_terms(&mut out, model.objective().iter().map(|(v, _)| name(*v)).zip(&coefs.0));
    out.push('\n');

    out.push_str("Subject To\n");
    for c in model.constraints() {
        let (scale, (coefs, rhs)) = scale_row(c.terms.iter().map(|(_, a)| a), Some(&c.rhs));
        if let Some(k) = &scale {
            let _ = writeln!(out, "{ROW_COMMENT}{} scaled by {k}", c.name);
        }
        let _ = write!(out, " {}:", c.name);
        write_lhs(&mut out, model, c.terms.iter().map(|(v, _)| name(*v)).zip(&coefs));
        let _ = writeln!(out, " {} {}", c.relation.symbol(), rhs.expect("row has a rhs"));
    }
    let mut bounds = String::new();
    for v in model.vars() {
        let lo = decimal(&v.lower);
        let hi = v.upper.as_ref().map(|u| (decimal(u), u));
        if lo.is_none() {
            let (_, (_, rhs)) = scale_row(std::iter::once(&Rational::one()), Some(&v.lower));
            let k = v.lower.denom();
            let _ = writeln!(out, " {BOUND_LO}{}: {k} {} >= {}", v.name, v.name, rhs.unwrap());
        }
        if let Some((None, u)) = &hi {
            let (_, (_, rhs)) = scale_row(std::iter::once(&Rational::one()), Some(u));
            let k = u.denom();
            let _ = writeln!(out, " {BOUND_HI}{}: {k} {} <= {}", v.name, v.name, rhs.unwrap());
        }
        match (lo, hi) {
            (Some(lo), Some((Some(hi), _))) => writeln!(bounds, " {lo} <= {} <= {hi}", v.name),
            (Some(lo), _) => writeln!(bounds, " {} >= {lo}", v.name),
            (None, Some((Some(hi), _))) => writeln!(bounds, " -inf <= {} <= {hi}", v.name),
            (None, _) => writeln!(bounds, " {} free", v.name),
        }
        .expect("writing to a String");
    }
    out.push_str("Bounds\n");
    out.push_str(&bounds);

    let ints: Vec<&str> = model.vars().iter().filter(|v| v.kind == VarKind::Integer).map(|v| v.name.as_str()).collect();
    if !ints.is_empty() {
        out.push_str("Generals\n");
        for chunk in ints.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

fn write_lhs<'a>(out: &mut String, model: &MilpModel, terms: impl Iterator<Item = (&'a str, &'a String)>) {
    let before = out.len();
    write_terms(out, terms);
    if out.len() == before {
        // an empty left-hand side still needs a variable for other readers
        match model.vars().first() {
            Some(v) => {
                let _ = write!(out, " 0 {}", v.name);
            }
            None => out.push_str(" 0"),
        }
    }
}

fn write_terms<'a>(out: &mut String, terms: impl Iterator<Item = (&'a str, &'a String)>) {
    let mut count = 0;
    for (name, coef) in terms {
        if coef == "0" {
            continue;
        }
        if count > 0 && count % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        match coef.strip_prefix('-') {
            Some(abs) => {
                let _ = write!(out, " - {abs} {name}");
            }
            None => {
                let _ = write!(out, " + {coef} {name}");
            }
        }
        count += 1;
    }
}

/// Exact decimal rendering, if the denominator has no prime factor other
/// than 2 and 5.
pub fn decimal(x: &Rational) -> Option<String> {
    let mut den = x.denom().clone();
    let (mut twos, mut fives) = (0u32, 0u32);
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let digits = twos.max(fives);
    let scaled = x.numer() * num_traits::pow(BigInt::from(10), digits as usize) / x.denom();
    if digits == 0 {
        return Some(scaled.to_string());
    }
    let neg = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    while s.len() <= digits as usize {
        s.insert(0, '0');
    }
    s.insert(s.len() - digits as usize, '.');
    Some(if neg { format!("-{s}") } else { s })
}

type Rendered = (Vec<String>, Option<String>);

/// Renders a row's coefficients and rhs, scaling to integers when some
/// number is not an exact decimal. Returns the factor used, if any.
fn scale_row<'a>(coefs: impl Iterator<Item = &'a Rational>, rhs: Option<&'a Rational>) -> (Option<BigInt>, Rendered) {
    let coefs: Vec<&Rational> = coefs.collect();
    let all = coefs.iter().copied().chain(rhs);
    let exact: Option<Vec<String>> = all.clone().map(decimal).collect();
    if let Some(mut parts) = exact {
        let rhs = rhs.map(|_| parts.pop().expect("rhs rendered"));
        return (None, (parts, rhs));
    }
    let k = all.fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let kr = Rational::from_integer(k.clone());
    let render = |x: &Rational| (x * &kr).to_integer().to_string();
    (Some(k), (coefs.iter().map(|x| render(x)).collect(), rhs.map(render)))
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Colon,
    Plus,
    Minus,
    Rel(Relation),
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_!\"#$%&()/,.;?@`'{}|~[]".contains(c)
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < chars.len() && "<>=".contains(chars[j]) {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let rel = match op.as_str() {
                "<" | "<=" | "=<" => Relation::Le,
                ">" | ">=" | "=>" => Relation::Ge,
                "=" | "==" => Relation::Eq,
                _ => return Err(Error::Parse(format!("unknown operator `{op}`"))),
            };
            toks.push(Tok::Rel(rel));
            i = j;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mantissa: String = chars[start..i].iter().collect();
            let mut exp = 0i64;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                let neg = j < chars.len() && chars[j] == '-';
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                let ds = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j > ds {
                    let digits: String = chars[ds..j].iter().collect();
                    exp = digits.parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?;
                    if neg {
                        exp = -exp;
                    }
                    i = j;
                }
            }
            toks.push(Tok::Num(parse_decimal(&mantissa, exp)?));
        } else if is_ident_char(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(toks)
}

fn parse_decimal(mantissa: &str, exp: i64) -> Result<Rational> {
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac.contains('.') {
        return Err(Error::Parse(format!("malformed number `{mantissa}`")));
    }
    let digits: BigInt =
        format!("{int}{frac}").parse().map_err(|_| Error::Parse(format!("malformed number `{mantissa}`")))?;
    let shift = exp - frac.len() as i64;
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, shift.unsigned_abs().to_usize().unwrap_or(usize::MAX));
    Ok(if shift >= 0 { Rational::from_integer(digits * pow) } else { Rational::new(digits, pow) })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    Done,
}

fn section_of(line: &str) -> Option<(Section, bool)> {
    match line.trim().to_ascii_lowercase().as_str() {
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, false)),
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, true)),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some((Section::Constraints, false)),
        "bounds" | "bound" => Some((Section::Bounds, false)),
        "generals" | "general" | "gen" | "integers" => Some((Section::Generals, false)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, false)),
        "end" => Some((Section::Done, false)),
        _ => None,
    }
}

struct Builder {
    names: HashMap<String, usize>,
    vars: Vec<(String, VarKind, Option<Rational>, Option<Rational>)>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.names.get(name) {
            return i;
        }
        self.vars.push((name.to_string(), VarKind::Fractional, Some(Rational::zero()), None));
        self.names.insert(name.to_string(), self.vars.len() - 1);
        self.vars.len() - 1
    }
}

struct Cursor {
    toks: Vec<Tok>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn at_label(&self) -> bool {
        matches!((self.peek(), self.peek2()), (Some(Tok::Ident(_)), Some(Tok::Colon)))
    }

    fn label(&mut self) -> Option<String> {
        if self.at_label() {
            let Some(Tok::Ident(name)) = self.next() else { unreachable!() };
            self.next();
            Some(name)
        } else {
            None
        }
    }

    /// `[+|-] num`, or `inf` / `infinity` as `None`.
    fn signed_number(&mut self) -> Result<Option<Rational>> {
        let mut neg = false;
        while let Some(Tok::Plus | Tok::Minus) = self.peek() {
            neg ^= self.next() == Some(Tok::Minus);
        }
        match self.next() {
            Some(Tok::Num(x)) => Ok(Some(if neg { -x } else { x })),
            Some(Tok::Ident(s)) if is_infinity(&s) => {
                if neg {
                    Ok(None)
                } else {
                    Err(Error::Parse("+inf is only allowed as an upper bound".into()))
                }
            }
            other => Err(Error::Parse(format!("expected a number, found {other:?}"))),
        }
    }

    /// Linear expression up to a relation, a label or the end.
    fn expression(&mut self, b: &mut Builder) -> Result<Vec<(usize, Rational)>> {
        let mut terms = Vec::new();
        loop {
            if self.at_label() || matches!(self.peek(), None | Some(Tok::Rel(_))) {
                return Ok(terms);
            }
            let mut sign = Rational::one();
            while let Some(Tok::Plus | Tok::Minus) = self.peek() {
                if self.next() == Some(Tok::Minus) {
                    sign = -sign;
                }
            }
            let coef = match self.peek() {
                Some(Tok::Num(x)) => {
                    let x = x.clone();
                    self.next();
                    x
                }
                _ => Rational::one(),
            };
            match self.next() {
                Some(Tok::Ident(name)) => terms.push((b.var(&name), sign * coef)),
                other => return Err(Error::Parse(format!("expected a variable, found {other:?}"))),
            }
        }
    }
}

fn is_infinity(s: &str) -> bool {
    matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity")
}

/// Parses LP text into a model. Minimization objectives are negated.
pub fn parse_lp(text: &str) -> Result<MilpModel> {
    let mut scale = Rational::one();
    let mut row_scale: HashMap<String, Rational> = HashMap::new();
    let mut sections: Vec<(Section, String)> = Vec::new();
    let mut minimize = false;
    let mut current: Option<Section> = None;
    for line in text.lines() {
        if let Some(k) = line.trim_start().strip_prefix(SCALE_COMMENT.trim_start()) {
            let k: BigInt = k.trim().parse().map_err(|_| Error::Parse(format!("bad objective scale `{k}`")))?;
            if k.is_zero() {
                return Err(Error::Parse("objective scale must be nonzero".into()));
            }
            scale = Rational::from_integer(k);
            continue;
        }
        if let Some(rest) = line.trim_start().strip_prefix(ROW_COMMENT.trim_start()) {
            if let Some((name, k)) = rest.split_once(" scaled by ") {
                let k: BigInt = k.trim().parse().map_err(|_| Error::Parse(format!("bad row scale `{k}`")))?;
                if !k.is_positive() {
                    return Err(Error::Parse("row scale must be positive".into()));
                }
                row_scale.insert(name.trim().to_string(), Rational::from_integer(k));
                continue;
            }
        }
        let line = line.split('\\').next().unwrap_or("");
        if let Some((s, min)) = section_of(line) {
            if s == Section::Objective {
                minimize = min;
            }
            current = Some(s);
            sections.push((s, String::new()));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match (current, sections.last_mut()) {
            (Some(Section::Done), _) => return Err(Error::Parse("text after End".into())),
            (Some(_), Some((_, body))) => {
                body.push_str(line);
                body.push('\n');
            }
            _ => return Err(Error::Parse("content before the objective section".into())),
        }
    }
    if current != Some(Section::Done) {
        return Err(Error::Parse("missing End".into()));
    }

    let mut b = Builder { names: HashMap::new(), vars: Vec::new() };
    let mut objective = Vec::new();
    let mut rows: Vec<(String, Vec<(usize, Rational)>, Relation, Rational)> = Vec::new();
    for (section, body) in sections {
        let mut cur = Cursor { toks: tokenize(&body)?, pos: 0 };
        match section {
            Section::Objective => {
                cur.label();
                objective = cur.expression(&mut b)?;
                if cur.peek().is_some() {
                    return Err(Error::Parse("trailing tokens in the objective".into()));
                }
            }
            Section::Constraints => {
                while cur.peek().is_some() {
                    let name = cur.label().unwrap_or_else(|| format!("R{}", rows.len() + 1));
                    let terms = cur.expression(&mut b)?;
                    let Some(Tok::Rel(rel)) = cur.next() else {
                        return Err(Error::Parse(format!("constraint `{name}` has no relation")));
                    };
                    let rhs = cur
                        .signed_number()?
                        .ok_or_else(|| Error::Parse(format!("constraint `{name}` has an infinite rhs")))?;
                    match row_scale.get(&name) {
                        Some(k) => rows.push((
                            name.clone(),
                            terms.into_iter().map(|(v, a)| (v, a / k)).collect(),
                            rel,
                            rhs / k,
                        )),
                        None => rows.push((name, terms, rel, rhs)),
                    }
                }
            }
            Section::Bounds => parse_bounds(&mut cur, &mut b)?,
            Section::Generals | Section::Binaries => {
                while let Some(tok) = cur.next() {
                    let Tok::Ident(name) = tok else {
                        return Err(Error::Parse(format!("expected a variable name, found {tok:?}")));
                    };
                    let i = b.var(&name);
                    b.vars[i].1 = VarKind::Integer;
                    if section == Section::Binaries {
                        b.vars[i].2 = Some(Rational::zero());
                        b.vars[i].3 = Some(Rational::one());
                    }
                }
            }
            Section::Done => {}
        }
    }

    // fold single-term bound rows back into bounds
    rows.retain(|(name, terms, rel, rhs)| {
        let (target, is_lo) = match (name.strip_prefix(BOUND_LO), name.strip_prefix(BOUND_HI)) {
            (Some(t), _) => (t, true),
            (_, Some(t)) => (t, false),
            _ => return true,
        };
        let [(v, a)] = terms.as_slice() else { return true };
        if b.vars[*v].0 != target || !a.is_positive() || *rel != if is_lo { Relation::Ge } else { Relation::Le } {
            return true;
        }
        let value = rhs / a;
        if is_lo {
            b.vars[*v].2 = Some(value);
        } else {
            b.vars[*v].3 = Some(value);
        }
        false
    });

    let mut model = MilpModel::new();
    for (name, kind, lower, upper) in &b.vars {
        let lower =
            lower.clone().ok_or_else(|| Error::Parse(format!("variable `{name}` has no finite lower bound")))?;
        model.add_var(name.clone(), *kind, lower, upper.clone());
    }
    for (name, terms, rel, rhs) in rows {
        model.add_constraint(name, terms.into_iter().map(|(v, a)| (VarId(v), a)).collect(), rel, rhs);
    }
    let sign = if minimize { -Rational::one() } else { Rational::one() };
    model.set_objective(objective.into_iter().map(|(v, a)| (VarId(v), a / &scale * &sign)).collect());
    model.validate()?;
    Ok(model)
}

fn parse_bounds(cur: &mut Cursor, b: &mut Builder) -> Result<()> {
    while let Some(tok) = cur.peek().cloned() {
        let leading_value = match &tok {
            Tok::Num(_) | Tok::Plus | Tok::Minus => true,
            Tok::Ident(s) => is_infinity(s),
            _ => false,
        };
        if leading_value {
            // value rel var [rel value]
            let value = cur.signed_number()?;
            let Some(Tok::Rel(rel)) = cur.next() else {
                return Err(Error::Parse("bound without a relation".into()));
            };
            let Some(Tok::Ident(name)) = cur.next() else {
                return Err(Error::Parse("bound without a variable".into()));
            };
            let i = b.var(&name);
            apply_bound(b, i, rel.flip(), value)?;
            if let Some(Tok::Rel(rel)) = cur.peek().cloned() {
                cur.next();
                let value = upper_value(cur)?;
                apply_bound(b, i, rel, value)?;
            }
            continue;
        }
        let Some(Tok::Ident(name)) = cur.next() else {
            return Err(Error::Parse(format!("unexpected {tok:?} in bounds")));
        };
        let i = b.var(&name);
        match cur.next() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("free") => {
                b.vars[i].2 = None;
                b.vars[i].3 = None;
            }
            Some(Tok::Rel(rel)) => {
                let value = if rel == Relation::Le { upper_value(cur)? } else { cur.signed_number()? };
                apply_bound(b, i, rel, value)?;
            }
            other => return Err(Error::Parse(format!("unexpected {other:?} after `{name}` in bounds"))),
        }
    }
    Ok(())
}

/// Like `signed_number`, but `+inf` is accepted and means no bound.
fn upper_value(cur: &mut Cursor) -> Result<Option<Rational>> {
    if let Some(Tok::Plus) = cur.peek() {
        cur.next();
    }
    if let Some(Tok::Ident(s)) = cur.peek() {
        if is_infinity(s) {
            cur.next();
            return Ok(None);
        }
    }
    cur.signed_number()
}

/// Applies `var rel value`; `None` stands for an infinite value.
fn apply_bound(b: &mut Builder, i: usize, rel: Relation, value: Option<Rational>) -> Result<()> {
    let v = &mut b.vars[i];
    match rel {
        Relation::Le => v.3 = value,
        Relation::Ge => v.2 = value,
        Relation::Eq => {
            let value = value.ok_or_else(|| Error::Parse(format!("`{}` fixed to infinity", v.0)))?;
            v.2 = Some(value.clone());
            v.3 = Some(value);
        }
    }
    Ok(())
}

impl Relation {
    fn flip(self) -> Relation {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }
}
