//! Polynomial state machines `(S', Y) = f(S, X)` with vector-valued state,
//! command and output.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boolfunc::{boolean_to_polynomial, TruthTable};
use crate::error::{Error, Result};
use crate::field::{Fe, Field};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Fe,
    /// Exponent of each variable, state coordinates first, then command.
    pub exps: Vec<u32>,
}

impl Term {
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// Sparse multivariate polynomial over `nvars` variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polynomial {
    field: Field,
    nvars: usize,
    terms: Vec<Term>,
}

impl Polynomial {
    /// Like terms are merged and zero terms dropped.
    pub fn new(field: Field, nvars: usize, terms: impl IntoIterator<Item = Term>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u32>, Fe> = BTreeMap::new();
        for t in terms {
            if t.exps.len() != nvars {
                return Err(Error::Domain(format!("term has {} exponents, expected {nvars}", t.exps.len())));
            }
            if t.coeff.field() != field {
                return Err(Error::MixedFields);
            }
            let slot = merged.entry(t.exps).or_insert(field.zero());
            *slot = slot.try_add(t.coeff)?;
        }
        let terms = merged.into_iter().filter(|(_, c)| !c.is_zero()).map(|(exps, coeff)| Term { coeff, exps }).collect();
        Ok(Polynomial { field, nvars, terms })
    }

    /// The variable with index `i`.
    pub fn var(field: Field, nvars: usize, i: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[i] = 1;
        Polynomial { field, nvars, terms: vec![Term { coeff: field.one(), exps }] }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.iter().map(Term::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, vars: &[Fe]) -> Fe {
        debug_assert_eq!(vars.len(), self.nvars);
        let mut acc: Option<Fe> = None;
        for t in &self.terms {
            let mut v: Option<Fe> = None;
            for (&x, &e) in vars.iter().zip(&t.exps) {
                for _ in 0..e {
                    v = Some(match v {
                        Some(p) => p * x,
                        None => x,
                    });
                }
            }
            let term = match v {
                Some(p) if t.coeff.is_one() => p,
                Some(p) => t.coeff * p,
                None => t.coeff,
            };
            acc = Some(match acc {
                Some(a) => a + term,
                None => term,
            });
        }
        acc.unwrap_or(self.field.zero())
    }
}

/// `f` as one polynomial per next-state coordinate and per output
/// coordinate, over the variables `(s_0.., x_0..)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionFunction {
    name: String,
    field: Field,
    state_dim: usize,
    command_dim: usize,
    next_state: Vec<Polynomial>,
    outputs: Vec<Polynomial>,
}

impl TransitionFunction {
    pub fn new(
        name: impl Into<String>,
        field: Field,
        state_dim: usize,
        command_dim: usize,
        next_state: Vec<Polynomial>,
        outputs: Vec<Polynomial>,
    ) -> Result<Self> {
        if state_dim == 0 || next_state.len() != state_dim {
            return Err(Error::Domain(format!("need {state_dim} > 0 next-state polynomials, got {}", next_state.len())));
        }
        let nvars = state_dim + command_dim;
        if let Some(p) = next_state.iter().chain(&outputs).find(|p| p.nvars != nvars || p.field != field) {
            return Err(Error::Domain(format!("coordinate polynomial over {} variables, expected {nvars}", p.nvars)));
        }
        Ok(TransitionFunction { name: name.into(), field, state_dim, command_dim, next_state, outputs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn command_dim(&self) -> usize {
        self.command_dim
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    /// Length of the joint evaluation vector `(S', Y)`.
    pub fn joint_dim(&self) -> usize {
        self.state_dim + self.outputs.len()
    }

    pub fn next_state_polys(&self) -> &[Polynomial] {
        &self.next_state
    }

    pub fn output_polys(&self) -> &[Polynomial] {
        &self.outputs
    }

    /// Maximum total degree over all coordinates, at least 1.
    pub fn total_degree(&self) -> usize {
        self.next_state.iter().chain(&self.outputs).map(Polynomial::total_degree).max().unwrap_or(0).max(1) as usize
    }

    fn check_dims(&self, s: &[Fe], x: &[Fe]) -> Result<()> {
        if s.len() != self.state_dim || x.len() != self.command_dim {
            return Err(Error::Domain(format!(
                "expected state of {} and command of {} coordinates, got {} and {}",
                self.state_dim,
                self.command_dim,
                s.len(),
                x.len()
            )));
        }
        if s.iter().chain(x).any(|v| v.field() != self.field) {
            return Err(Error::MixedFields);
        }
        Ok(())
    }

    /// Next-state coordinates followed by output coordinates.
    pub fn eval_joint(&self, s: &[Fe], x: &[Fe]) -> Result<Vec<Fe>> {
        self.check_dims(s, x)?;
        let vars: Vec<Fe> = s.iter().chain(x).copied().collect();
        Ok(self.next_state.iter().chain(&self.outputs).map(|p| p.eval(&vars)).collect())
    }

    pub fn apply(&self, s: &[Fe], x: &[Fe]) -> Result<(Vec<Fe>, Vec<Fe>)> {
        let joint = self.eval_joint(s, x)?;
        Ok(self.split_joint(&joint))
    }

    pub fn split_joint(&self, joint: &[Fe]) -> (Vec<Fe>, Vec<Fe>) {
        (joint[..self.state_dim].to_vec(), joint[self.state_dim..].to_vec())
    }

    /// `S' = S + X`, `Y = S + X`.
    pub fn bank(field: Field) -> Self {
        let sum = Polynomial::var(field, 2, 0);
        let sum = Polynomial::new(field, 2, sum.terms.into_iter().chain(Polynomial::var(field, 2, 1).terms)).unwrap();
        Self::new("bank", field, 1, 1, vec![sum.clone()], vec![sum]).unwrap()
    }

    /// `S' = S X`, `Y = S X`.
    pub fn product(field: Field) -> Self {
        let prod = Polynomial::new(field, 2, [Term { coeff: field.one(), exps: vec![1, 1] }]).unwrap();
        Self::new("product", field, 1, 1, vec![prod.clone()], vec![prod]).unwrap()
    }

    /// State `(s0, s1)`, command `x0`:
    /// `s0' = s0^2 + s1 x0 + x0`, `s1' = s0 + x0^2`, `y0 = s0 s1 + x0`.
    pub fn quadratic_mix(field: Field) -> Self {
        let t = |exps: [u32; 3]| Term { coeff: field.one(), exps: exps.to_vec() };
        let s0 = Polynomial::new(field, 3, [t([2, 0, 0]), t([0, 1, 1]), t([0, 0, 1])]).unwrap();
        let s1 = Polynomial::new(field, 3, [t([1, 0, 0]), t([0, 0, 2])]).unwrap();
        let y0 = Polynomial::new(field, 3, [t([1, 1, 0]), t([0, 0, 1])]).unwrap();
        Self::new("quadratic-mix", field, 2, 1, vec![s0, s1], vec![y0]).unwrap()
    }

    /// `S' = S`, `Y = S`.
    pub fn fixed_point(field: Field) -> Self {
        let s = Polynomial::var(field, 2, 0);
        Self::new("fixed-point", field, 1, 1, vec![s.clone()], vec![s]).unwrap()
    }

    /// Each coordinate given by a truth table over the bits `(s.., x..)`,
    /// converted to its `F_2` polynomial and read over `GF(2^m)`.
    pub fn from_boolean(
        name: impl Into<String>,
        field: Field,
        state_dim: usize,
        command_dim: usize,
        next_state: &[TruthTable],
        outputs: &[TruthTable],
    ) -> Result<Self> {
        if !field.is_binary() {
            return Err(Error::Config(format!("Boolean machines need a binary extension field, got {field}")));
        }
        let nvars = state_dim + command_dim;
        let convert = |t: &TruthTable| -> Result<Polynomial> {
            if t.arity() != nvars {
                return Err(Error::Domain(format!("truth table of arity {} for {nvars} variables", t.arity())));
            }
            let p = boolean_to_polynomial(t);
            let terms = p.monomials().map(|m| Term {
                coeff: field.one(),
                exps: (0..nvars).map(|i| (m >> i & 1) as u32).collect(),
            });
            Polynomial::new(field, nvars, terms)
        };
        let ns = next_state.iter().map(convert).collect::<Result<Vec<_>>>()?;
        let out = outputs.iter().map(convert).collect::<Result<Vec<_>>>()?;
        Self::new(name, field, state_dim, command_dim, ns, out)
    }

    /// Two-bit counter: state `(b0, b1)`, command `inc`, output the carry.
    pub fn boolean_counter(field: Field) -> Result<Self> {
        let table = |f: fn(u8, u8, u8) -> u8| TruthTable::from_fn(3, |a| f(a[0], a[1], a[2])).unwrap();
        Self::from_boolean(
            "counter",
            field,
            2,
            1,
            &[table(|b0, _, inc| b0 ^ inc), table(|b0, b1, inc| b1 ^ (b0 & inc))],
            &[table(|b0, b1, inc| b0 & b1 & inc)],
        )
    }

    /// Plain-text form; see [`TransitionFunction::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("name {}\nstate {}\ncommand {}\noutput {}\n", self.name, self.state_dim, self.command_dim, self.output_dim());
        let var = |i: usize| if i < self.state_dim { format!("s{i}") } else { format!("x{}", i - self.state_dim) };
        let fmt_poly = |p: &Polynomial| -> String {
            if p.terms.is_empty() {
                return "0".into();
            }
            p.terms
                .iter()
                .map(|t| {
                    let mut parts = vec![t.coeff.value().to_string()];
                    for (i, &e) in t.exps.iter().enumerate() {
                        match e {
                            0 => {}
                            1 => parts.push(var(i)),
                            _ => parts.push(format!("{}^{e}", var(i))),
                        }
                    }
                    parts.join("*")
                })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        for (i, p) in self.next_state.iter().enumerate() {
            out += &format!("s{i} = {}\n", fmt_poly(p));
        }
        for (i, p) in self.outputs.iter().enumerate() {
            out += &format!("y{i} = {}\n", fmt_poly(p));
        }
        out
    }

    /// Parse a machine description:
    ///
    /// ```text
    /// name mix
    /// state 2
    /// command 1
    /// output 1
    /// s0 = s0^2 + s1*x0 + x0
    /// s1 = s0 + x0^2
    /// y0 = 3*s0*s1 - 2
    /// ```
    ///
    /// Coefficients are integers mapped into the field (binary fields read
    /// them as bit patterns). `#` starts a comment.
    pub fn parse(text: &str, field: Field) -> Result<Self> {
        let mut name = String::from("custom");
        let mut dims: [Option<usize>; 3] = [None; 3];
        let mut coords: BTreeMap<(char, usize), Polynomial> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            if let Some((lhs, rhs)) = line.split_once('=') {
                let [s, c, _] = dims;
                let (Some(sd), Some(cd)) = (s, c) else {
                    return Err(perr("dimension headers must precede equations".into()));
                };
                let lhs = lhs.trim();
                let (kind, idx) = parse_var_name(lhs).ok_or_else(|| perr(format!("bad coordinate {lhs:?}")))?;
                if kind == 'x' {
                    return Err(perr("commands cannot be assigned".into()));
                }
                let p = parse_poly(rhs, field, sd, cd).map_err(perr)?;
                if coords.insert((kind, idx), p).is_some() {
                    return Err(perr(format!("{lhs} defined twice")));
                }
                continue;
            }
            let (key, val) = line.split_once(char::is_whitespace).ok_or_else(|| perr(format!("unrecognized line {line:?}")))?;
            let val = val.trim();
            let slot = match key {
                "name" => {
                    name = val.to_string();
                    continue;
                }
                "state" => 0,
                "command" => 1,
                "output" => 2,
                _ => return Err(perr(format!("unknown header {key:?}"))),
            };
            dims[slot] = Some(val.parse().map_err(|_| perr(format!("bad dimension {val:?}")))?);
        }
        let sd = dims[0].ok_or(Error::Parse { line: 0, msg: "missing state header".into() })?;
        let cd = dims[1].unwrap_or(0);
        let od = dims[2].unwrap_or(0);
        let mut take = |kind: char, n: usize| -> Result<Vec<Polynomial>> {
            (0..n)
                .map(|i| coords.remove(&(kind, i)).ok_or(Error::Parse { line: 0, msg: format!("missing equation for {kind}{i}") }))
                .collect()
        };
        let ns = take('s', sd)?;
        let out = take('y', od)?;
        if let Some(((k, i), _)) = coords.into_iter().next() {
            return Err(Error::Parse { line: 0, msg: format!("{k}{i} is out of range") });
        }
        Self::new(name, field, sd, cd, ns, out)
    }

    pub fn load(path: impl AsRef<Path>, field: Field) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, field)
    }
}

fn parse_var_name(s: &str) -> Option<(char, usize)> {
    let mut chars = s.chars();
    let kind = chars.next()?;
    if !matches!(kind, 's' | 'x' | 'y') {
        return None;
    }
    chars.as_str().parse().ok().map(|i| (kind, i))
}

fn parse_poly(text: &str, field: Field, sd: usize, cd: usize) -> std::result::Result<Polynomial, String> {
    let nvars = sd + cd;
    let normalized = text.replace('-', "+-");
    let mut terms = Vec::new();
    for raw in normalized.split('+') {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let (neg, body) = match raw.strip_prefix('-') {
            Some(rest) => (true, rest.trim()),
            None => (false, raw),
        };
        let mut coeff = field.one();
        let mut exps = vec![0u32; nvars];
        for factor in body.split('*') {
            let factor = factor.trim();
            if factor.is_empty() {
                return Err(format!("empty factor in {raw:?}"));
            }
            if factor.chars().next().unwrap().is_ascii_digit() {
                let v: u64 = factor.parse().map_err(|_| format!("bad coefficient {factor:?}"))?;
                coeff *= field.elem(v);
                continue;
            }
            let (name, e) = match factor.split_once('^') {
                Some((n, e)) => (n.trim(), e.trim().parse::<u32>().map_err(|_| format!("bad exponent in {factor:?}"))?),
                None => (factor, 1),
            };
            let idx = match parse_var_name(name) {
                Some(('s', i)) if i < sd => i,
                Some(('x', i)) if i < cd => sd + i,
                _ => return Err(format!("unknown variable {name:?}")),
            };
            exps[idx] += e;
        }
        if neg {
            coeff = -coeff;
        }
        terms.push(Term { coeff, exps });
    }
    Polynomial::new(field, nvars, terms).map_err(|e| e.to_string())
}

/// Bundled machines selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MachineKind {
    Bank,
    Product,
    QuadraticMix,
    Counter,
}

impl MachineKind {
    pub const ALL: [MachineKind; 4] = [MachineKind::Bank, MachineKind::Product, MachineKind::QuadraticMix, MachineKind::Counter];

    pub fn build(self, field: Field) -> Result<TransitionFunction> {
        match self {
            MachineKind::Bank => Ok(TransitionFunction::bank(field)),
            MachineKind::Product => Ok(TransitionFunction::product(field)),
            MachineKind::QuadraticMix => Ok(TransitionFunction::quadratic_mix(field)),
            MachineKind::Counter => TransitionFunction::boolean_counter(field),
        }
    }

    /// The bundled machine whose total degree is `d`, if any.
    pub fn for_degree(d: usize) -> Option<MachineKind> {
        match d {
            1 => Some(MachineKind::Bank),
            2 => Some(MachineKind::Product),
            3 => Some(MachineKind::Counter),
            _ => None,
        }
    }

    pub fn needs_binary_field(self) -> bool {
        self == MachineKind::Counter
    }
}

impl fmt::Display for MachineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MachineKind::Bank => "bank",
            MachineKind::Product => "product",
            MachineKind::QuadraticMix => "quadratic-mix",
            MachineKind::Counter => "counter",
        })
    }
}

impl FromStr for MachineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MachineKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown machine {s:?} (expected bank, product, quadratic-mix or counter)")))
    }
}
