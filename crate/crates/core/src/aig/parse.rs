//! AIGER ASCII ("aag") and binary ("aig") readers and writers, versions 1
//! and 1.9 (I, L, O, A, B sections plus symbols and comments).

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Aig, AigError, ComponentId, GateSpec, LatchSpec, Literal, Requirement};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: literal {lit} out of range (max variable {max})")]
    OutOfRange { line: usize, lit: u32, max: u32 },
    #[error("line {line}: {msg}")]
    Unsupported { line: usize, msg: String },
    #[error("truncated binary gate data at gate {0}")]
    Truncated(usize),
    #[error("binary header/body mismatch: {0}")]
    BinaryHeader(String),
    #[error(transparent)]
    Structure(#[from] AigError),
    #[error("cannot serialize to binary: {0}")]
    NotCanonical(String),
}

/// Options controlling how requirements are derived from the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// HWMCC files list *bad* literals: a bad/output literal `l` yields the
    /// requirement "always not l". Setting this flag reads the listed
    /// literals as *good* instead, yielding "always l".
    pub outputs_are_good: bool,
}

struct Header {
    max_var: u32,
    inputs: usize,
    latches: usize,
    outputs: usize,
    gates: usize,
    bad: usize,
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str, magic: &str, lineno: usize) -> Result<Header, ParseError> {
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(magic) {
        return Err(syntax(lineno, format!("expected {magic:?} header")));
    }
    let mut nums = Vec::new();
    for p in parts {
        nums.push(
            p.parse::<u32>()
                .map_err(|_| syntax(lineno, format!("bad header field {p:?}")))?,
        );
    }
    if nums.len() < 5 || nums.len() > 9 {
        return Err(syntax(lineno, "header needs M I L O A [B C J F]"));
    }
    let get = |i: usize| nums.get(i).copied().unwrap_or(0) as usize;
    for (i, section) in [(6, "constraint (C)"), (7, "justice (J)"), (8, "fairness (F)")] {
        if get(i) != 0 {
            return Err(ParseError::Unsupported {
                line: lineno,
                msg: format!(
                    "{section} section is not supported; its semantics interact with invariant checking"
                ),
            });
        }
    }
    Ok(Header {
        max_var: nums[0],
        inputs: get(1),
        latches: get(2),
        outputs: get(3),
        gates: get(4),
        bad: get(5),
    })
}

fn parse_literal(tok: &str, max_var: u32, line: usize) -> Result<Literal, ParseError> {
    let code: u32 = tok
        .parse()
        .map_err(|_| syntax(line, format!("bad literal {tok:?}")))?;
    if code / 2 > max_var {
        return Err(ParseError::OutOfRange {
            line,
            lit: code,
            max: max_var,
        });
    }
    Ok(Literal(code))
}

fn parse_latch_init(
    latch_lit: Literal,
    tok: Option<&str>,
    max_var: u32,
    line: usize,
) -> Result<bool, ParseError> {
    match tok {
        None => Ok(false),
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        Some(t) => {
            let lit = parse_literal(t, max_var, line)?;
            if lit == latch_lit {
                Err(ParseError::Unsupported {
                    line,
                    msg: "uninitialized latches are not supported".into(),
                })
            } else {
                Err(syntax(line, format!("bad latch init {t:?}")))
            }
        }
    }
}

struct SymbolTable {
    inputs: BTreeMap<usize, String>,
    latches: BTreeMap<usize, String>,
    requirements: BTreeMap<usize, String>,
}

/// Parses the symbol/comment trailer shared by both formats. `req_prefix`
/// selects which symbol kind ('o' or 'b') names the requirements.
fn parse_symbols<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    req_prefix: char,
) -> Result<SymbolTable, ParseError> {
    let mut table = SymbolTable {
        inputs: BTreeMap::new(),
        latches: BTreeMap::new(),
        requirements: BTreeMap::new(),
    };
    for (lineno, line) in lines {
        if line == "c" {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (head, name) = line
            .split_once(' ')
            .ok_or_else(|| syntax(lineno, "bad symbol line"))?;
        let kind = head
            .chars()
            .next()
            .ok_or_else(|| syntax(lineno, "bad symbol line"))?;
        let index: usize = head[1..]
            .parse()
            .map_err(|_| syntax(lineno, format!("bad symbol position {head:?}")))?;
        match kind {
            'i' => {
                table.inputs.insert(index, name.to_string());
            }
            'l' => {
                table.latches.insert(index, name.to_string());
            }
            k if k == req_prefix => {
                table.requirements.insert(index, name.to_string());
            }
            'o' | 'b' => {} // present but not the requirement section
            _ => return Err(syntax(lineno, format!("bad symbol kind {kind:?}"))),
        }
    }
    Ok(table)
}

fn build_aig(
    header: &Header,
    input_vars: Vec<u32>,
    latches: Vec<LatchSpec>,
    gates: Vec<GateSpec>,
    req_literals: Vec<Literal>,
    symbols: SymbolTable,
    opts: ParseOptions,
) -> Result<Aig, ParseError> {
    let requirements = req_literals
        .iter()
        .enumerate()
        .map(|(i, &lit)| Requirement {
            name: symbols
                .requirements
                .get(&i)
                .cloned()
                .unwrap_or_else(|| format!("r{}", i + 1)),
            good: if opts.outputs_are_good { lit } else { lit.negate() },
        })
        .collect();
    let mut symbol_map = BTreeMap::new();
    for (i, name) in symbols.inputs {
        if i < header.inputs {
            symbol_map.insert(ComponentId::Input(i as u32), name);
        }
    }
    for (i, name) in symbols.latches {
        if i < header.latches {
            symbol_map.insert(ComponentId::Latch(i as u32), name);
        }
    }
    Ok(Aig::new(input_vars, latches, gates, requirements, symbol_map)?)
}

/// Parses an AIGER ASCII ("aag") file.
pub fn parse_ascii(text: &[u8]) -> Result<Aig, ParseError> {
    parse_ascii_with(text, ParseOptions::default())
}

pub fn parse_ascii_with(text: &[u8], opts: ParseOptions) -> Result<Aig, ParseError> {
    let text = std::str::from_utf8(text)
        .map_err(|_| syntax(1, "file is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    let (lineno, first) = lines.next().ok_or_else(|| syntax(1, "empty file"))?;
    let header = parse_header(first, "aag", lineno)?;
    let max_var = header.max_var;

    let mut next_line = |section: &str| -> Result<(usize, &str), ParseError> {
        lines
            .next()
            .ok_or_else(|| syntax(0, format!("unexpected end of file in {section} section")))
    };

    let mut input_vars = Vec::with_capacity(header.inputs);
    for _ in 0..header.inputs {
        let (lineno, line) = next_line("input")?;
        let lit = parse_literal(line.trim(), max_var, lineno)?;
        if lit.is_constant() || lit.is_negated() {
            return Err(syntax(lineno, format!("input literal {lit} must be positive")));
        }
        input_vars.push(lit.var());
    }
    let mut latches = Vec::with_capacity(header.latches);
    for _ in 0..header.latches {
        let (lineno, line) = next_line("latch")?;
        let mut toks = line.split_ascii_whitespace();
        let lit = parse_literal(
            toks.next().ok_or_else(|| syntax(lineno, "missing latch literal"))?,
            max_var,
            lineno,
        )?;
        if lit.is_constant() || lit.is_negated() {
            return Err(syntax(lineno, format!("latch literal {lit} must be positive")));
        }
        let next = parse_literal(
            toks.next().ok_or_else(|| syntax(lineno, "missing latch next literal"))?,
            max_var,
            lineno,
        )?;
        let init = parse_latch_init(lit, toks.next(), max_var, lineno)?;
        latches.push(LatchSpec {
            var: lit.var(),
            next,
            init,
        });
    }
    let mut outputs = Vec::with_capacity(header.outputs);
    for _ in 0..header.outputs {
        let (lineno, line) = next_line("output")?;
        outputs.push(parse_literal(line.trim(), max_var, lineno)?);
    }
    let mut bad = Vec::with_capacity(header.bad);
    for _ in 0..header.bad {
        let (lineno, line) = next_line("bad")?;
        bad.push(parse_literal(line.trim(), max_var, lineno)?);
    }
    let mut gates = Vec::with_capacity(header.gates);
    for _ in 0..header.gates {
        let (lineno, line) = next_line("and-gate")?;
        let mut toks = line.split_ascii_whitespace();
        let mut lit = |what: &str| -> Result<Literal, ParseError> {
            parse_literal(
                toks.next()
                    .ok_or_else(|| syntax(lineno, format!("missing {what}")))?,
                max_var,
                lineno,
            )
        };
        let lhs = lit("gate literal")?;
        let rhs0 = lit("gate operand")?;
        let rhs1 = lit("gate operand")?;
        if lhs.is_constant() || lhs.is_negated() {
            return Err(syntax(lineno, format!("gate literal {lhs} must be positive")));
        }
        for rhs in [rhs0, rhs1] {
            if !rhs.is_constant() && rhs.var() >= lhs.var() {
                return Err(syntax(
                    lineno,
                    format!("gate {lhs} depends on operand {rhs} that is not smaller"),
                ));
            }
        }
        gates.push(GateSpec {
            var: lhs.var(),
            rhs0,
            rhs1,
        });
    }

    // Requirements come from the bad section when present (HWMCC convention),
    // otherwise from the outputs.
    let (req_literals, req_prefix) = if header.bad > 0 {
        (bad, 'b')
    } else {
        (outputs, 'o')
    };
    let symbols = parse_symbols(lines, req_prefix)?;
    build_aig(&header, input_vars, latches, gates, req_literals, symbols, opts)
}

fn decode_delta(bytes: &[u8], pos: &mut usize, gate: usize) -> Result<u32, ParseError> {
    let mut value: u32 = 0;
    let mut shift = 0;
    loop {
        let &byte = bytes.get(*pos).ok_or(ParseError::Truncated(gate))?;
        *pos += 1;
        value |= ((byte & 0x7f) as u32) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
        if shift > 28 {
            return Err(ParseError::Truncated(gate));
        }
    }
}

/// Parses an AIGER binary ("aig") file. Inputs and gate left-hand sides are
/// implicit; gates are delta-encoded as two variable-length unsigned deltas.
pub fn parse_binary(bytes: &[u8]) -> Result<Aig, ParseError> {
    parse_binary_with(bytes, ParseOptions::default())
}

pub fn parse_binary_with(bytes: &[u8], opts: ParseOptions) -> Result<Aig, ParseError> {
    let mut pos = 0;
    let mut lineno = 0;
    let read_line = |pos: &mut usize, lineno: &mut usize| -> Result<String, ParseError> {
        *lineno += 1;
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos] != b'\n' {
            *pos += 1;
        }
        if *pos >= bytes.len() {
            return Err(syntax(*lineno, "unexpected end of file"));
        }
        let line = std::str::from_utf8(&bytes[start..*pos])
            .map_err(|_| syntax(*lineno, "non-ASCII bytes in header section"))?;
        *pos += 1;
        Ok(line.trim_end().to_string())
    };

    let first = read_line(&mut pos, &mut lineno)?;
    let header = parse_header(&first, "aig", lineno)?;
    if header.max_var as usize != header.inputs + header.latches + header.gates {
        return Err(ParseError::BinaryHeader(format!(
            "M = {} but I + L + A = {}",
            header.max_var,
            header.inputs + header.latches + header.gates
        )));
    }
    let max_var = header.max_var;
    let input_vars: Vec<u32> = (1..=header.inputs as u32).collect();

    let mut latches = Vec::with_capacity(header.latches);
    for i in 0..header.latches {
        let line = read_line(&mut pos, &mut lineno)?;
        let var = header.inputs as u32 + 1 + i as u32;
        let mut toks = line.split_ascii_whitespace();
        let next = parse_literal(
            toks.next().ok_or_else(|| syntax(lineno, "missing latch next literal"))?,
            max_var,
            lineno,
        )?;
        let init = parse_latch_init(Literal::from_var(var, false), toks.next(), max_var, lineno)?;
        latches.push(LatchSpec { var, next, init });
    }
    let mut outputs = Vec::with_capacity(header.outputs);
    for _ in 0..header.outputs {
        let line = read_line(&mut pos, &mut lineno)?;
        outputs.push(parse_literal(line.trim(), max_var, lineno)?);
    }
    let mut bad = Vec::with_capacity(header.bad);
    for _ in 0..header.bad {
        let line = read_line(&mut pos, &mut lineno)?;
        bad.push(parse_literal(line.trim(), max_var, lineno)?);
    }

    let mut gates = Vec::with_capacity(header.gates);
    for i in 0..header.gates {
        let var = (header.inputs + header.latches + 1 + i) as u32;
        let lhs = var * 2;
        let delta0 = decode_delta(bytes, &mut pos, i)?;
        let delta1 = decode_delta(bytes, &mut pos, i)?;
        let rhs0 = lhs
            .checked_sub(delta0)
            .filter(|&r| r < lhs)
            .ok_or(ParseError::Truncated(i))?;
        let rhs1 = rhs0.checked_sub(delta1).ok_or(ParseError::Truncated(i))?;
        gates.push(GateSpec {
            var,
            rhs0: Literal(rhs0),
            rhs1: Literal(rhs1),
        });
    }

    let trailer = std::str::from_utf8(&bytes[pos..])
        .map_err(|_| syntax(lineno, "non-ASCII bytes in symbol section"))?;
    let req_prefix = if header.bad > 0 { 'b' } else { 'o' };
    let symbols = parse_symbols(
        trailer.lines().enumerate().map(|(i, l)| (lineno + 1 + i, l)),
        req_prefix,
    )?;
    let req_literals = if header.bad > 0 { bad } else { outputs };
    build_aig(&header, input_vars, latches, gates, req_literals, symbols, opts)
}

fn symbol_section(aig: &Aig) -> String {
    let mut out = String::new();
    for (c, name) in aig.symbols() {
        match c {
            ComponentId::Input(i) => out.push_str(&format!("i{i} {name}\n")),
            ComponentId::Latch(i) => out.push_str(&format!("l{i} {name}\n")),
            ComponentId::Gate(_) => {}
        }
    }
    for (i, r) in aig.requirements().iter().enumerate() {
        out.push_str(&format!("b{i} {}\n", r.name));
    }
    out
}

/// Serializes to AIGER ASCII. Requirements are written as bad-state literals,
/// so the default-option round trip through [`parse_ascii`] is the identity.
pub fn serialize_ascii(aig: &Aig) -> Vec<u8> {
    let mut out = format!(
        "aag {} {} {} 0 {}{}\n",
        aig.max_var(),
        aig.num_inputs(),
        aig.num_latches(),
        aig.num_gates(),
        bad_count_field(aig)
    );
    for &v in aig.input_vars() {
        out.push_str(&format!("{}\n", v * 2));
    }
    for l in aig.latches() {
        out.push_str(&format!("{} {} {}\n", l.var * 2, l.next, l.init as u32));
    }
    for r in aig.requirements() {
        out.push_str(&format!("{}\n", r.good.negate()));
    }
    for g in aig.gates() {
        out.push_str(&format!("{} {} {}\n", g.var * 2, g.rhs0, g.rhs1));
    }
    out.push_str(&symbol_section(aig));
    out.into_bytes()
}

fn bad_count_field(aig: &Aig) -> String {
    if aig.requirements().is_empty() {
        String::new()
    } else {
        format!(" {}", aig.requirements().len())
    }
}

fn encode_delta(out: &mut Vec<u8>, mut delta: u32) {
    while delta >= 0x80 {
        out.push((delta & 0x7f) as u8 | 0x80);
        delta >>= 7;
    }
    out.push(delta as u8);
}

/// Serializes to AIGER binary. Requires canonical variable numbering (inputs
/// first, then latches, then gates in ascending order), which every file read
/// by [`parse_binary`] has.
pub fn serialize_binary(aig: &Aig) -> Result<Vec<u8>, ParseError> {
    for (i, &v) in aig.input_vars().iter().enumerate() {
        if v != i as u32 + 1 {
            return Err(ParseError::NotCanonical(format!(
                "input {} has variable {v}, expected {}",
                i,
                i + 1
            )));
        }
    }
    for (i, l) in aig.latches().iter().enumerate() {
        let expect = aig.num_inputs() as u32 + 1 + i as u32;
        if l.var != expect {
            return Err(ParseError::NotCanonical(format!(
                "latch {} has variable {}, expected {expect}",
                i, l.var
            )));
        }
    }
    let gate_base = (aig.num_inputs() + aig.num_latches()) as u32 + 1;
    for (i, g) in aig.gates().iter().enumerate() {
        if g.var != gate_base + i as u32 {
            return Err(ParseError::NotCanonical(format!(
                "gate {} has variable {}, expected {}",
                i,
                g.var,
                gate_base + i as u32
            )));
        }
    }

    let mut out = format!(
        "aig {} {} {} 0 {}{}\n",
        aig.max_var(),
        aig.num_inputs(),
        aig.num_latches(),
        aig.num_gates(),
        bad_count_field(aig)
    )
    .into_bytes();
    for l in aig.latches() {
        out.extend_from_slice(format!("{} {}\n", l.next, l.init as u32).as_bytes());
    }
    for r in aig.requirements() {
        out.extend_from_slice(format!("{}\n", r.good.negate()).as_bytes());
    }
    for g in aig.gates() {
        let lhs = g.var * 2;
        let (rhs0, rhs1) = if g.rhs0.code() >= g.rhs1.code() {
            (g.rhs0.code(), g.rhs1.code())
        } else {
            (g.rhs1.code(), g.rhs0.code())
        };
        encode_delta(&mut out, lhs - rhs0);
        encode_delta(&mut out, rhs0 - rhs1);
    }
    out.extend_from_slice(symbol_section(aig).as_bytes());
    Ok(out)
}
