//! Line-oriented text formats for programs and traces.
//!
//! Program files:
//!
//! ```text
//! # comment
//! func <name> [parallel trip=<uint>]
//! block <id> freq=<uint> [parallel trip=<uint>] [kind=function]
//!   <opcode> [dst=<reg>] [src=<reg>[,<reg>...]] [mem=<uint>]
//! edge <from> -> <to> count=<uint>
//! entry <id>
//! ```
//!
//! The entry region defaults to the first declared block. Trace files hold one
//! event per line (or separated by `;`), each `<region-id>[:addr,addr,...]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use a3pim_core::ir::{
    CfgEdge, Instruction, IrError, OpClass, Program, Region, RegionId, RegionKind, Trace, TraceEvent,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: IrError },
    #[error("{0}")]
    Program(IrError),
}

impl ParseError {
    fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax { line, column, message: message.into() }
    }
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

/// Splits a line into whitespace-separated tokens with 1-based columns,
/// dropping anything after `#`.
fn tokenize(line: &str) -> Vec<Token<'_>> {
    let line = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token { text: &line[s..i], column: line[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &line[s..], column: line[..s].chars().count() + 1 });
    }
    tokens
}

fn parse_uint(line: usize, tok: Token<'_>, text: &str, what: &str) -> Result<u64, ParseError> {
    text.parse::<u64>().map_err(|_| {
        ParseError::syntax(line, tok.column, format!("expected unsigned integer for {what}, found `{text}`"))
    })
}

fn parse_id(line: usize, tok: Token<'_>) -> Result<RegionId, ParseError> {
    let v = parse_uint(line, tok, tok.text, "region id")?;
    u32::try_from(v)
        .map(RegionId)
        .map_err(|_| ParseError::syntax(line, tok.column, format!("region id {v} out of range")))
}

/// `key=value` with the expected key.
fn keyed<'a>(line: usize, tok: Token<'a>, key: &str) -> Result<&'a str, ParseError> {
    match tok.text.split_once('=') {
        Some((k, v)) if k == key => Ok(v),
        _ => Err(ParseError::syntax(line, tok.column, format!("expected `{key}=<value>`, found `{}`", tok.text))),
    }
}

fn valid_register(name: &str) -> bool {
    !name.is_empty() && !name.contains([',', '=', ':', ';'])
}

struct PendingBlock {
    region: Region,
    line: usize,
}

/// Parses a program and checks the profile sanity bound.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut function: Option<(String, Option<u64>)> = None;
    let mut blocks: Vec<PendingBlock> = Vec::new();
    let mut seen: BTreeMap<RegionId, usize> = BTreeMap::new();
    let mut edges: Vec<(CfgEdge, usize)> = Vec::new();
    let mut entry: Option<(RegionId, usize)> = None;

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let toks = tokenize(raw);
        let Some(&head) = toks.first() else { continue };
        match head.text {
            "func" => {
                let name = toks.get(1).ok_or_else(|| ParseError::syntax(line, head.column, "func requires a name"))?;
                let (parallel, trip, _) = block_attributes(line, &toks[2..], false)?;
                let trip = match (parallel, trip) {
                    (true, Some(t)) => Some(t),
                    (false, None) => None,
                    _ => {
                        return Err(ParseError::syntax(
                            line,
                            head.column,
                            "func annotation must be `parallel trip=<uint>`",
                        ))
                    }
                };
                function = Some((name.text.to_string(), trip));
            }
            "block" => {
                let (fname, ftrip) = function
                    .clone()
                    .ok_or_else(|| ParseError::syntax(line, head.column, "block declared before any func"))?;
                let id_tok =
                    *toks.get(1).ok_or_else(|| ParseError::syntax(line, head.column, "block requires an id"))?;
                let id = parse_id(line, id_tok)?;
                let freq_tok =
                    *toks.get(2).ok_or_else(|| ParseError::syntax(line, head.column, "block requires freq=<uint>"))?;
                let freq = parse_uint(line, freq_tok, keyed(line, freq_tok, "freq")?, "freq")?;
                let (parallel, trip, kind) = block_attributes(line, &toks[3..], true)?;
                if parallel && trip.is_none() {
                    return Err(ParseError::syntax(line, head.column, "parallel requires trip=<uint>"));
                }
                if seen.contains_key(&id) {
                    return Err(ParseError::Invalid { line, source: IrError::DuplicateRegion(id) });
                }
                seen.insert(id, line);
                let mut region = Region::block(id.0, fname, freq);
                region.kind = kind;
                match (parallel, trip, ftrip) {
                    (true, Some(t), _) => region = region.with_parallel(t),
                    (false, Some(t), _) => region.trip_count = t,
                    (false, None, Some(t)) => region = region.with_parallel(t),
                    _ => {}
                }
                blocks.push(PendingBlock { region, line });
            }
            "edge" => {
                if toks.len() != 5 {
                    return Err(ParseError::syntax(line, head.column, "expected `edge <from> -> <to> count=<uint>`"));
                }
                let from = parse_id(line, toks[1])?;
                if toks[2].text != "->" {
                    return Err(ParseError::syntax(
                        line,
                        toks[2].column,
                        format!("expected `->`, found `{}`", toks[2].text),
                    ));
                }
                let to = parse_id(line, toks[3])?;
                let count = parse_uint(line, toks[4], keyed(line, toks[4], "count")?, "count")?;
                edges.push((CfgEdge { from, to, count }, line));
            }
            "entry" => {
                if toks.len() != 2 {
                    return Err(ParseError::syntax(line, head.column, "expected `entry <id>`"));
                }
                entry = Some((parse_id(line, toks[1])?, line));
            }
            op => {
                let op_class = OpClass::from_mnemonic(op).ok_or_else(|| {
                    ParseError::syntax(line, head.column, format!("unknown directive or opcode `{op}`"))
                })?;
                let block = blocks
                    .last_mut()
                    .ok_or_else(|| ParseError::syntax(line, head.column, "instruction outside a block"))?;
                let inst = parse_instruction(line, op_class, &toks[1..])?;
                if let Err(reason) = inst.check() {
                    return Err(ParseError::Invalid {
                        line,
                        source: IrError::BadInstruction {
                            region: block.region.id,
                            index: block.region.instructions.len(),
                            reason,
                        },
                    });
                }
                block.region.instructions.push(inst);
            }
        }
    }

    for b in &blocks {
        if b.region.instructions.is_empty() {
            return Err(ParseError::Invalid { line: b.line, source: IrError::EmptyRegion(b.region.id) });
        }
    }
    for (e, line) in &edges {
        if !seen.contains_key(&e.from) || !seen.contains_key(&e.to) {
            return Err(ParseError::Invalid { line: *line, source: IrError::DanglingEdge { from: e.from, to: e.to } });
        }
    }
    let entry = match entry {
        Some((id, line)) if !seen.contains_key(&id) => {
            return Err(ParseError::Invalid { line, source: IrError::UnknownEntry(id) })
        }
        Some((id, _)) => id,
        None => blocks.first().map(|b| b.region.id).ok_or(ParseError::Program(IrError::EmptyProgram))?,
    };
    let regions = blocks.into_iter().map(|b| b.region).collect();
    let program =
        Program::new(regions, edges.into_iter().map(|(e, _)| e).collect(), entry).map_err(ParseError::Program)?;
    program.check_profile_bound().map_err(ParseError::Program)?;
    Ok(program)
}

/// Parses `parallel`, `trip=` and (for blocks) `kind=` annotations.
fn block_attributes(
    line: usize,
    toks: &[Token<'_>],
    allow_kind: bool,
) -> Result<(bool, Option<u64>, RegionKind), ParseError> {
    let mut parallel = false;
    let mut trip = None;
    let mut kind = RegionKind::BasicBlock;
    for &t in toks {
        match t.text.split_once('=') {
            None if t.text == "parallel" && !parallel => parallel = true,
            Some(("trip", v)) if trip.is_none() => trip = Some(parse_uint(line, t, v, "trip")?),
            Some(("kind", v)) if allow_kind => {
                kind = match v {
                    "block" => RegionKind::BasicBlock,
                    "function" => RegionKind::Function,
                    _ => return Err(ParseError::syntax(line, t.column, format!("unknown region kind `{v}`"))),
                }
            }
            _ => return Err(ParseError::syntax(line, t.column, format!("unexpected `{}`", t.text))),
        }
    }
    Ok((parallel, trip, kind))
}

fn parse_instruction(line: usize, op: OpClass, toks: &[Token<'_>]) -> Result<Instruction, ParseError> {
    let mut inst = Instruction::new(op);
    let (mut dst, mut src, mut mem) = (false, false, false);
    for &t in toks {
        let Some((key, value)) = t.text.split_once('=') else {
            return Err(ParseError::syntax(line, t.column, format!("expected `key=value`, found `{}`", t.text)));
        };
        let value_column = t.column + key.len() + 1;
        match key {
            "dst" if !dst => {
                if !valid_register(value) {
                    return Err(ParseError::syntax(line, value_column, format!("invalid register name `{value}`")));
                }
                inst.dst = Some(value.to_string());
                dst = true;
            }
            "src" if !src => {
                for reg in value.split(',') {
                    if !valid_register(reg) {
                        return Err(ParseError::syntax(line, value_column, format!("invalid register list `{value}`")));
                    }
                    inst.srcs.push(reg.to_string());
                }
                src = true;
            }
            "mem" if !mem => {
                inst.mem = Some(parse_uint(line, t, value, "mem")?);
                mem = true;
            }
            "dst" | "src" | "mem" => {
                return Err(ParseError::syntax(line, t.column, format!("`{key}` given more than once")));
            }
            _ => return Err(ParseError::syntax(line, t.column, format!("unknown instruction field `{key}`"))),
        }
    }
    Ok(inst)
}

/// Writes a program in the format accepted by [`parse_program`].
pub fn serialize_program(program: &Program) -> String {
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for r in program.regions() {
        if current != Some(r.function.as_str()) {
            if current.is_some() {
                out.push('\n');
            }
            let _ = writeln!(out, "func {}", r.function);
            current = Some(&r.function);
        }
        let _ = write!(out, "block {} freq={}", r.id, r.frequency);
        if r.kind == RegionKind::Function {
            out.push_str(" kind=function");
        }
        if r.parallel {
            let _ = write!(out, " parallel trip={}", r.trip_count);
        } else if r.trip_count > 0 {
            let _ = write!(out, " trip={}", r.trip_count);
        }
        out.push('\n');
        for inst in &r.instructions {
            let _ = write!(out, "  {}", inst.op);
            if let Some(d) = &inst.dst {
                let _ = write!(out, " dst={d}");
            }
            if !inst.srcs.is_empty() {
                let _ = write!(out, " src={}", inst.srcs.join(","));
            }
            if let Some(m) = inst.mem {
                let _ = write!(out, " mem={m}");
            }
            out.push('\n');
        }
    }
    if !program.edges().is_empty() {
        out.push('\n');
    }
    for e in program.edges() {
        let _ = writeln!(out, "edge {} -> {} count={}", e.from, e.to, e.count);
    }
    if program.regions().first().map(|r| r.id) != Some(program.entry()) {
        let _ = writeln!(out, "entry {}", program.entry());
    }
    out
}

/// Parses a trace against `program`, requiring per-region event counts to
/// match profile frequencies.
pub fn parse_trace(text: &str, program: &Program) -> Result<Trace, ParseError> {
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut offset = 0;
        for part in content.split(';') {
            let column = offset + part.len() - part.trim_start().len() + 1;
            offset += part.len() + 1;
            let item = part.trim();
            if item.is_empty() {
                continue;
            }
            let tok = Token { text: item, column };
            let (id_text, addrs_text) = match item.split_once(':') {
                Some((a, b)) => (a.trim(), Some(b)),
                None => (item, None),
            };
            let id = parse_id(line, Token { text: id_text, column })?;
            let mut addrs = Vec::new();
            if let Some(list) = addrs_text {
                for a in list.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                    addrs.push(parse_uint(line, tok, a, "address")?);
                }
            }
            events.push(TraceEvent { region: id, addrs });
        }
    }
    Trace::new(events, program).map_err(ParseError::Program)
}

/// Writes one event per line.
pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::new();
    for e in trace.events() {
        let _ = write!(out, "{}", e.region);
        if !e.addrs.is_empty() {
            out.push(':');
            for (i, a) in e.addrs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{a}");
            }
        }
        out.push('\n');
    }
    out
}
