//! SDPA sparse format (`.dat-s`) writer and reader, and a reader for the
//! objective lines of an SDPA result file.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::textio::{fmt_exact, parse_real, parse_usize};

use super::problem::{BlockSdp, Entry};

/// Writes `sdp` in SDPA sparse format. The problem name follows `mDIM` on the
/// first line as a quoted comment.
pub fn export_sdpa<T: Real>(sdp: &BlockSdp<T>, name: &str) -> String {
    let mut out = String::new();
    let name: String = name.chars().map(|c| if c == '"' || c.is_control() { ' ' } else { c }).collect();
    out.push_str(&format!("{} \"{}\"\n", sdp.variable_count(), name));
    out.push_str(&format!("{}\n", sdp.block_sizes().len()));
    let sizes: Vec<String> = sdp.block_sizes().iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let obj: Vec<String> = sdp.objective().iter().map(|&c| fmt_exact(c)).collect();
    out.push_str(&obj.join(" "));
    out.push('\n');
    for e in sdp.entries() {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            e.matrix,
            e.block + 1,
            e.row + 1,
            e.col + 1,
            fmt_exact(e.value)
        ));
    }
    out
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
}

/// Reads SDPA sparse format. Leading comment lines (starting with `"` or `*`)
/// and anything after the count on the `mDIM` and `nBLOCK` lines are ignored.
pub fn parse_sdpa<T: Real>(text: &str) -> Result<BlockSdp<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .skip_while(|(_, l)| l.starts_with('"') || l.starts_with('*'));

    let mut leading = |what: &str| -> Result<(usize, usize)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing {what} line")))?;
        let tok = tokens(l).next().ok_or_else(|| Error::parse(n, format!("missing {what}")))?;
        Ok((n, parse_usize(tok, n)?))
    };
    let (_, m) = leading("mDIM")?;
    let (n_line, nblock) = leading("nBLOCK")?;

    let mut sizes = Vec::with_capacity(nblock);
    let mut objective = Vec::with_capacity(m);
    let mut entries = Vec::new();
    let mut last_line = n_line;
    for (n, l) in lines {
        last_line = n;
        for tok in tokens(l) {
            if sizes.len() < nblock {
                let s: isize = tok
                    .parse()
                    .map_err(|_| Error::parse(n, format!("expected a block size, found `{tok}`")))?;
                sizes.push(s);
            } else if objective.len() < m {
                objective.push(parse_real::<T>(tok, n)?);
            } else {
                break;
            }
        }
        if sizes.len() == nblock && objective.len() == m {
            break;
        }
    }
    if sizes.len() < nblock || objective.len() < m {
        return Err(Error::parse(last_line, "truncated header"));
    }

    let rest = text.lines().enumerate().skip(last_line);
    for (i, l) in rest {
        let n = i + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let t: Vec<&str> = tokens(l).collect();
        if t.len() != 5 {
            return Err(Error::parse(n, "expected `matno blkno i j value`"));
        }
        let matrix = parse_usize(t[0], n)?;
        let block = one_based(parse_usize(t[1], n)?, n)?;
        let row = one_based(parse_usize(t[2], n)?, n)?;
        let col = one_based(parse_usize(t[3], n)?, n)?;
        entries.push(Entry {
            matrix,
            block,
            row,
            col,
            value: parse_real(t[4], n)?,
        });
    }
    BlockSdp::new(sizes, objective, entries)
}

fn one_based(v: usize, line: usize) -> Result<usize> {
    v.checked_sub(1)
        .ok_or_else(|| Error::parse(line, "indices are 1-based"))
}

/// Objective values reported by an external SDPA-family solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaResult {
    pub phase: Option<String>,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

/// Reads `objValPrimal`, `objValDual` and, when present, `phase.value` from an
/// SDPA output file.
pub fn parse_sdpa_result(text: &str) -> Result<SdpaResult> {
    let mut phase = None;
    let mut primal = None;
    let mut dual = None;
    for (i, l) in text.lines().enumerate() {
        let Some((key, value)) = l.split_once('=') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "phase.value" => phase = Some(value.to_string()),
            "objValPrimal" => primal = Some(parse_real::<f64>(value, i + 1)?),
            "objValDual" => dual = Some(parse_real::<f64>(value, i + 1)?),
            _ => {}
        }
    }
    match (primal, dual) {
        (Some(primal_objective), Some(dual_objective)) => Ok(SdpaResult {
            phase,
            primal_objective,
            dual_objective,
        }),
        _ => Err(Error::parse(0, "objValPrimal or objValDual missing")),
    }
}
