//! Block-diagonal SDP data and the sparse SDPA (`.dat-s`) format.
//!
//! The SDP reads `F₀ − Σₖ zₖ Fₖ ⪰ 0`, maximizing `gᵀz`, with five blocks:
//!
//! | block | size      | `F₀`              | `Fₖ`                          |
//! |-------|-----------|-------------------|-------------------------------|
//! | 1     | 1         | `1`               | `1`                           |
//! | 2     | 1         | `−1`              | `−1`                          |
//! | 3     | m, diag   | `Diag(u)`         | `Diag(eₖ)`                    |
//! | 4     | m, diag   | `−Diag(l)`        | `−Diag(eₖ)`                   |
//! | 5     | 1 + m     | `[[2θ, 0],[0, A⁻¹]]` | `−(e₀eₖ₊₁ᵀ + eₖ₊₁e₀ᵀ)` (bordered) |
//!
//! so block 5 of the combination is `[[2θ, xᵀ],[x, A⁻¹]]`, which is positive
//! semidefinite exactly when `xᵀAx ≤ 2θ`.
//!
//! In the file, diagonal blocks carry negative sizes, indices are 1-based and
//! only the upper triangle is written. Every entry of `F₀`'s two bound
//! blocks is written, zeros included, and `−0` is written as `0`.

use std::io::{BufRead, Write};

use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseSymmetric;

use super::SelectionInstance;

/// One stored entry: matrix `k` (0 for `F₀`), 1-based block and indices,
/// `i ≤ j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpEntry {
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// `maximize cᵀz subject to F₀ − Σ zₖ Fₖ ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub c: Vec<f64>,
    /// SDPA block structure; negative sizes mark diagonal blocks.
    pub block_sizes: Vec<i64>,
    pub entries: Vec<SdpEntry>,
}

impl SdpProblem {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    /// Order of every `Fₖ`.
    pub fn dimension(&self) -> usize {
        self.block_sizes.iter().map(|b| b.unsigned_abs() as usize).sum()
    }

    pub fn entries_of(&self, matrix: usize) -> impl Iterator<Item = &SdpEntry> {
        self.entries.iter().filter(move |e| e.matrix == matrix)
    }

    /// Block `block` (1-based) of `F_matrix` as a full symmetric array.
    pub fn block_dense(&self, matrix: usize, block: usize) -> Vec<Vec<f64>> {
        let n = self.block_sizes[block - 1].unsigned_abs() as usize;
        let mut out = vec![vec![0.0; n]; n];
        for e in self.entries_of(matrix).filter(|e| e.block == block) {
            out[e.i - 1][e.j - 1] = e.value;
            out[e.j - 1][e.i - 1] = e.value;
        }
        out
    }
}

fn positive_zero(v: f64) -> f64 {
    v + 0.0
}

/// SDP form of `inst` given the sparse `A⁻¹`.
pub fn build_sdp(inst: &SelectionInstance, ainv: &SparseSymmetric) -> Result<SdpProblem> {
    let m = inst.m();
    check_dim(m, ainv.n())?;
    let mut entries = Vec::with_capacity(4 * m + ainv.nnz() + 8 * m + 3);
    let mut push = |matrix, block, i, j, value: f64| {
        entries.push(SdpEntry {
            matrix,
            block,
            i,
            j,
            value: positive_zero(value),
        })
    };
    push(0, 1, 1, 1, 1.0);
    push(0, 2, 1, 1, -1.0);
    for (i, &u) in inst.upper().iter().enumerate() {
        push(0, 3, i + 1, i + 1, u);
    }
    for (i, &l) in inst.lower().iter().enumerate() {
        push(0, 4, i + 1, i + 1, -l);
    }
    push(0, 5, 1, 1, 2.0 * inst.theta());
    for (i, j, v) in ainv.upper() {
        push(0, 5, i + 2, j + 2, v);
    }
    for k in 1..=m {
        push(k, 1, 1, 1, 1.0);
        push(k, 2, 1, 1, -1.0);
        push(k, 3, k, k, 1.0);
        push(k, 4, k, k, -1.0);
        push(k, 5, 1, k + 1, -1.0);
    }
    let mi = m as i64;
    Ok(SdpProblem {
        c: inst.gains().to_vec(),
        block_sizes: vec![-1, -1, -mi, -mi, mi + 1],
        entries,
    })
}

/// Writes `sdp` in sparse SDPA format.
pub fn export_sdpa<W: Write>(sdp: &SdpProblem, mut sink: W) -> Result<()> {
    writeln!(sink, "{}", sdp.n_vars())?;
    writeln!(sink, "{}", sdp.block_sizes.len())?;
    let sizes: Vec<String> = sdp.block_sizes.iter().map(i64::to_string).collect();
    writeln!(sink, "{}", sizes.join(" "))?;
    let c: Vec<String> = sdp.c.iter().map(|v| positive_zero(*v).to_string()).collect();
    writeln!(sink, "{}", c.join(" "))?;
    for e in &sdp.entries {
        writeln!(sink, "{} {} {} {} {}", e.matrix, e.block, e.i, e.j, positive_zero(e.value))?;
    }
    Ok(())
}

/// Reads a sparse SDPA file. Leading comment lines (starting with `"` or
/// `*`) are skipped, text after the first token of the two count lines is
/// ignored, and `, { } ( )` count as separators.
pub fn read_sdpa<R: BufRead>(input: R) -> Result<SdpProblem> {
    let mut lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if lines.is_empty() && (trimmed.starts_with('"') || trimmed.starts_with('*')) {
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        lines.push((i + 1, line));
    }
    let err = |line: usize, message: String| Error::Parse { line, message };
    if lines.len() < 4 {
        return Err(err(lines.last().map_or(0, |l| l.0), "truncated SDPA header".into()));
    }
    let first_token = |(ln, text): &(usize, String)| -> Result<usize> {
        let tok = text.split_whitespace().next().unwrap_or("");
        tok.parse().map_err(|_| err(*ln, format!("expected a count, got `{tok}`")))
    };
    let m = first_token(&lines[0])?;
    let n_block = first_token(&lines[1])?;

    let mut tokens = lines[2..]
        .iter()
        .flat_map(|(ln, text)| {
            text.split(|ch: char| ch.is_whitespace() || ",{}()".contains(ch))
                .filter(|t| !t.is_empty())
                .map(move |t| (*ln, t))
        })
        .peekable();
    let next_number = |tokens: &mut dyn Iterator<Item = (usize, &str)>, what: &str| -> Result<(usize, f64)> {
        let (ln, t) = tokens
            .next()
            .ok_or_else(|| err(0, format!("unexpected end of file reading {what}")))?;
        t.parse::<f64>()
            .map(|v| (ln, v))
            .map_err(|_| err(ln, format!("bad {what} `{t}`")))
    };
    let mut block_sizes = Vec::with_capacity(n_block);
    for _ in 0..n_block {
        let (ln, v) = next_number(&mut tokens, "block size")?;
        if v.fract() != 0.0 || v == 0.0 {
            return Err(err(ln, format!("bad block size {v}")));
        }
        block_sizes.push(v as i64);
    }
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        c.push(next_number(&mut tokens, "objective coefficient")?.1);
    }
    let mut entries = Vec::new();
    while tokens.peek().is_some() {
        let (ln, k) = next_number(&mut tokens, "matrix index")?;
        let index = |v: f64, limit: usize, what: &str| -> Result<usize> {
            if v.fract() != 0.0 || v < 0.0 || v as usize > limit {
                Err(err(ln, format!("bad {what} {v}")))
            } else {
                Ok(v as usize)
            }
        };
        let matrix = index(k, m, "matrix index")?;
        let block = index(next_number(&mut tokens, "block index")?.1, n_block, "block index")?;
        if block == 0 {
            return Err(err(ln, "block index must be 1-based".into()));
        }
        let size = block_sizes[block - 1].unsigned_abs() as usize;
        let i = index(next_number(&mut tokens, "row index")?.1, size, "row index")?;
        let j = index(next_number(&mut tokens, "column index")?.1, size, "column index")?;
        let value = next_number(&mut tokens, "value")?.1;
        if i == 0 || j == 0 {
            return Err(err(ln, "indices must be 1-based".into()));
        }
        if block_sizes[block - 1] < 0 && i != j {
            return Err(err(ln, format!("off-diagonal entry in diagonal block {block}")));
        }
        entries.push(SdpEntry {
            matrix,
            block,
            i: i.min(j),
            j: i.max(j),
            value,
        });
    }
    Ok(SdpProblem {
        c,
        block_sizes,
        entries,
    })
}
