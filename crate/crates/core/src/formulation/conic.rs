use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::solver::ConeDims;
use crate::sparse::CsrMatrix;

/// `maximize cᵀz subject to f₀ − F z ∈ ℝ₊ⁿˡ × 𝒦ⁿq`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    c: Vec<f64>,
    f0: Vec<f64>,
    f: CsrMatrix,
    n_l: usize,
    n_q: usize,
}

/// Size summary of a [`ConicProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProblemStats {
    pub n_vars: usize,
    pub n_l: usize,
    pub n_q: usize,
    pub nnz_f: usize,
    pub nnz_cone_tail: usize,
}

impl ConicProblem {
    pub fn new(c: Vec<f64>, f0: Vec<f64>, f: CsrMatrix, n_l: usize, n_q: usize) -> Result<Self> {
        check_dim(n_l + n_q, f0.len())?;
        check_dim(n_l + n_q, f.n_rows())?;
        check_dim(c.len(), f.n_cols())?;
        if c.iter().chain(&f0).chain(f.values()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("problem data must be finite".into()));
        }
        Ok(ConicProblem { c, f0, f, n_l, n_q })
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_l(&self) -> usize {
        self.n_l
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn dims(&self) -> ConeDims {
        ConeDims {
            n_l: self.n_l,
            n_q: self.n_q,
        }
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn f0(&self) -> &[f64] {
        &self.f0
    }

    pub fn f(&self) -> &CsrMatrix {
        &self.f
    }

    /// Non-zeros in the rows of the cone tail.
    pub fn cone_tail_nnz(&self) -> usize {
        if self.n_q == 0 {
            return 0;
        }
        let indptr = self.f.indptr();
        indptr[self.f.n_rows()] - indptr[self.n_l + 1]
    }

    pub fn stats(&self) -> ProblemStats {
        ProblemStats {
            n_vars: self.n_vars(),
            n_l: self.n_l,
            n_q: self.n_q,
            nnz_f: self.f.nnz(),
            nnz_cone_tail: self.cone_tail_nnz(),
        }
    }

    /// `f₀ − F z`
    pub fn slack(&self, z: &[f64]) -> Result<Vec<f64>> {
        let fz = self.f.mul_vec(z)?;
        Ok(self.f0.iter().zip(fz).map(|(a, b)| a - b).collect())
    }

    /// The cone tail rows of `F` applied to `z`.
    pub fn cone_tail_product(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_vars(), z.len())?;
        Ok((self.n_l + 1..self.n_l + self.n_q)
            .map(|r| {
                let (cols, vals) = self.f.row(r);
                cols.iter().zip(vals).map(|(&j, v)| v * z[j]).sum()
            })
            .collect())
    }

    pub fn objective(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.n_vars(), z.len())?;
        Ok(self.c.iter().zip(z).map(|(a, b)| a * b).sum())
    }

    /// Plain-text dump: a header `n_l n_q`, then `c` and `f₀` on one line
    /// each, then one `i j v` line (1-based) per non-zero of `F`.
    pub fn write_text<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{} {}", self.n_l, self.n_q)?;
        write_line(&mut sink, &self.c)?;
        write_line(&mut sink, &self.f0)?;
        self.f.write_coordinate(&mut sink)
    }

    /// Reads the format written by [`ConicProblem::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("missing {what}"),
                }),
            }
        };
        let (ln, header) = next("header")?;
        let dims = parse_numbers::<usize>(&header, ln)?;
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: ln,
                message: "header must be `n_l n_q`".into(),
            });
        }
        let (ln, c_line) = next("c")?;
        let c = parse_numbers::<f64>(&c_line, ln)?;
        let (ln, f0_line) = next("f0")?;
        let f0 = parse_numbers::<f64>(&f0_line, ln)?;
        let mut triplets = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse {
                line: i + 1,
                message: format!("expected `i j v`, got `{line}`"),
            };
            if parts.len() != 3 {
                return Err(bad());
            }
            let r: usize = parts[0].parse().map_err(|_| bad())?;
            let col: usize = parts[1].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            if r == 0 || col == 0 || r > f0.len() || col > c.len() {
                return Err(bad());
            }
            triplets.push((r - 1, col - 1, v));
        }
        let f = CsrMatrix::from_triplets(f0.len(), c.len(), &triplets);
        ConicProblem::new(c, f0, f, dims[0], dims[1])
    }
}

fn write_line<W: Write>(sink: &mut W, values: &[f64]) -> Result<()> {
    let text: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    writeln!(sink, "{}", text.join(" "))?;
    Ok(())
}

fn parse_numbers<T: std::str::FromStr>(line: &str, ln: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("bad number `{t}`"),
            })
        })
        .collect()
}
