//! Parser and writer for the alist sparse parity-check text format.
//!
//! Layout: `n m`, then `max_col_deg max_row_deg`, then the n column
//! degrees, the m row degrees, one adjacency line per column (1-based row
//! indices, zero padding allowed), and one adjacency line per row.

use crate::error::{Error, Result};

/// A binary parity-check matrix stored as row and column adjacency lists.
#[derive(Debug, Clone)]
pub struct SparseParityCheck {
    n: usize,
    m: usize,
    /// For each variable (column): sorted check indices.
    checks_of_var: Vec<Vec<u32>>,
    /// For each check (row): sorted variable indices.
    vars_of_check: Vec<Vec<u32>>,
}

fn parse_ints(line: &str, line_no: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("expected an integer, got {tok:?}"),
            })
        })
        .collect()
}

impl SparseParityCheck {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn checks_of_var(&self, v: usize) -> &[u32] {
        &self.checks_of_var[v]
    }

    pub fn vars_of_check(&self, c: usize) -> &[u32] {
        &self.vars_of_check[c]
    }

    pub fn edge_count(&self) -> usize {
        self.vars_of_check.iter().map(|r| r.len()).sum()
    }

    /// Parses alist text; errors carry the 1-based offending line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count() + 1,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };

        let (ln, l) = next("matrix dimensions")?;
        let dims = parse_ints(l, ln)?;
        if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
            return Err(Error::Parse {
                line: ln,
                msg: "expected two positive integers n m".into(),
            });
        }
        let (n, m) = (dims[0], dims[1]);

        let (ln, l) = next("maximum degrees")?;
        let maxes = parse_ints(l, ln)?;
        if maxes.len() != 2 {
            return Err(Error::Parse {
                line: ln,
                msg: "expected two integers: max column degree, max row degree".into(),
            });
        }
        let (dc_max, dr_max) = (maxes[0], maxes[1]);

        let (ln, l) = next("column degrees")?;
        let col_deg = parse_ints(l, ln)?;
        if col_deg.len() != n {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {n} column degrees, got {}", col_deg.len()),
            });
        }
        if let Some(d) = col_deg.iter().find(|&&d| d == 0 || d > dc_max) {
            return Err(Error::Parse {
                line: ln,
                msg: format!("column degree {d} outside 1..={dc_max}"),
            });
        }

        let (ln, l) = next("row degrees")?;
        let row_deg = parse_ints(l, ln)?;
        if row_deg.len() != m {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {m} row degrees, got {}", row_deg.len()),
            });
        }
        if let Some(d) = row_deg.iter().find(|&&d| d == 0 || d > dr_max) {
            return Err(Error::Parse {
                line: ln,
                msg: format!("row degree {d} outside 1..={dr_max}"),
            });
        }

        let mut read_adjacency = |count: usize, deg: &[usize], limit: usize, what: &str| {
            let mut out: Vec<Vec<u32>> = Vec::with_capacity(count);
            for i in 0..count {
                let (ln, l) = next(&format!("{what} adjacency"))?;
                let mut idx = parse_ints(l, ln)?;
                // strip padding zeros
                while idx.last() == Some(&0) {
                    idx.pop();
                }
                if idx.len() != deg[i] {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!(
                            "{what} {} lists {} entries but its degree is {}",
                            i + 1,
                            idx.len(),
                            deg[i]
                        ),
                    });
                }
                let mut entries = Vec::with_capacity(idx.len());
                for &e in &idx {
                    if e == 0 || e > limit {
                        return Err(Error::Parse {
                            line: ln,
                            msg: format!("index {e} outside 1..={limit}"),
                        });
                    }
                    entries.push((e - 1) as u32);
                }
                entries.sort_unstable();
                if entries.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("duplicate index in {what} {}", i + 1),
                    });
                }
                out.push(entries);
            }
            Ok(out)
        };

        let checks_of_var = read_adjacency(n, &col_deg, m, "column")?;
        let vars_of_check = read_adjacency(m, &row_deg, n, "row")?;

        // both views must describe the same matrix
        let mut from_cols: Vec<Vec<u32>> = vec![Vec::new(); m];
        for (v, checks) in checks_of_var.iter().enumerate() {
            for &c in checks {
                from_cols[c as usize].push(v as u32);
            }
        }
        for (c, row) in vars_of_check.iter().enumerate() {
            if &from_cols[c] != row {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("row {} disagrees with the column adjacency lists", c + 1),
                });
            }
        }

        Ok(SparseParityCheck {
            n,
            m,
            checks_of_var,
            vars_of_check,
        })
    }

    /// Serializes back to alist text with zero padding to the maximum
    /// degree, matching the common tool output.
    pub fn to_alist_string(&self) -> String {
        let dc = self.checks_of_var.iter().map(|c| c.len()).max().unwrap_or(0);
        let dr = self.vars_of_check.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut out = format!("{} {}\n{} {}\n", self.n, self.m, dc, dr);
        let degs = |lists: &[Vec<u32>]| {
            lists
                .iter()
                .map(|l| l.len().to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        out.push_str(&degs(&self.checks_of_var));
        out.push('\n');
        out.push_str(&degs(&self.vars_of_check));
        out.push('\n');
        let mut emit = |lists: &[Vec<u32>], width: usize| {
            for l in lists {
                let mut fields: Vec<String> = l.iter().map(|&e| (e + 1).to_string()).collect();
                fields.resize(width, "0".into());
                out.push_str(&fields.join(" "));
                out.push('\n');
            }
        };
        emit(&self.checks_of_var, dc);
        emit(&self.vars_of_check, dr);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 3x6 toy matrix:
    // 1 1 0 1 0 0
    // 0 1 1 0 1 0
    // 1 0 1 0 0 1
    const TOY: &str = "6 3\n2 4\n2 2 2 1 1 1\n3 3 3\n\
                       1 3\n1 2\n2 3\n1 0\n2 0\n3 0\n\
                       1 2 4 0\n2 3 5 0\n1 3 6 0\n";

    #[test]
    fn parses_toy_matrix() {
        let h = SparseParityCheck::parse(TOY).unwrap();
        assert_eq!(h.n(), 6);
        assert_eq!(h.m(), 3);
        assert_eq!(h.edge_count(), 9);
        assert_eq!(h.vars_of_check(0), &[0, 1, 3]);
        assert_eq!(h.checks_of_var(1), &[0, 1]);
    }

    #[test]
    fn round_trips() {
        let h = SparseParityCheck::parse(TOY).unwrap();
        let text = h.to_alist_string();
        let h2 = SparseParityCheck::parse(&text).unwrap();
        assert_eq!(h2.to_alist_string(), text);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "6 3\n2 4\n2 2 2 1 1 x\n3 3 3\n";
        match SparseParityCheck::parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let truncated = "6 3\n2 4\n";
        assert!(SparseParityCheck::parse(truncated).is_err());
        // degree larger than declared max
        let bad_deg = "6 3\n1 4\n2 2 2 1 1 1\n3 3 3\n";
        match SparseParityCheck::parse(bad_deg) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_inconsistent_views() {
        // row lists disagree with column lists (swapped last two rows)
        let bad = "6 3\n2 4\n2 2 2 1 1 1\n3 3 3\n\
                   1 3\n1 2\n2 3\n1 0\n2 0\n3 0\n\
                   1 2 4 0\n1 3 6 0\n2 3 5 0\n";
        assert!(SparseParityCheck::parse(bad).is_err());
    }
}
