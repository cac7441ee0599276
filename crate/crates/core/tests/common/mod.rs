//! Shared oracles and corpus builders for the integration and acceptance
//! suites. The solvers here are deliberately independent of the library's
//! projection code: exact active-set enumeration over tiny state spaces.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use musrover_core::corpus::{parse_corpus, CorpusModel};
use musrover_core::features::Partition;

/// Corpus JSON from explicit column lists, one piece per list, every
/// column lasting one tick.
pub fn corpus_json(pieces: &[Vec<[u8; 4]>]) -> String {
    let rendered: Vec<String> = pieces
        .iter()
        .enumerate()
        .map(|(i, columns)| {
            let voices: Vec<String> = (0..4)
                .map(|v| {
                    let notes: Vec<String> = columns
                        .iter()
                        .map(|c| format!("[{},1]", c[v]))
                        .collect();
                    format!("[{}]", notes.join(","))
                })
                .collect();
            format!(r#"{{"id":"p{}","voices":[{}]}}"#, i, voices.join(","))
        })
        .collect();
    format!(r#"{{"pieces":[{}]}}"#, rendered.join(","))
}

pub fn parse_columns(pieces: &[Vec<[u8; 4]>]) -> CorpusModel {
    parse_corpus(&corpus_json(pieces)).expect("synthetic corpus must validate")
}

/// Solve `gram * x = rhs` by Gaussian elimination, tolerating singular
/// but consistent systems (free variables pinned to zero). Returns None
/// when inconsistent. The caller must verify the solution.
fn solve_linear(gram: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = gram.len();
    let mut a: Vec<Vec<f64>> = gram
        .iter()
        .zip(rhs)
        .map(|(row, &b)| {
            let mut r = row.clone();
            r.push(b);
            r
        })
        .collect();

    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..m {
        let (best, magnitude) = (row..m)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((row, 0.0));
        if magnitude < 1e-10 {
            continue;
        }
        a.swap(row, best);
        let pivot = a[row][col];
        for c in col..=m {
            a[row][c] /= pivot;
        }
        for r in 0..m {
            if r != row {
                let factor = a[r][col];
                if factor != 0.0 {
                    for c in col..=m {
                        a[r][c] -= factor * a[row][c];
                    }
                }
            }
        }
        pivot_cols.push((row, col));
        row += 1;
        if row == m {
            break;
        }
    }
    // leftover rows must be 0 = 0
    for r in row..m {
        if a[r][m].abs() > 1e-7 {
            return None;
        }
    }
    let mut x = vec![0.0; m];
    for &(r, c) in &pivot_cols {
        x[c] = a[r][m];
    }
    Some(x)
}

/// Exact minimizer of ||p||^2 subject to `rows * p = rhs`, `p >= 0`, by
/// enumerating the 2^n candidate active sets. None when infeasible.
/// Intended for n <= 12.
pub fn min_norm_nonneg(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rows[0].len();
    assert!(n <= 12, "active-set enumeration is exponential in n");
    let m = rows.len();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        let mut gram = vec![vec![0.0; m]; m];
        for r in 0..m {
            for c in 0..m {
                gram[r][c] = free.iter().map(|&i| rows[r][i] * rows[c][i]).sum();
            }
        }
        let Some(lambda) = solve_linear(&gram, rhs) else {
            continue;
        };
        let mut p = vec![0.0; n];
        for &i in &free {
            p[i] = rows.iter().zip(&lambda).map(|(row, &l)| row[i] * l).sum();
        }
        if p.iter().any(|&x| x < -1e-9) {
            continue;
        }
        let feasible = rows.iter().zip(rhs).all(|(row, &b)| {
            let v: f64 = row.iter().zip(&p).map(|(a, x)| a * x).sum();
            (v - b).abs() < 1e-7
        });
        if !feasible {
            continue;
        }
        for x in &mut p {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let norm: f64 = p.iter().map(|x| x * x).sum();
        if best.as_ref().is_none_or(|(bn, _)| norm < *bn) {
            best = Some((norm, p));
        }
    }
    best.map(|(_, p)| p)
}

/// Exact Euclidean projection of `point` onto `rows * x = rhs` (no sign
/// constraint): x = point + rows^T lambda with gram lambda = rhs - rows*point.
pub fn project_affine_oracle(point: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = point.len();
    let m = rows.len();
    let mut gram = vec![vec![0.0; m]; m];
    for r in 0..m {
        for c in 0..m {
            gram[r][c] = (0..n).map(|i| rows[r][i] * rows[c][i]).sum();
        }
    }
    let deficit: Vec<f64> = rows
        .iter()
        .zip(rhs)
        .map(|(row, &b)| b - row.iter().zip(point).map(|(a, x)| a * x).sum::<f64>())
        .collect();
    let lambda = solve_linear(&gram, &deficit)?;
    let mut x = point.to_vec();
    for i in 0..n {
        for (row, &l) in rows.iter().zip(&lambda) {
            x[i] += row[i] * l;
        }
    }
    // verify: stationarity held by construction, feasibility checked here
    for (row, &b) in rows.iter().zip(rhs) {
        let v: f64 = row.iter().zip(&x).map(|(a, y)| a * y).sum();
        if (v - b).abs() > 1e-7 {
            return None;
        }
    }
    Some(x)
}

/// Indicator rows, one per cell of a partition, with the target cell
/// masses as right-hand sides.
pub fn partition_rows(partition: &Partition, cell_targets: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = partition.omega_len();
    let mut rows = vec![vec![0.0; n]; partition.num_cells()];
    for (i, &c) in partition.cell_of().iter().enumerate() {
        rows[c as usize][i] = 1.0;
    }
    (rows, cell_targets.to_vec())
}

/// Indicator rows from a plain cell map.
pub fn cell_rows(cell_of: &[u32], num_cells: usize, cell_targets: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = cell_of.len();
    let mut rows = vec![vec![0.0; n]; num_cells];
    for (i, &c) in cell_of.iter().enumerate() {
        rows[c as usize][i] = 1.0;
    }
    (rows, cell_targets.to_vec())
}
