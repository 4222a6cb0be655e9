//! Sparse SDPA (`.dat-s`) writer.
//!
//! The standard form `min <C, X> s.t. <A_k, X> = b_k` is written as the SDPA dual
//! `max <F_0, Y> s.t. <F_k, Y> = c_k` with `F_0 = -C`, `F_k = A_k`, `c_k = b_k`.
//! Nonnegative variables form one diagonal block; free variables are split into
//! a difference of two nonnegative ones in a second diagonal block.

use std::fmt::Write;

use super::ipm::StandardForm;

pub(crate) fn write(sf: &StandardForm) -> String {
    let mut out = String::new();
    let mut dims: Vec<i64> = sf.psd_dims.iter().map(|&t| t as i64).collect();
    let lin_block = (sf.n_lin > 0).then(|| {
        dims.push(-(sf.n_lin as i64));
        dims.len()
    });
    let free_block = (sf.n_free > 0).then(|| {
        dims.push(-(2 * sf.n_free as i64));
        dims.len()
    });
    let _ = writeln!(out, "{}", sf.m);
    let _ = writeln!(out, "{}", dims.len());
    let _ = writeln!(
        out,
        "{}",
        dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(
        out,
        "{}",
        sf.b.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" ")
    );

    // entries per (matrix, block, i, j), upper triangle, 1-based
    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (blk, c) in sf.c_psd.iter().enumerate() {
        for i in 0..c.nrows() {
            for j in i..c.ncols() {
                if c[(i, j)] != 0.0 {
                    entries.push((0, blk + 1, i + 1, j + 1, -c[(i, j)]));
                }
            }
        }
    }
    if let Some(lb) = lin_block {
        for (j, &c) in sf.c_lin.iter().enumerate() {
            if c != 0.0 {
                entries.push((0, lb, j + 1, j + 1, -c));
            }
        }
    }
    if let Some(fb) = free_block {
        for (j, &c) in sf.c_free.iter().enumerate() {
            if c != 0.0 {
                entries.push((0, fb, 2 * j + 1, 2 * j + 1, -c));
                entries.push((0, fb, 2 * j + 2, 2 * j + 2, c));
            }
        }
    }
    for (blk, rows) in sf.psd_rows.iter().enumerate() {
        for (k, e) in rows {
            for &(i, j, v) in e {
                entries.push((k + 1, blk + 1, j + 1, i + 1, v));
            }
        }
    }
    if let Some(lb) = lin_block {
        for (j, col) in sf.lin_cols.iter().enumerate() {
            for &(k, v) in col {
                entries.push((k + 1, lb, j + 1, j + 1, v));
            }
        }
    }
    if let Some(fb) = free_block {
        for k in 0..sf.m {
            for j in 0..sf.n_free {
                let v = sf.free_mat[(k, j)];
                if v != 0.0 {
                    entries.push((k + 1, fb, 2 * j + 1, 2 * j + 1, v));
                    entries.push((k + 1, fb, 2 * j + 2, 2 * j + 2, -v));
                }
            }
        }
    }
    entries.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    for (mat, blk, i, j, v) in entries {
        let _ = writeln!(out, "{mat} {blk} {i} {j} {}", fmt(v));
    }
    out
}

fn fmt(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}
