//! Parallel construction inside chunks, sequential recurrence across chunks.

use crate::error::{Error, Result};
use crate::kernel::Qkv;
use crate::linalg::{dot, Mat};

use super::gates::{GridGates, SeqGates};
use super::scan1d::{levels_for, SeqLevelTensors};
use super::scan2d::{GridLevelTensors, Kind};

fn outer_into(c: &mut Mat, w: f64, k: &[f64], v: &[f64]) {
    if w == 0.0 {
        return;
    }
    for (a, &ka) in k.iter().enumerate() {
        for (b, &vb) in v.iter().enumerate() {
            c[(a, b)] += w * ka * vb;
        }
    }
}

fn axpy(y: &mut Mat, a: f64, x: &Mat) {
    if a == 0.0 {
        return;
    }
    for (yv, xv) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yv += a * xv;
    }
}

/// `q · C` as a row of length `V`.
fn read(q: &[f64], c: &Mat, w: f64, out: &mut [f64]) {
    if w == 0.0 {
        return;
    }
    for (b, o) in out.iter_mut().enumerate() {
        let qc: f64 = (0..q.len()).map(|a| q[a] * c[(a, b)]).sum();
        *o += w * qc;
    }
}

/// Intra-chunk attention-like term `Σ_{n'} (q_n·k_{n'}) G[n'][n] v_{n'}`.
fn intra(g: &Mat, nodes: &[usize], qkv: &Qkv, hidden: &mut Mat) {
    let vd = qkv.value_dim();
    for (j, &dst) in nodes.iter().enumerate() {
        let q = qkv.query.row(dst);
        let mut h = vec![0.0; vd];
        for (i, &src) in nodes.iter().enumerate() {
            let gv = g[(i, j)];
            if gv == 0.0 {
                continue;
            }
            let coef = dot(q, qkv.key.row(src)) * gv;
            for (hb, &vb) in h.iter_mut().zip(qkv.value.row(src)) {
                *hb += coef * vb;
            }
        }
        for (o, hb) in hidden.as_mut_slice()[dst * vd..(dst + 1) * vd].iter_mut().zip(h) {
            *o += hb;
        }
    }
}

/// Chunks of `2^chunk_level` nodes built in parallel, then a recurrence over
/// one `K×V` state between consecutive chunks. `chunk_level = 0` is the plain
/// recurrent form.
pub fn chunkwise_1d(gates: &SeqGates, qkv: &Qkv, chunk_level: usize) -> Result<Mat> {
    let n = gates.len();
    qkv.check(n)?;
    let levels = levels_for(n);
    if chunk_level > levels {
        return Err(Error::Range(format!("chunk level {chunk_level} exceeds {levels} levels")));
    }
    let padded_len = 1 << levels;
    let padded = gates.padded(padded_len);
    let mut t = SeqLevelTensors::level0(&padded)?;
    for _ in 0..chunk_level {
        t = t.merge();
    }
    let s = t.block_size();
    let (kd, vd) = (qkv.key_dim(), qkv.value_dim());
    let mut hidden = Mat::zeros(n, vd);
    let mut state = Mat::zeros(kd, vd);
    for (b, block) in t.blocks.iter().enumerate() {
        let nodes: Vec<usize> = (b * s..((b + 1) * s).min(n)).collect();
        if nodes.is_empty() {
            break;
        }
        intra(&block.gating, &nodes, qkv, &mut hidden);
        for (j, &dst) in nodes.iter().enumerate() {
            read(qkv.query.row(dst), &state, block.mark[j], &mut hidden.as_mut_slice()[dst * vd..(dst + 1) * vd]);
        }
        let mut next = Mat::zeros(kd, vd);
        axpy(&mut next, block.transition, &state);
        for (i, &src) in nodes.iter().enumerate() {
            outer_into(&mut next, block.source[i], qkv.key.row(src), qkv.value.row(src));
        }
        state = next;
    }
    Ok(hidden)
}

/// 2D analogue: chunks are `2^chunk_level`-sided blocks, visited row-major;
/// each carries one state per boundary row on its right edge and per boundary
/// column on its bottom edge.
pub fn chunkwise_2d(gates: &GridGates, qkv: &Qkv, chunk_level: usize) -> Result<Mat> {
    let (w, h) = (gates.width, gates.height);
    qkv.check(w * h)?;
    let levels = levels_for(w.max(h));
    if chunk_level > levels {
        return Err(Error::Range(format!("chunk level {chunk_level} exceeds {levels} levels")));
    }
    let side = 1 << levels;
    let mut t = GridLevelTensors::level0(&gates.padded(side, side))?;
    for _ in 0..chunk_level {
        t = t.merge();
    }
    let s = t.block_size();
    let blocks_per_side = t.side;
    let (kd, vd) = (qkv.key_dim(), qkv.value_dim());
    let zero = Mat::zeros(kd, vd);
    let mut hidden = Mat::zeros(w * h, vd);
    // right_exit[block][row], bottom_exit[block][col]
    let mut right_exit: Vec<Vec<Mat>> = vec![Vec::new(); t.blocks.len()];
    let mut bottom_exit: Vec<Vec<Mat>> = vec![Vec::new(); t.blocks.len()];
    for by in 0..blocks_per_side {
        for bx in 0..blocks_per_side {
            let b = by * blocks_per_side + bx;
            let block = &t.blocks[b];
            // Local node index → original node id, when inside the grid.
            let local: Vec<Option<usize>> = (0..s * s)
                .map(|i| {
                    let (x, y) = (bx * s + i % s, by * s + i / s);
                    (x < w && y < h).then_some(y * w + x)
                })
                .collect();
            let left_in: Vec<&Mat> =
                (0..s).map(|a| if bx > 0 { &right_exit[b - 1][a] } else { &zero }).collect();
            let top_in: Vec<&Mat> =
                (0..s).map(|a| if by > 0 { &bottom_exit[b - blocks_per_side][a] } else { &zero }).collect();

            let nodes: Vec<usize> = local.iter().flatten().copied().collect();
            let inside: Vec<usize> = (0..s * s).filter(|&i| local[i].is_some()).collect();
            let g = Mat::from_fn(inside.len(), inside.len(), |i, j| block.get(Kind::G)[(inside[i], inside[j])]);
            intra(&g, &nodes, qkv, &mut hidden);
            for (i, node) in local.iter().enumerate() {
                let Some(dst) = *node else { continue };
                let q = qkv.query.row(dst);
                let out = &mut hidden.as_mut_slice()[dst * vd..(dst + 1) * vd];
                for a in 0..s {
                    read(q, left_in[a], block.get(Kind::MRight)[(a, i)], out);
                    read(q, top_in[a], block.get(Kind::MDown)[(a, i)], out);
                }
            }
            let exits = |s_kind: Kind, from_left: Kind, from_top: Kind| -> Vec<Mat> {
                (0..s)
                    .map(|c| {
                        let mut m = Mat::zeros(kd, vd);
                        for a in 0..s {
                            axpy(&mut m, block.get(from_left)[(a, c)], left_in[a]);
                            axpy(&mut m, block.get(from_top)[(a, c)], top_in[a]);
                        }
                        for (i, node) in local.iter().enumerate() {
                            if let Some(src) = *node {
                                outer_into(&mut m, block.get(s_kind)[(i, c)], qkv.key.row(src), qkv.value.row(src));
                            }
                        }
                        m
                    })
                    .collect()
            };
            let right = exits(Kind::SRight, Kind::TRR, Kind::TDR);
            let bottom = exits(Kind::SDown, Kind::TRD, Kind::TDD);
            right_exit[b] = right;
            bottom_exit[b] = bottom;
        }
    }
    Ok(hidden)
}
