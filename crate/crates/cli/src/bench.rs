//! Wall-clock timing of the three evaluation forms on a 1D chain.

use std::time::Instant;

use anyhow::{bail, Result};
use plstm_core::grid::{chunkwise_1d, levels_for, scan_1d, SeqGates};
use plstm_core::kernel::{apply_gating, forward_recurrent, GatingMatrix, Qkv, StmParams};
use plstm_core::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Recurrent,
    Parallel,
    Chunkwise,
}

impl Form {
    fn name(self) -> &'static str {
        match self {
            Form::Recurrent => "recurrent",
            Form::Parallel => "parallel",
            Form::Chunkwise => "chunkwise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub form: Form,
    pub wall_ns: u128,
    pub merge_levels: usize,
}

/// Agreement required between every form and the recurrent one before timing.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

/// A size or repetition count the requested forms cannot run.
#[derive(Debug)]
pub struct SizeError(pub String);

impl std::fmt::Display for SizeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SizeError {}

/// Outcome of a cross-check that exceeded [`CROSS_CHECK_TOL`].
#[derive(Debug)]
pub struct Mismatch {
    pub size: usize,
    pub form: Form,
    pub error: f64,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} form differs from recurrent at size {} by {:e}", self.form.name(), self.size, self.error)
    }
}

impl std::error::Error for Mismatch {}

struct Instance {
    gates: SeqGates,
    qkv: Qkv,
    params: StmParams,
    dag: plstm_core::Dag,
}

fn instance(size: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = SeqGates::random(size, &mut rng);
    let qkv = Qkv::random(size, 4, 4, &mut rng);
    let (dag, g) = gates.to_dag_gates();
    let params = StmParams { gates: g, qkv: qkv.clone() };
    Instance { gates, qkv, params, dag }
}

fn run(inst: &Instance, form: Form, chunk_level: usize) -> Result<Mat> {
    Ok(match form {
        Form::Recurrent => forward_recurrent(&inst.dag, &inst.params)?.1,
        Form::Parallel => {
            let out = scan_1d(&inst.gates, levels_for(inst.gates.len()))?;
            apply_gating(&GatingMatrix::from_mat(&out.gating), &inst.qkv)?
        }
        Form::Chunkwise => chunkwise_1d(&inst.gates, &inst.qkv, chunk_level)?,
    })
}

/// `chunk_level` is clamped to the number of levels of each size; `None`
/// picks half of them.
pub fn bench(forms: &[Form], sizes: &[usize], reps: usize, chunk_level: Option<usize>, seed: u64) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        bail!(SizeError("--reps must be positive".into()));
    }
    for &s in sizes {
        if s == 0 || (forms.contains(&Form::Parallel) && !s.is_power_of_two()) {
            bail!(SizeError(format!("size {s} is not a positive power of two")));
        }
    }
    let mut rows = Vec::new();
    for &size in sizes {
        let inst = instance(size, seed);
        let levels = levels_for(size);
        let chunk = chunk_level.unwrap_or(levels / 2).min(levels);
        let reference = run(&inst, Form::Recurrent, 0)?;
        for &form in forms {
            let error = run(&inst, form, chunk)?.max_abs_diff(&reference);
            if error > CROSS_CHECK_TOL {
                bail!(Mismatch { size, form, error });
            }
        }
        for &form in forms {
            let mut times: Vec<u128> = (0..reps)
                .map(|_| {
                    let t = Instant::now();
                    let out = run(&inst, form, chunk);
                    let ns = t.elapsed().as_nanos();
                    std::hint::black_box(out).map(|_| ns)
                })
                .collect::<Result<_>>()?;
            times.sort_unstable();
            let merge_levels = match form {
                Form::Recurrent => 0,
                Form::Parallel => levels,
                Form::Chunkwise => chunk,
            };
            rows.push(BenchRow { size, form, wall_ns: times[times.len() / 2], merge_levels });
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], mut out: impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "size,form,wall_ns,merge_levels")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.size, r.form.name(), r.wall_ns, r.merge_levels)?;
    }
    Ok(())
}
