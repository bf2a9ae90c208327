use serde::{Deserialize, Serialize};

use super::raptor::{CodecParams, CodedBlock, RaptorGenerator};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gf2::{Echelon, Gf2Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeResult {
    /// The whole generation, one payload row per source packet.
    Full(Gf2Matrix),
    /// Source indices that are individually recoverable, ascending.
    Partial(Vec<usize>),
}

impl DecodeResult {
    pub fn is_full(&self) -> bool {
        matches!(self, DecodeResult::Full(_))
    }

    pub fn recovered(&self) -> usize {
        match self {
            DecodeResult::Full(p) => p.rows(),
            DecodeResult::Partial(idx) => idx.len(),
        }
    }
}

fn check_width(rows: &Gf2Matrix, g: usize) -> Result<()> {
    if rows.cols() != g {
        return Err(Error::WidthMismatch {
            expected: g,
            found: rows.cols(),
        });
    }
    Ok(())
}

/// Maximum-likelihood erasure decoding by Gaussian elimination.
pub fn ml_decode(received: &CodedBlock, g: usize) -> Result<DecodeResult> {
    check_width(&received.generator_rows, g)?;
    let mut ech = Echelon::new(g);
    for r in 0..received.len() {
        ech.insert_with(received.generator_rows.row_words(r), received.packets.row_words(r));
        if ech.is_full_rank() {
            break;
        }
    }
    if !ech.is_full_rank() {
        return Ok(DecodeResult::Partial(ech.unit_columns()));
    }
    let mut out = Gf2Matrix::zeros(0, received.packets.cols());
    for i in 0..g {
        let payload = ech.solved_payload(i).expect("full rank basis is the identity");
        out.push_row(payload)?;
    }
    Ok(DecodeResult::Full(out))
}

/// Number of source indices `i` with `e_i` in the row space of `rows`.
pub fn recoverable_count(rows: &Gf2Matrix, g: usize) -> Result<usize> {
    check_width(rows, g)?;
    let mut ech = Echelon::new(g);
    for r in 0..rows.rows() {
        ech.insert(rows.row_words(r));
    }
    Ok(ech.unit_count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub received: usize,
    pub mean_recovered: f64,
    pub decode_prob: f64,
}

/// Monte Carlo decode curve for `k = 0..=max_received` received packets.
///
/// Trial `t` uses the code seeded with `derive_seed(params.seed, t)` and
/// receives its packets in encoding order, so each trial contributes one
/// nested sequence of prefixes.
pub fn decode_curve(params: &CodecParams, max_received: usize, trials: usize, exec: Execution) -> Result<Vec<CurvePoint>> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::params("decode curve needs at least one trial"));
    }
    let base = params.seed;
    curve_from_rows(params.g, max_received, trials, exec, |t| {
        let gen = RaptorGenerator::new(params.clone().with_seed(rng::derive_seed(base, t as u64)))
            .expect("params validated above");
        move |esi| gen.row(esi as u64)
    })
}

/// Decode curve over an arbitrary row source: `make_trial(t)` returns the
/// function producing row `k` of trial `t`.
pub fn curve_from_rows<M, R>(g: usize, max_received: usize, trials: usize, exec: Execution, make_trial: M) -> Result<Vec<CurvePoint>>
where
    M: Fn(usize) -> R + Sync + Send,
    R: FnMut(usize) -> Vec<u64>,
{
    if trials == 0 {
        return Err(Error::params("decode curve needs at least one trial"));
    }
    let per_trial = exec.map(trials, |t| {
        let mut row = make_trial(t);
        let mut ech = Echelon::new(g);
        let mut units = vec![0usize; max_received + 1];
        let mut full = vec![false; max_received + 1];
        for k in 1..=max_received {
            if !ech.is_full_rank() {
                ech.insert(&row(k - 1));
            }
            units[k] = ech.unit_count();
            full[k] = ech.is_full_rank();
        }
        (units, full)
    });
    let n = trials as f64;
    Ok((0..=max_received)
        .map(|k| CurvePoint {
            received: k,
            mean_recovered: per_trial.iter().map(|(u, _)| u[k] as f64).sum::<f64>() / n,
            decode_prob: per_trial.iter().filter(|(_, f)| f[k]).count() as f64 / n,
        })
        .collect())
}

pub fn write_curve_csv<W: std::io::Write>(mut w: W, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(w, "received,mean_recovered,decode_prob")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.received, p.mean_recovered, p.decode_prob)?;
    }
    Ok(())
}
