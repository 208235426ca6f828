//! Batch serialization.
//!
//! CSV layout: a header record `model_tag,d,p,m,n,seed`, one record with
//! those values, then `p` rows of `Z`, `m` rows of `F` and one row of `y`,
//! each row holding `n` values (row-major).
//!
//! Binary layout (little endian): magic `CHLB`, `u32` version, `u8` model
//! code, `u64` values `d, p, m, n, seed`, then `f64` entries of `Z`, `F`, `y`
//! in row-major order.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::sampler::{ModelKind, SampleBatch};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CHLB";
const VERSION: u32 = 1;

pub fn write_csv<W: Write>(batch: &SampleBatch, d: usize, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["model_tag", "d", "p", "m", "n", "seed"])?;
    w.write_record([
        batch.model.tag().to_string(),
        d.to_string(),
        batch.p().to_string(),
        batch.m().to_string(),
        batch.n().to_string(),
        batch.seed.to_string(),
    ])?;
    let fmt = |v: &f64| format!("{v:e}");
    for row in batch.z.rows().into_iter().chain(batch.f.rows()) {
        w.write_record(row.iter().map(fmt))?;
    }
    w.write_record(batch.y.iter().map(fmt))?;
    w.flush()?;
    Ok(())
}

/// Returns the batch and the input dimension `d`.
pub fn read_csv<R: Read>(input: R) -> Result<(SampleBatch, usize)> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(input);
    let mut records = r.records();
    let meta = records
        .next()
        .ok_or_else(|| Error::Format("missing metadata record".into()))??;
    if meta.len() != 6 {
        return Err(Error::Format("metadata record needs 6 fields".into()));
    }
    let model: ModelKind = meta[0].parse()?;
    let num = |i: usize| -> Result<u64> {
        meta[i]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad integer `{}`", &meta[i])))
    };
    let (d, p, m, n, seed) = (
        num(1)? as usize,
        num(2)? as usize,
        num(3)? as usize,
        num(4)? as usize,
        num(5)?,
    );
    let mut data = Vec::with_capacity((p + m + 1) * n);
    let mut rows = 0;
    for rec in records {
        let rec = rec?;
        let vals: Vec<f64> = if n == 0 {
            Vec::new()
        } else {
            rec.iter()
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad number `{v}`")))
                })
                .collect::<Result<_>>()?
        };
        if vals.len() != n {
            return Err(Error::Format(format!(
                "row {rows} has {} values, expected {n}",
                vals.len()
            )));
        }
        data.extend(vals);
        rows += 1;
    }
    if n > 0 && rows != p + m + 1 {
        return Err(Error::Format(format!(
            "expected {} data rows, found {rows}",
            p + m + 1
        )));
    }
    build(model, p, m, n, seed, data).map(|b| (b, d))
}

fn build(model: ModelKind, p: usize, m: usize, n: usize, seed: u64, data: Vec<f64>) -> Result<SampleBatch> {
    if data.len() != (p + m + 1) * n {
        return Err(Error::Format("truncated data section".into()));
    }
    let z = Array2::from_shape_vec((p, n), data[..p * n].to_vec())
        .map_err(|e| Error::Format(e.to_string()))?;
    let f = Array2::from_shape_vec((m, n), data[p * n..(p + m) * n].to_vec())
        .map_err(|e| Error::Format(e.to_string()))?;
    let y = Array1::from(data[(p + m) * n..].to_vec());
    Ok(SampleBatch {
        z,
        f,
        y,
        model,
        seed,
    })
}

pub fn write_binary<W: Write>(batch: &SampleBatch, d: usize, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[batch.model.code()])?;
    for v in [d, batch.p(), batch.m(), batch.n()] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    out.write_all(&batch.seed.to_le_bytes())?;
    for v in batch.z.iter().chain(batch.f.iter()).chain(batch.y.iter()) {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<(SampleBatch, usize)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::Format("unsupported version".into()));
    }
    let mut code = [0u8; 1];
    input.read_exact(&mut code)?;
    let model =
        ModelKind::from_code(code[0]).ok_or_else(|| Error::Format("bad model code".into()))?;
    let mut b8 = [0u8; 8];
    let mut next = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let d = next(&mut input)? as usize;
    let p = next(&mut input)? as usize;
    let m = next(&mut input)? as usize;
    let n = next(&mut input)? as usize;
    let seed = next(&mut input)?;
    let total = (p + m + 1)
        .checked_mul(n)
        .ok_or_else(|| Error::Format("size overflow".into()))?;
    let mut data = Vec::with_capacity(total);
    for _ in 0..total {
        input.read_exact(&mut b8)?;
        data.push(f64::from_le_bytes(b8));
    }
    build(model, p, m, n, seed, data).map(|b| (b, d))
}
