//! `SWCK` checkpoint files.
//!
//! Layout, little-endian: magic, version u16, architecture (embed u32,
//! encoder count u16 + widths u32, decoder count u16 + widths u32, goal flag
//! u8), task u8, n u16, parameter count u32, θ f64, Adam (lr, β1, β2, ε f64,
//! t u64, m f64, v f64), step u64, config hash u64, CRC32.

use std::path::Path;

use super::binary::{count, Reader, Writer};
use crate::autodiff::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::policy::{Architecture, PolicyParams};
use crate::scalar::Real;
use crate::trainer::Checkpoint;
use crate::world::Task;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SWCK";
pub const CHECKPOINT_VERSION: u16 = 1;

fn widths(w: &mut Writer, v: &[usize]) -> Result<()> {
    w.u16(count(v.len(), "layer count")?);
    for &x in v {
        w.u32(count(x, "layer width")?);
    }
    Ok(())
}

fn read_widths(r: &mut Reader<'_>) -> Result<Vec<usize>> {
    let len = r.u16()? as usize;
    (0..len).map(|_| Ok(r.u32()? as usize)).collect()
}

pub fn encode_checkpoint<T: Real>(ckpt: &Checkpoint<T>) -> Result<Vec<u8>> {
    let arch = &ckpt.params.arch;
    let len = ckpt.params.theta.len();
    if ckpt.adam.m.len() != len || ckpt.adam.v.len() != len {
        return Err(Error::invalid("checkpoint", "optimizer state length differs from θ"));
    }
    let mut w = Writer::default();
    w.bytes(&CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);
    w.u32(count(arch.embed_dim, "embed_dim")?);
    widths(&mut w, &arch.encoder)?;
    widths(&mut w, &arch.decoder_hidden)?;
    w.u8(arch.goal_relative as u8);
    w.u8(ckpt.task.id());
    w.u16(count(ckpt.n, "n")?);
    w.u32(count(len, "parameter count")?);
    let floats = |w: &mut Writer, v: &[T]| v.iter().for_each(|x| w.f64(x.as_f64()));
    floats(&mut w, &ckpt.params.theta);
    let c = &ckpt.adam.config;
    for v in [c.lr, c.beta1, c.beta2, c.eps] {
        w.f64(v.as_f64());
    }
    w.u64(ckpt.adam.t);
    floats(&mut w, &ckpt.adam.m);
    floats(&mut w, &ckpt.adam.v);
    w.u64(ckpt.step);
    w.u64(ckpt.config_hash);
    Ok(w.finish())
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let arch = Architecture {
        embed_dim: r.u32()? as usize,
        encoder: read_widths(&mut r)?,
        decoder_hidden: read_widths(&mut r)?,
        goal_relative: match r.u8()? {
            0 => false,
            1 => true,
            f => return Err(Error::Malformed(format!("goal flag {f}"))),
        },
    };
    let task_id = r.u8()?;
    let task = Task::from_id(task_id).ok_or_else(|| Error::Malformed(format!("unknown task id {task_id}")))?;
    let n = r.u16()? as usize;
    let len = r.u32()? as usize;
    let floats = |r: &mut Reader<'_>| -> Result<Vec<T>> { Ok(r.f64s(len)?.into_iter().map(T::lit).collect()) };
    let theta = floats(&mut r)?;
    let config = AdamConfig {
        lr: T::lit(r.f64()?),
        beta1: T::lit(r.f64()?),
        beta2: T::lit(r.f64()?),
        eps: T::lit(r.f64()?),
    };
    let t = r.u64()?;
    let m = floats(&mut r)?;
    let v = floats(&mut r)?;
    let step = r.u64()?;
    let config_hash = r.u64()?;
    r.end()?;
    let params = PolicyParams::new(arch, theta).map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(Checkpoint {
        params,
        adam: AdamState { config, m, v, t },
        step,
        config_hash,
        task,
        n,
    })
}

pub fn write_checkpoint<T: Real>(ckpt: &Checkpoint<T>, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_checkpoint(ckpt)?)
}

pub fn read_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>> {
    decode_checkpoint(&std::fs::read(path)?)
}
