//! `SWCL` demonstration files.
//!
//! Layout, little-endian: magic, version u16, task u8, n u16, L u32, K u32,
//! T f64, arena half-extent f64, wall flag u8 followed by
//! `[y, gap_center, gap_half_width, thickness]` when set, comm radius f64,
//! u_max f64, goals `L·n·2` f64, states `L·(K+1)·n·4` f64, CRC32 of all
//! preceding bytes.

use std::path::Path;

use super::binary::{count, Reader, Writer};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::world::{SwarmState, Task, Trajectory, Wall, WorldSpec, STATE_DIM};

pub const DATASET_MAGIC: [u8; 4] = *b"SWCL";
pub const DATASET_VERSION: u16 = 1;

/// Header fields of a dataset file.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub version: u16,
    pub task: Task,
    pub n: usize,
    pub trajectories: usize,
    pub horizon: usize,
    pub dt: f64,
    pub arena_half_extent: f64,
    pub wall: Option<Wall<f64>>,
    pub comm_radius: f64,
    pub u_max: f64,
}

impl std::fmt::Display for DatasetHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "version: {}", self.version)?;
        writeln!(f, "task: {}", self.task.name())?;
        writeln!(f, "n: {}", self.n)?;
        writeln!(f, "L: {}", self.trajectories)?;
        writeln!(f, "K: {}", self.horizon)?;
        writeln!(f, "T: {}", self.dt)?;
        writeln!(f, "arena_half_extent: {}", self.arena_half_extent)?;
        match &self.wall {
            Some(w) => writeln!(
                f,
                "wall: y={} gap_center={} gap_half_width={} thickness={}",
                w.y, w.gap_center, w.gap_half_width, w.thickness
            )?,
            None => writeln!(f, "wall: none")?,
        }
        writeln!(f, "comm_radius: {}", self.comm_radius)?;
        write!(f, "u_max: {}", self.u_max)
    }
}

pub fn encode_dataset<T: Real>(dataset: &Dataset<T>) -> Result<Vec<u8>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let world = dataset.world();
    let mut w = Writer::default();
    w.bytes(&DATASET_MAGIC);
    w.u16(DATASET_VERSION);
    w.u8(world.task.id());
    w.u16(count(dataset.n(), "n")?);
    w.u32(count(dataset.len(), "L")?);
    w.u32(count(dataset.horizon(), "K")?);
    w.f64(world.dt.as_f64());
    w.f64(world.arena_half_extent.as_f64());
    match &world.wall {
        Some(wall) => {
            w.u8(1);
            for v in [wall.y, wall.gap_center, wall.gap_half_width, wall.thickness] {
                w.f64(v.as_f64());
            }
        }
        None => w.u8(0),
    }
    w.f64(world.comm_radius.as_f64());
    w.f64(world.u_max.as_f64());
    for t in dataset.trajectories() {
        for g in &t.world.goals {
            w.f64(g[0].as_f64());
            w.f64(g[1].as_f64());
        }
    }
    for t in dataset.trajectories() {
        for s in &t.samples {
            for v in s.as_slice() {
                w.f64(v.as_f64());
            }
        }
    }
    Ok(w.finish())
}

fn read_header(r: &mut Reader<'_>) -> Result<DatasetHeader> {
    let task_id = r.u8()?;
    let task = Task::from_id(task_id).ok_or_else(|| Error::Malformed(format!("unknown task id {task_id}")))?;
    let n = r.u16()? as usize;
    let trajectories = r.u32()? as usize;
    let horizon = r.u32()? as usize;
    let dt = r.f64()?;
    let arena_half_extent = r.f64()?;
    let wall = match r.u8()? {
        0 => None,
        1 => Some(Wall {
            y: r.f64()?,
            gap_center: r.f64()?,
            gap_half_width: r.f64()?,
            thickness: r.f64()?,
        }),
        flag => return Err(Error::Malformed(format!("wall flag {flag}"))),
    };
    Ok(DatasetHeader {
        version: DATASET_VERSION,
        task,
        n,
        trajectories,
        horizon,
        dt,
        arena_half_extent,
        wall,
        comm_radius: r.f64()?,
        u_max: r.f64()?,
    })
}

/// Verifies the file and returns its header.
pub fn decode_header(bytes: &[u8]) -> Result<DatasetHeader> {
    let mut r = Reader::open(bytes, DATASET_MAGIC, DATASET_VERSION)?;
    read_header(&mut r)
}

pub fn decode_dataset<T: Real>(bytes: &[u8]) -> Result<(DatasetHeader, Dataset<T>)> {
    let mut r = Reader::open(bytes, DATASET_MAGIC, DATASET_VERSION)?;
    let h = read_header(&mut r)?;
    if h.n == 0 || h.trajectories == 0 || h.horizon == 0 {
        return Err(Error::Malformed("zero robots, trajectories or horizon".into()));
    }
    let goal_len = h.trajectories.checked_mul(h.n * 2);
    let state_len = h
        .trajectories
        .checked_mul(h.horizon + 1)
        .and_then(|v| v.checked_mul(h.n * STATE_DIM));
    let (goal_len, state_len) = match (goal_len, state_len) {
        (Some(g), Some(s)) if g.checked_add(s).is_some() => (g, s),
        _ => return Err(Error::Malformed("declared sizes overflow".into())),
    };
    r.expect_f64s(goal_len + state_len)?;
    let goals = r.f64s(goal_len)?;
    let states = r.f64s(state_len)?;
    r.end()?;

    let lit = |v: f64| T::lit(v);
    let template = WorldSpec {
        task: h.task,
        arena_half_extent: lit(h.arena_half_extent),
        wall: h.wall.map(|w| Wall {
            y: lit(w.y),
            gap_center: lit(w.gap_center),
            gap_half_width: lit(w.gap_half_width),
            thickness: lit(w.thickness),
        }),
        goals: Vec::new(),
        comm_radius: lit(h.comm_radius),
        dt: lit(h.dt),
        u_max: lit(h.u_max),
        robot_radius: T::lit(WorldSpec::<T>::DEFAULT_ROBOT_RADIUS),
    };
    template.validate().map_err(|e| Error::Malformed(e.to_string()))?;
    let per_sample = h.n * STATE_DIM;
    let per_traj = per_sample * (h.horizon + 1);
    let trajectories = (0..h.trajectories)
        .map(|l| {
            let g = &goals[l * h.n * 2..(l + 1) * h.n * 2];
            let world = template.with_goals(g.chunks_exact(2).map(|c| [lit(c[0]), lit(c[1])]).collect());
            let samples = states[l * per_traj..(l + 1) * per_traj]
                .chunks_exact(per_sample)
                .map(|c| SwarmState::new(c.iter().map(|&v| lit(v)).collect()))
                .collect::<Result<Vec<_>>>()?;
            Trajectory::new(world, samples)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Malformed(e.to_string()))?;
    let dataset = Dataset::new(template, h.horizon, trajectories)?;
    Ok((h, dataset))
}

/// Writes atomically: the file appears complete or not at all.
pub fn write_dataset<T: Real>(dataset: &Dataset<T>, path: &Path) -> Result<()> {
    let bytes = encode_dataset(dataset)?;
    super::write_atomic(path, &bytes)
}

pub fn read_dataset<T: Real>(path: &Path) -> Result<Dataset<T>> {
    let bytes = std::fs::read(path)?;
    Ok(decode_dataset(&bytes)?.1)
}
