//! Shared distributed control policy.
//!
//! Each neighbor's relative state is encoded independently, the embeddings
//! are pooled with softmax attention over the neighborhood, and a decoder
//! maps the pooled vector to a bounded acceleration command. The pooled sum
//! runs in ascending neighbor id, so the output does not depend on the order
//! in which entries are presented.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::perception::LocalObservation;
use crate::scalar::Real;
use crate::world::STATE_DIM;

pub const CONTROL_DIM: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    pub embed_dim: usize,
    /// Output widths of the encoder layers; the last equals `embed_dim`.
    pub encoder: Vec<usize>,
    /// Hidden widths of the decoder; a final layer to the control is implied.
    pub decoder_hidden: Vec<usize>,
    /// Append the goal token to the decoder input.
    pub goal_relative: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            encoder: vec![16, 16],
            decoder_hidden: vec![16],
            goal_relative: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Dense {
    offset: usize,
    fan_in: usize,
    fan_out: usize,
}

impl Dense {
    fn weights(&self) -> usize {
        self.fan_in * self.fan_out
    }

    fn len(&self) -> usize {
        self.weights() + self.fan_out
    }
}

#[derive(Clone, Debug)]
struct Layout {
    encoder: Vec<Dense>,
    key: Dense,
    score: usize,
    decoder: Vec<Dense>,
    total: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.encoder.is_empty() {
            return Err(Error::invalid("architecture", "embedding and encoder must be non-empty"));
        }
        if self.encoder.iter().chain(&self.decoder_hidden).any(|&d| d == 0) {
            return Err(Error::invalid("architecture", "zero-width layer"));
        }
        if *self.encoder.last().unwrap() != self.embed_dim {
            return Err(Error::invalid("architecture", "last encoder width must equal the embedding size"));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let mut offset = 0;
        let mut dense = |fan_in, fan_out| {
            let d = Dense { offset, fan_in, fan_out };
            offset += d.len();
            d
        };
        let mut encoder = Vec::new();
        let mut width = STATE_DIM;
        for &w in &self.encoder {
            encoder.push(dense(width, w));
            width = w;
        }
        let h = self.embed_dim;
        let key = dense(h, h);
        let score = offset;
        offset += h;
        let mut dense = |fan_in, fan_out| {
            let d = Dense { offset, fan_in, fan_out };
            offset += d.len();
            d
        };
        let mut decoder = Vec::new();
        let mut width = h + if self.goal_relative { STATE_DIM } else { 0 };
        for &w in &self.decoder_hidden {
            decoder.push(dense(width, w));
            width = w;
        }
        decoder.push(dense(width, CONTROL_DIM));
        Layout {
            encoder,
            key,
            score,
            decoder,
            total: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T> {
    pub arch: Architecture,
    pub theta: Vec<T>,
}

impl<T: Real> PolicyParams<T> {
    pub fn new(arch: Architecture, theta: Vec<T>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::invalid(
                "policy",
                format!("{} parameters given, architecture needs {}", theta.len(), arch.param_count()),
            ));
        }
        Ok(Self { arch, theta })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let count = arch.param_count();
        Self::new(arch, vec![T::zero(); count])
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<T: Real>(arch: &Architecture, seed: u64) -> Result<PolicyParams<T>> {
    arch.validate()?;
    let layout = arch.layout();
    let mut theta = vec![T::zero(); layout.total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |offset: usize, count: usize, fan_in: usize, fan_out: usize| {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut theta[offset..offset + count] {
            *w = T::lit(rng.gen_range(-bound..=bound));
        }
    };
    for d in layout.encoder.iter().chain([&layout.key]) {
        fill(d.offset, d.weights(), d.fan_in, d.fan_out);
    }
    fill(layout.score, arch.embed_dim, arch.embed_dim, 1);
    for d in &layout.decoder {
        fill(d.offset, d.weights(), d.fan_in, d.fan_out);
    }
    PolicyParams::new(arch.clone(), theta)
}

/// Policy weights sliced out of a flat parameter node on one tape.
#[derive(Clone, Debug)]
pub struct BoundPolicy {
    arch: Architecture,
    encoder: Vec<(Var, Var)>,
    key: (Var, Var),
    score: Var,
    decoder: Vec<(Var, Var)>,
}

impl BoundPolicy {
    /// `theta` must be a flat vector node holding every parameter.
    pub fn bind<T: Real>(tape: &mut Tape<T>, theta: Var, arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        if tape.value(theta).shape() != [layout.total] {
            return Err(Error::Shape {
                op: "bind",
                lhs: tape.value(theta).shape().to_vec(),
                rhs: vec![layout.total],
            });
        }
        let dense = |tape: &mut Tape<T>, d: &Dense| -> Result<(Var, Var)> {
            let w = tape.slice(theta, 0, d.offset, d.weights())?;
            let w = tape.reshape(w, &[d.fan_in, d.fan_out])?;
            let b = tape.slice(theta, 0, d.offset + d.weights(), d.fan_out)?;
            let b = tape.reshape(b, &[1, d.fan_out])?;
            Ok((w, b))
        };
        let encoder = layout.encoder.iter().map(|d| dense(tape, d)).collect::<Result<_>>()?;
        let key = dense(tape, &layout.key)?;
        let score = tape.slice(theta, 0, layout.score, arch.embed_dim)?;
        let score = tape.reshape(score, &[arch.embed_dim, 1])?;
        let decoder = layout.decoder.iter().map(|d| dense(tape, d)).collect::<Result<_>>()?;
        Ok(Self {
            arch: arch.clone(),
            encoder,
            key,
            score,
            decoder,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    /// Controls for a batch of robots.
    ///
    /// `rows` is `M × 4`: the relative neighbor states of robot 0, then robot
    /// 1, …, with `counts[i]` rows for robot `i`. `goal` is `n × 4` and must
    /// be present exactly when the architecture uses the goal token.
    /// Returns `n × 2`.
    pub fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        rows: Var,
        counts: &[usize],
        goal: Option<Var>,
        u_max: T,
    ) -> Result<Var> {
        let total: usize = counts.iter().sum();
        if tape.value(rows).shape() != [total, STATE_DIM] {
            return Err(Error::Shape {
                op: "policy_forward",
                lhs: tape.value(rows).shape().to_vec(),
                rhs: vec![total, STATE_DIM],
            });
        }
        if counts.contains(&0) {
            return Err(Error::invalid("policy_forward", "empty neighborhood"));
        }
        if goal.is_some() != self.arch.goal_relative {
            return Err(Error::invalid("policy_forward", "goal token presence disagrees with architecture"));
        }

        let ones_m = tape.constant(Tensor::filled(&[total, 1], T::one()))?;
        let mut h = rows;
        for &layer in &self.encoder {
            h = dense(tape, h, layer, ones_m)?;
            h = tape.tanh(h)?;
        }
        let embeddings = h;
        let keys = dense(tape, embeddings, self.key, ones_m)?;
        let keys = tape.tanh(keys)?;
        let scores = tape.matmul(keys, self.score)?;

        let mut pooled = Vec::with_capacity(counts.len());
        let mut offset = 0;
        for &m in counts {
            let s = tape.slice(scores, 0, offset, m)?;
            let s = tape.reshape(s, &[1, m])?;
            let attention = tape.softmax(s)?;
            let e = tape.slice(embeddings, 0, offset, m)?;
            pooled.push(tape.matmul(attention, e)?);
            offset += m;
        }
        let mut z = tape.concat(&pooled, 0)?;
        if let Some(g) = goal {
            z = tape.concat(&[z, g], 1)?;
        }
        let ones_n = tape.constant(Tensor::filled(&[counts.len(), 1], T::one()))?;
        let last = self.decoder.len() - 1;
        for (l, &layer) in self.decoder.iter().enumerate() {
            z = dense(tape, z, layer, ones_n)?;
            if l < last {
                z = tape.tanh(z)?;
            }
        }
        let z = tape.tanh(z)?;
        tape.scale(z, u_max)
    }
}

fn dense<T: Real>(tape: &mut Tape<T>, x: Var, (w, b): (Var, Var), ones: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let bias = tape.matmul(ones, b)?;
    tape.add(xw, bias)
}

/// Flattens observations into the `rows`/`counts`/`goal` layout expected by
/// [`BoundPolicy::forward`], ordering each neighborhood by ascending id.
pub fn pack_observations<T: Real>(obs: &[LocalObservation<T>]) -> (Tensor<T>, Vec<usize>, Option<Tensor<T>>) {
    let mut rows = Vec::new();
    let mut counts = Vec::with_capacity(obs.len());
    for o in obs {
        let mut order: Vec<usize> = (0..o.neighbors.len()).collect();
        order.sort_by_key(|&r| o.neighbors[r]);
        for r in order {
            rows.extend_from_slice(&o.relative[r]);
        }
        counts.push(o.neighbors.len());
    }
    let total = rows.len() / STATE_DIM;
    let rows = Tensor::matrix(total, STATE_DIM, rows).expect("rows are 4-wide");
    let goal = if obs.iter().all(|o| o.goal.is_some()) && !obs.is_empty() {
        let g: Vec<T> = obs.iter().flat_map(|o| o.goal.unwrap()).collect();
        Some(Tensor::matrix(obs.len(), STATE_DIM, g).expect("goal rows are 4-wide"))
    } else {
        None
    };
    (rows, counts, goal)
}

/// Controls for several robots from their observations, without gradients.
pub fn policy_forward_batch<T: Real>(
    params: &PolicyParams<T>,
    obs: &[LocalObservation<T>],
    u_max: T,
) -> Result<Vec<[T; 2]>> {
    if obs.iter().any(|o| o.neighbors.is_empty() || o.neighbors.len() != o.relative.len()) {
        return Err(Error::invalid("policy_forward", "malformed observation"));
    }
    let (rows, counts, goal) = pack_observations(obs);
    let goal = if params.arch.goal_relative {
        Some(goal.ok_or_else(|| Error::invalid("policy_forward", "architecture expects a goal token"))?)
    } else {
        None
    };
    let mut tape = Tape::new();
    let theta = tape.constant(Tensor::vector(params.theta.clone()))?;
    let bound = BoundPolicy::bind(&mut tape, theta, &params.arch)?;
    let rows = tape.constant(rows)?;
    let goal = goal.map(|g| tape.constant(g)).transpose()?;
    let u = bound.forward(&mut tape, rows, &counts, goal, u_max)?;
    Ok(tape
        .value(u)
        .data()
        .chunks(CONTROL_DIM)
        .map(|c| [c[0], c[1]])
        .collect())
}

/// `u_i = π_θ(y_i)`.
pub fn policy_forward<T: Real>(params: &PolicyParams<T>, obs: &LocalObservation<T>, u_max: T) -> Result<[T; 2]> {
    Ok(policy_forward_batch(params, std::slice::from_ref(obs), u_max)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(rel: Vec<[f64; 4]>, ids: Vec<usize>) -> LocalObservation<f64> {
        LocalObservation {
            robot: ids[0],
            neighbors: ids,
            relative: rel,
            goal: None,
        }
    }

    /// Independent count: weights plus biases for each dense layer, plus the
    /// attention score vector.
    fn counted(embed: usize, enc: &[usize], dec_hidden: &[usize], goal: bool) -> usize {
        let mut n = 0;
        let mut w = 4;
        for &o in enc {
            n += w * o + o;
            w = o;
        }
        n += embed * embed + embed; // key projection
        n += embed; // score vector
        let mut w = embed + if goal { 4 } else { 0 };
        for &o in dec_hidden {
            n += w * o + o;
            w = o;
        }
        n + w * 2 + 2
    }

    #[test]
    fn default_parameter_count() {
        let arch = Architecture::default();
        let expected = 16 * 4 + 16 + 16 * 16 + 16 + 16 * 16 + 16 + 16 + 16 * 16 + 16 + 2 * 16 + 2;
        assert_eq!(expected, 946);
        assert_eq!(arch.param_count(), expected);
        assert_eq!(arch.param_count(), counted(16, &[16, 16], &[16], false));
        let goal = Architecture {
            goal_relative: true,
            ..Architecture::default()
        };
        assert_eq!(goal.param_count(), counted(16, &[16, 16], &[16], true));
        let odd = Architecture {
            embed_dim: 8,
            encoder: vec![5, 8],
            decoder_hidden: vec![7, 3],
            goal_relative: false,
        };
        assert_eq!(odd.param_count(), counted(8, &[5, 8], &[7, 3], false));
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = Architecture::default();
        let a = init_params::<f64>(&arch, 11).unwrap();
        let b = init_params::<f64>(&arch, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params::<f64>(&arch, 12).unwrap());
        let layout = arch.layout();
        for d in layout.encoder.iter().chain([&layout.key]).chain(&layout.decoder) {
            let biases = &a.theta[d.offset + d.weights()..d.offset + d.len()];
            assert!(biases.iter().all(|&b| b == 0.0));
            let bound = (6.0 / (d.fan_in + d.fan_out) as f64).sqrt();
            assert!(a.theta[d.offset..d.offset + d.weights()].iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn zero_width_layer_is_rejected() {
        let arch = Architecture {
            decoder_hidden: vec![0],
            ..Architecture::default()
        };
        assert!(init_params::<f64>(&arch, 0).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_control() {
        let p = PolicyParams::<f64>::zeros(Architecture::default()).unwrap();
        let o = obs(vec![[0.0; 4], [0.5, -1.0, 0.2, 0.1]], vec![0, 1]);
        assert_eq!(policy_forward(&p, &o, 1.0).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn entry_order_does_not_matter() {
        let p = init_params::<f64>(&Architecture::default(), 3).unwrap();
        let a = obs(vec![[0.0; 4], [0.5, -1.0, 0.2, 0.1], [-0.3, 0.4, 0.0, 1.0]], vec![1, 0, 2]);
        let b = obs(vec![[-0.3, 0.4, 0.0, 1.0], [0.0; 4], [0.5, -1.0, 0.2, 0.1]], vec![2, 1, 0]);
        assert_eq!(policy_forward(&p, &a, 1.0).unwrap(), policy_forward(&p, &b, 1.0).unwrap());
    }

    #[test]
    fn goal_token_required_when_configured() {
        let arch = Architecture {
            goal_relative: true,
            ..Architecture::default()
        };
        let p = init_params::<f64>(&arch, 1).unwrap();
        let mut o = obs(vec![[0.0; 4]], vec![0]);
        assert!(policy_forward(&p, &o, 1.0).is_err());
        o.goal = Some([1.0, 0.0, 0.0, 0.0]);
        let u = policy_forward(&p, &o, 1.0).unwrap();
        assert!(u.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn batch_matches_single_robot_evaluation() {
        let p = init_params::<f64>(&Architecture::default(), 8).unwrap();
        let a = obs(vec![[0.0; 4], [0.5, -1.0, 0.2, 0.1]], vec![0, 1]);
        let b = obs(vec![[-0.5, 1.0, -0.2, -0.1], [0.0; 4]], vec![0, 1]);
        let batch = policy_forward_batch(&p, &[a.clone(), b.clone()], 1.0).unwrap();
        assert_eq!(batch[0], policy_forward(&p, &a, 1.0).unwrap());
        assert_eq!(batch[1], policy_forward(&p, &b, 1.0).unwrap());
    }
}
