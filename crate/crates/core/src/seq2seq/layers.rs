use mctn_autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MctnError, Result};

/// Score added to padded attention positions before the softmax.
pub const PAD_SCORE: f64 = -1e9;

/// Seeded parameter initialiser. Each parameter draws from its own stream
/// keyed by its name, so a parameter's initial value does not depend on which
/// other parameters exist or the order they were created in.
#[derive(Clone, Copy, Debug)]
pub struct Init {
    seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn glorot(&self, store: &mut ParamStore, name: &str, rows: usize, cols: usize) -> ParamId {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name));
        store.add_glorot(name, rows, cols, &mut rng)
    }

    pub fn zeros(&self, store: &mut ParamStore, name: &str, shape: &[usize]) -> ParamId {
        store.add_zeros(name, shape)
    }
}

fn dim_check(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(MctnError::Dimension { context: context.to_string(), expected, actual });
    }
    Ok(())
}

/// `y = x W + b` on `B x in` row batches.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, init: &Init, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let w = init.glorot(store, &format!("{name}.w"), in_dim, out_dim);
        let b = init.zeros(store, &format!("{name}.b"), &[1, out_dim]);
        Linear { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (w, b) = (g.p(self.w), g.p(self.b));
        let y = g.tape.matmul(x, w)?;
        Ok(g.tape.add_bias(y, b)?)
    }
}

/// GRU cell on row batches. Gate weights are `(in + hidden) x hidden` and act
/// on `[x, h]`:
///
/// ```text
/// z  = sigmoid([x, h] Wz + bz)
/// r  = sigmoid([x, h] Wr + br)
/// h~ = tanh([x, r*h] Wh + bh)
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Gru {
    pub wz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub br: ParamId,
    pub wh: ParamId,
    pub bh: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl Gru {
    pub fn new(store: &mut ParamStore, init: &Init, name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let rows = input_dim + hidden_dim;
        let mut gate = |g: &str| {
            let w = init.glorot(store, &format!("{name}.w{g}"), rows, hidden_dim);
            let b = init.zeros(store, &format!("{name}.b{g}"), &[1, hidden_dim]);
            (w, b)
        };
        let (wz, bz) = gate("z");
        let (wr, br) = gate("r");
        let (wh, bh) = gate("h");
        Gru { wz, bz, wr, br, wh, bh, input_dim, hidden_dim }
    }

    pub fn step(&self, g: &mut Graph, h_prev: Var, x: Var) -> Result<Var> {
        let (wz, bz, wr, br, wh, bh) =
            (g.p(self.wz), g.p(self.bz), g.p(self.wr), g.p(self.br), g.p(self.wh), g.p(self.bh));
        let t = &mut g.tape;
        let xh = t.concat(&[x, h_prev], 1)?;
        let z = t.matmul(xh, wz)?;
        let z = t.add_bias(z, bz)?;
        let z = t.sigmoid(z)?;
        let r = t.matmul(xh, wr)?;
        let r = t.add_bias(r, br)?;
        let r = t.sigmoid(r)?;
        let rh = t.mul(r, h_prev)?;
        let xrh = t.concat(&[x, rh], 1)?;
        let cand = t.matmul(xrh, wh)?;
        let cand = t.add_bias(cand, bh)?;
        let cand = t.tanh(cand)?;
        let delta = t.sub(cand, h_prev)?;
        let delta = t.mul(z, delta)?;
        Ok(t.add(h_prev, delta)?)
    }

    /// One step where rows with `mask == 0` keep `h_prev` exactly.
    pub fn step_masked(&self, g: &mut Graph, h_prev: Var, x: Var, mask: Option<&RowMask>) -> Result<Var> {
        let h_new = self.step(g, h_prev, x)?;
        match mask {
            None => Ok(h_new),
            Some(m) => m.select(g, h_new, h_prev),
        }
    }

    /// Runs over per-step inputs from a zero state, freezing each row after its
    /// length. Returns every step's state.
    pub fn run(&self, g: &mut Graph, inputs: &[Var], lengths: &[usize]) -> Result<Vec<Var>> {
        let h0 = g.constant(Tensor::zeros(&[lengths.len(), self.hidden_dim]));
        let mut h = h0;
        let mut states = Vec::with_capacity(inputs.len());
        for (t, &x) in inputs.iter().enumerate() {
            let mask = RowMask::at(lengths, t, self.hidden_dim);
            h = self.step_masked(g, h, x, mask.as_ref())?;
            states.push(h);
        }
        Ok(states)
    }

    /// Eager single step on plain vectors.
    pub fn step_values(&self, store: &ParamStore, h_prev: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        dim_check("gru input", self.input_dim, x.len())?;
        dim_check("gru hidden state", self.hidden_dim, h_prev.len())?;
        let mut g = Graph::inference(store);
        let h = g.constant(Tensor::matrix(1, h_prev.len(), h_prev.to_vec())?);
        let x = g.constant(Tensor::matrix(1, x.len(), x.to_vec())?);
        let out = self.step(&mut g, h, x)?;
        Ok(g.value(out).data().to_vec())
    }
}

/// Row-selection mask for a step where some rows are past their length.
pub struct RowMask {
    keep: Tensor,
    hold: Tensor,
}

impl RowMask {
    /// `None` when every row is still valid at step `t`.
    pub fn at(lengths: &[usize], t: usize, width: usize) -> Option<Self> {
        if lengths.iter().all(|&l| t < l) {
            return None;
        }
        let keep: Vec<f64> = lengths
            .iter()
            .flat_map(|&l| std::iter::repeat_n(if t < l { 1.0 } else { 0.0 }, width))
            .collect();
        let hold = keep.iter().map(|k| 1.0 - k).collect();
        let rows = lengths.len();
        Some(RowMask {
            keep: Tensor::matrix(rows, width, keep).expect("mask shape"),
            hold: Tensor::matrix(rows, width, hold).expect("mask shape"),
        })
    }

    /// `keep * new + (1 - keep) * old`, exact for a 0/1 mask.
    pub fn select(&self, g: &mut Graph, new: Var, old: Var) -> Result<Var> {
        let keep = g.constant(self.keep.clone());
        let hold = g.constant(self.hold.clone());
        let a = g.tape.mul(keep, new)?;
        let b = g.tape.mul(hold, old)?;
        Ok(g.tape.add(a, b)?)
    }
}

/// Additive attention: `e_i = v . tanh(h_i W1 + s W2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    pub w1: ParamId,
    pub w2: ParamId,
    pub v: ParamId,
    pub hidden_dim: usize,
    pub attn_dim: usize,
}

/// Encoder states prepared for repeated attention queries.
pub struct AttentionMemory {
    pub states: Vec<Var>,
    keys: Vec<Var>,
    pad_bias: Option<Var>,
}

impl Attention {
    pub fn new(store: &mut ParamStore, init: &Init, name: &str, hidden_dim: usize, attn_dim: usize) -> Self {
        let w1 = init.glorot(store, &format!("{name}.w1"), hidden_dim, attn_dim);
        let w2 = init.glorot(store, &format!("{name}.w2"), hidden_dim, attn_dim);
        let v = init.glorot(store, &format!("{name}.v"), attn_dim, 1);
        Attention { w1, w2, v, hidden_dim, attn_dim }
    }

    pub fn memory(&self, g: &mut Graph, states: &[Var], lengths: &[usize]) -> Result<AttentionMemory> {
        if states.is_empty() {
            return Err(MctnError::EmptySequence);
        }
        let w1 = g.p(self.w1);
        let keys = states.iter().map(|&h| g.tape.matmul(h, w1)).collect::<std::result::Result<Vec<_>, _>>()?;
        let steps = states.len();
        let pad_bias = if lengths.iter().all(|&l| l >= steps) {
            None
        } else {
            let data = lengths
                .iter()
                .flat_map(|&l| (0..steps).map(move |i| if i < l { 0.0 } else { PAD_SCORE }))
                .collect();
            Some(g.constant(Tensor::matrix(lengths.len(), steps, data)?))
        };
        Ok(AttentionMemory { states: states.to_vec(), keys, pad_bias })
    }

    /// Returns `(context, weights)` with weights `B x L`.
    pub fn attend(&self, g: &mut Graph, query: Var, mem: &AttentionMemory) -> Result<(Var, Var)> {
        let (w2, v) = (g.p(self.w2), g.p(self.v));
        let t = &mut g.tape;
        let q = t.matmul(query, w2)?;
        let mut scores = Vec::with_capacity(mem.keys.len());
        for &k in &mem.keys {
            let e = t.add(k, q)?;
            let e = t.tanh(e)?;
            scores.push(t.matmul(e, v)?);
        }
        let mut scores = t.concat(&scores, 1)?;
        if let Some(bias) = mem.pad_bias {
            scores = t.add(scores, bias)?;
        }
        let weights = t.softmax(scores)?;
        let mut context = None;
        for (i, &h) in mem.states.iter().enumerate() {
            let a = t.slice(weights, 1, i, 1)?;
            let a = t.repeat_cols(a, self.hidden_dim)?;
            let term = t.mul(a, h)?;
            context = Some(match context {
                None => term,
                Some(c) => t.add(c, term)?,
            });
        }
        Ok((context.expect("non-empty memory"), weights))
    }
}
