use rand::Rng;

use crate::error::{AutodiffError, Result};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Tensor;

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    /// Glorot-uniform matrix.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        self.add(name, Tensor::matrix(rows, cols, data).expect("positive dims"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Replaces every tensor by name; names and shapes must match exactly.
    pub fn load_named(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        if entries.len() != self.tensors.len() {
            return Err(AutodiffError::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.tensors.len(),
                entries.len()
            )));
        }
        for (name, value) in entries {
            let id = self
                .find(&name)
                .ok_or_else(|| AutodiffError::Checkpoint(format!("unknown tensor {name}")))?;
            if self.tensors[id.0].shape() != value.shape() {
                return Err(AutodiffError::Checkpoint(format!(
                    "tensor {name}: expected shape {:?}, found {:?}",
                    self.tensors[id.0].shape(),
                    value.shape()
                )));
            }
            self.tensors[id.0] = value;
        }
        Ok(())
    }

    /// Rounds every value to the nearest `f32`, matching what a checkpoint stores.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// A tape plus lazily bound parameters from a store.
///
/// In training mode parameters enter the tape as differentiable leaves; in
/// inference mode they enter as constants, so no gradient work is recorded.
pub struct Graph<'s> {
    pub tape: Tape,
    store: &'s ParamStore,
    bound: Vec<Option<Var>>,
    trainable: bool,
}

impl<'s> Graph<'s> {
    pub fn training(store: &'s ParamStore) -> Self {
        Self::with_mode(store, true)
    }

    pub fn inference(store: &'s ParamStore) -> Self {
        Self::with_mode(store, false)
    }

    fn with_mode(store: &'s ParamStore, trainable: bool) -> Self {
        Graph { tape: Tape::new(), store, bound: vec![None; store.len()], trainable }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn is_training(&self) -> bool {
        self.trainable
    }

    /// Tape handle for a parameter, binding it on first use.
    pub fn p(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let value = self.store.get(id).clone();
        let v = self.tape.leaf(value, self.trainable);
        self.bound[id.0] = Some(v);
        v
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.tape.constant(value)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        self.tape.value(var)
    }

    /// Gradients for every store entry, zeros for parameters the loss never touched.
    pub fn param_grads(&self, grads: &Gradients) -> Vec<Tensor> {
        self.store
            .ids()
            .map(|id| match self.bound[id.0] {
                Some(v) => grads.get_or_zeros(v, self.store.get(id).shape()),
                None => Tensor::zeros(self.store.get(id).shape()),
            })
            .collect()
    }

    /// Backward from `loss`, returning per-parameter gradients in store order.
    pub fn backward(&self, loss: Var) -> Result<Vec<Tensor>> {
        let grads = self.tape.backward(loss)?;
        Ok(self.param_grads(&grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unused_params_get_zero_grads() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::vector(vec![1.0, 2.0]).unwrap());
        let _b = store.add("b", Tensor::vector(vec![5.0]).unwrap());
        let mut g = Graph::training(&store);
        let va = g.p(a);
        let loss = g.tape.sum(va).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads[0].data(), &[1.0, 1.0]);
        assert_eq!(grads[1].data(), &[0.0]);
    }

    #[test]
    fn inference_graph_is_detached() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::scalar(1.0));
        let mut g = Graph::inference(&store);
        let va = g.p(a);
        let loss = g.tape.sum(va).unwrap();
        assert!(matches!(g.backward(loss), Err(AutodiffError::DetachedLoss)));
    }

    #[test]
    fn load_named_checks_shapes() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::zeros(&[2, 2]));
        let bad = vec![("w".to_string(), Tensor::zeros(&[4]))];
        assert!(store.load_named(bad).is_err());
        let good = vec![("w".to_string(), Tensor::ones(&[2, 2]))];
        store.load_named(good).unwrap();
        assert_eq!(store.tensors()[0].sum(), 4.0);
    }
}
