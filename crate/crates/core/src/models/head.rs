use mctn_autodiff::{Graph, ParamStore, Var};
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{MctnError, Result};
use crate::seq2seq::{constants, Gru, Init, Linear};

/// Where a joint representation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Forward encoder of a bimodal translator.
    Bimodal,
    /// Level-2 encoder of a hierarchical translator.
    Trimodal,
    /// Any other topology.
    Variant,
}

/// Encoder states used for prediction, `L x r`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointRepresentation {
    pub states: mctn_autodiff::Tensor,
    pub provenance: Provenance,
}

impl JointRepresentation {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.states.to_rows()
    }
}

/// Recurrent prediction head: a GRU over the representation sequence whose
/// final state feeds a linear map (one output for regression, softmax over
/// classes for classification).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionHead {
    pub gru: Gru,
    pub out: Linear,
    pub task: Task,
    pub classes: usize,
}

impl PredictionHead {
    pub fn new(store: &mut ParamStore, init: &Init, input_dim: usize, hidden_dim: usize, task: Task, classes: usize) -> Self {
        let out_dim = match task {
            Task::Regression => 1,
            Task::Classification => classes,
        };
        let gru = Gru::new(store, init, "head.gru", input_dim, hidden_dim);
        let out = Linear::new(store, init, "head.out", hidden_dim, out_dim);
        PredictionHead { gru, out, task, classes }
    }

    pub fn output_dim(&self) -> usize {
        self.out.out_dim
    }

    /// `B x 1` predictions or `B x K` class probabilities.
    pub fn forward(&self, g: &mut Graph, states: &[Var], lengths: &[usize]) -> Result<Var> {
        if states.is_empty() {
            return Err(MctnError::EmptySequence);
        }
        let hs = self.gru.run(g, states, lengths)?;
        let last = *hs.last().expect("non-empty");
        let y = self.out.forward(g, last)?;
        match self.task {
            Task::Regression => Ok(y),
            Task::Classification => Ok(g.tape.softmax(y)?),
        }
    }

    /// Eager prediction from one representation.
    pub fn predict(&self, store: &ParamStore, rep: &JointRepresentation) -> Result<Vec<f64>> {
        if rep.is_empty() {
            return Err(MctnError::EmptySequence);
        }
        if rep.states.cols() != self.gru.input_dim {
            return Err(MctnError::Dimension {
                context: "prediction head input".into(),
                expected: self.gru.input_dim,
                actual: rep.states.cols(),
            });
        }
        let mut g = Graph::inference(store);
        let rows = rep
            .rows()
            .into_iter()
            .map(|r| mctn_autodiff::Tensor::matrix(1, r.len(), r))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let steps = constants(&mut g, &rows);
        let y = self.forward(&mut g, &steps, &[rep.len()])?;
        Ok(g.value(y).data().to_vec())
    }
}
