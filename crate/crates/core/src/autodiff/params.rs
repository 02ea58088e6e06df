use std::collections::BTreeMap;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// Adam with decoupled weight decay (`θ ← θ − lr·wd·θ` before the Adam step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: Tensor,
    second: Tensor,
}

/// Named parameter tensors (kept sorted by name) with their Adam state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    moments: Vec<Moments>,
    step: u64,
}

/// One entry of the parameter checkpoint: shape plus row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        let zeros = Array2::zeros(value.raw_dim());
        let moments = Moments {
            first: zeros.clone(),
            second: zeros,
        };
        match self.names.binary_search(&name) {
            Ok(i) => {
                self.values[i] = value;
                self.moments[i] = moments;
            }
            Err(i) => {
                self.names.insert(i, name);
                self.values.insert(i, value);
                self.moments.insert(i, moments);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index(name).map(|i| &self.values[i])
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn parameter_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Adds every parameter to `graph` as a leaf; ids follow [`Self::names`].
    pub fn bind(&self, graph: &mut Graph) -> Vec<NodeId> {
        self.values.iter().map(|v| graph.leaf(v.clone())).collect()
    }

    /// One Adam update. `grads` must line up with [`Self::names`].
    pub fn adam_step(&mut self, grads: &[Tensor], cfg: &AdamConfig) -> Result<()> {
        if grads.len() != self.values.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                detail: format!("{} gradients for {} parameters", grads.len(), self.values.len()),
            });
        }
        for (i, (g, p)) in grads.iter().zip(&self.values).enumerate() {
            if g.dim() != p.dim() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    detail: format!("{}: {:?} vs {:?}", self.names[i], g.dim(), p.dim()),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let decay = cfg.learning_rate * cfg.weight_decay;
        for ((p, g), m) in self.values.iter_mut().zip(grads).zip(&mut self.moments) {
            Zip::from(p)
                .and(g)
                .and(&mut m.first)
                .and(&mut m.second)
                .for_each(|p, &g, m1, m2| {
                    *p -= decay * *p;
                    *m1 = cfg.beta1 * *m1 + (1.0 - cfg.beta1) * g;
                    *m2 = cfg.beta2 * *m2 + (1.0 - cfg.beta2) * g * g;
                    let mhat = *m1 / c1;
                    let vhat = *m2 / c2;
                    *p -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.eps);
                });
        }
        Ok(())
    }

    pub fn to_records(&self) -> BTreeMap<String, ParamRecord> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| {
                (
                    n.clone(),
                    ParamRecord {
                        shape: [v.nrows(), v.ncols()],
                        values: v.iter().copied().collect(),
                    },
                )
            })
            .collect()
    }

    pub fn from_records(records: &BTreeMap<String, ParamRecord>) -> Result<Self> {
        let mut store = Self::new();
        for (name, rec) in records {
            let v = Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.values.clone()).map_err(|_| {
                Error::ShapeMismatch {
                    op: "param_record",
                    detail: format!("{name}: {:?} with {} values", rec.shape, rec.values.len()),
                }
            })?;
            store.insert(name.clone(), v);
        }
        Ok(store)
    }
}

impl Serialize for ParamStore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_records().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParamStore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = BTreeMap::<String, ParamRecord>::deserialize(d)?;
        Self::from_records(&records).map_err(serde::de::Error::custom)
    }
}
