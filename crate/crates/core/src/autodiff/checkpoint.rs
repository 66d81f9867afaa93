//! JSON checkpoints: an object mapping parameter names to `{shape, data}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint {
    pub params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn insert(&mut self, name: impl Into<String>, t: &Tensor) {
        self.params.insert(
            name.into(),
            StoredTensor {
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            },
        );
    }

    pub fn insert_all<'a>(&mut self, names: Vec<String>, tensors: impl IntoIterator<Item = &'a Tensor>) {
        for (n, t) in names.into_iter().zip(tensors) {
            self.insert(n, t);
        }
    }

    /// Copies the stored value into `dst`, rejecting missing names and shape changes.
    pub fn load_into(&self, name: &str, dst: &mut Tensor) -> Result<()> {
        let stored = self
            .params
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
        if stored.shape != dst.shape() {
            return Err(Error::Checkpoint(format!(
                "shape of `{name}` is {:?}, expected {:?}",
                stored.shape,
                dst.shape()
            )));
        }
        let t = Tensor::new(stored.shape.clone(), stored.data.clone())
            .map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))?;
        *dst = t;
        Ok(())
    }

    pub fn load_all(&self, names: Vec<String>, dsts: Vec<&mut Tensor>) -> Result<()> {
        for (n, d) in names.iter().zip(dsts) {
            self.load_into(n, d)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
