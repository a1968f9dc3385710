use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Named, insertion-ordered collection of trainable tensors.
///
/// The `label` identifies the store on a [`Tape`](super::Tape) so gradients
/// recorded during a backward pass can be routed back to the right owner.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    label: String,
    params: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new(label: impl Into<String>) -> Self {
        ParamStore {
            label: label.into(),
            params: IndexMap::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::Parameter(format!(
                "duplicate parameter `{name}` in store `{}`",
                self.label
            )));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params.get(name).ok_or_else(|| self.missing(name))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        if !self.params.contains_key(name) {
            return Err(self.missing(name));
        }
        Ok(self.params.get_mut(name).expect("checked above"))
    }

    fn missing(&self, name: &str) -> Error {
        Error::Parameter(format!(
            "store `{}` has no parameter `{name}`",
            self.label
        ))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.params.values_mut() {
            t.set_grad(None);
        }
    }

    pub fn to_doc(&self) -> ParamStoreDoc {
        ParamStoreDoc {
            label: self.label.clone(),
            names: self.params.keys().cloned().collect(),
            shapes: self.params.values().map(|t| t.shape().to_vec()).collect(),
            values: self.params.values().map(|t| t.data().to_vec()).collect(),
        }
    }

    pub fn from_doc(doc: ParamStoreDoc) -> Result<Self> {
        if doc.names.len() != doc.shapes.len() || doc.names.len() != doc.values.len() {
            return Err(Error::format(
                0,
                format!("param store `{}`: names/shapes/values disagree", doc.label),
            ));
        }
        let mut store = ParamStore::new(doc.label);
        for ((name, shape), values) in doc.names.into_iter().zip(doc.shapes).zip(doc.values) {
            let t = Tensor::new(shape, values).map_err(|e| Error::format(0, e.to_string()))?;
            store.insert(name, t)?;
        }
        Ok(store)
    }
}

/// Serialized form of a [`ParamStore`]: parallel lists of names, shapes and
/// row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStoreDoc {
    pub label: String,
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl Serialize for ParamStore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParamStore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ParamStoreDoc::deserialize(d)?;
        ParamStore::from_doc(doc).map_err(serde::de::Error::custom)
    }
}
