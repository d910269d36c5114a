use serde::{Deserialize, Serialize};

use super::{Graph, NnError, Result, Var};
use crate::scalar::Scalar;

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Ordered collection of named parameters owned by one model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    /// Appends a parameter; names must be unique.
    pub fn insert(&mut self, name: &str, shape: &[usize], data: Vec<T>) -> Result<usize> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::Param(format!(
                "{name}: {} values for shape {shape:?}",
                data.len()
            )));
        }
        if self.index_of(name).is_some() {
            return Err(NnError::Param(format!("duplicate parameter {name}")));
        }
        self.params.push(Param { name: name.to_string(), shape: shape.to_vec(), data });
        Ok(self.params.len() - 1)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<usize> {
        self.insert(name, shape, vec![T::zero(); shape.iter().product()])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, Param<T>> {
        self.params.iter_mut()
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Checks that this store has exactly the given names and shapes.
    pub fn check_layout(&self, expected: &[(String, Vec<usize>)]) -> Result<()> {
        if self.params.len() != expected.len() {
            return Err(NnError::Param(format!(
                "expected {} parameters, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        for (p, (name, shape)) in self.params.iter().zip(expected) {
            if &p.name != name || &p.shape != shape {
                return Err(NnError::Param(format!(
                    "expected {name} {shape:?}, found {} {:?}",
                    p.name, p.shape
                )));
            }
        }
        Ok(())
    }

    /// Places every parameter in `graph`, returning handles in store order.
    pub fn bind(&self, graph: &mut Graph<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                graph
                    .leaf(p.data.clone(), &p.shape, trainable)
                    .expect("parameter shape checked on insert")
            })
            .collect()
    }

    /// Gradients for bound parameters, zero where none flowed.
    pub fn collect_grads(&self, graph: &Graph<T>, vars: &[Var]) -> Vec<Vec<T>> {
        self.params
            .iter()
            .zip(vars)
            .map(|(p, &v)| match graph.grad(v) {
                Some(g) => g.to_vec(),
                None => vec![T::zero(); p.data.len()],
            })
            .collect()
    }

    /// Zero-filled gradient buffers matching this store.
    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|p| vec![T::zero(); p.data.len()]).collect()
    }
}

impl<'a, T> IntoIterator for &'a ParamStore<T> {
    type Item = &'a Param<T>;
    type IntoIter = std::slice::Iter<'a, Param<T>>;
    fn into_iter(self) -> Self::IntoIter {
        self.params.iter()
    }
}
