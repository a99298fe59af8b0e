//! Libraries of local controllers keyed by task condition.

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerFile, LinearGaussianController};
use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;

#[derive(Clone, Debug, PartialEq)]
pub struct LibraryEntry {
    pub key: Vector,
    pub initial_state: Vector,
    pub controller: LinearGaussianController,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalPolicyLibrary {
    key_dim: usize,
    entries: Vec<LibraryEntry>,
}

impl LocalPolicyLibrary {
    pub fn new(key_dim: usize) -> Result<Self> {
        if key_dim == 0 {
            return invalid("library key dimension must be positive");
        }
        Ok(Self { key_dim, entries: Vec::new() })
    }

    pub fn key_dim(&self) -> usize {
        self.key_dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &LibraryEntry {
        &self.entries[i]
    }

    pub fn push(&mut self, entry: LibraryEntry) -> Result<()> {
        if entry.key.len() != self.key_dim {
            return invalid(format!("entry key has dimension {}, library uses {}", entry.key.len(), self.key_dim));
        }
        if entry.initial_state.len() != entry.controller.state_dim() {
            return invalid("entry initial state does not match the controller state dimension");
        }
        if let Some(first) = self.entries.first() {
            let c = &first.controller;
            let d = &entry.controller;
            if (c.horizon(), c.state_dim(), c.action_dim()) != (d.horizon(), d.state_dim(), d.action_dim()) {
                return invalid("library controllers must share horizon and dimensions");
            }
        }
        if self.entries.iter().any(|e| e.key == entry.key) {
            return invalid(format!("duplicate library key {:?}", entry.key.as_slice()));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Entries whose index is in `keep`, in library order.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.len()) {
            return invalid(format!("library has no entry {bad}"));
        }
        let entries = (0..self.len()).filter(|i| keep.contains(i)).map(|i| self.entries[i].clone()).collect();
        Ok(Self { key_dim: self.key_dim, entries })
    }

    /// Index of the entry with the smallest Euclidean key distance; ties go to
    /// the lowest index.
    pub fn nearest_index(&self, query: &Vector) -> Result<usize> {
        if self.entries.is_empty() {
            return invalid("nearest-neighbor selection on an empty library");
        }
        if query.len() != self.key_dim {
            return invalid(format!("query has dimension {}, library keys have {}", query.len(), self.key_dim));
        }
        let mut best = (0, f64::INFINITY);
        for (i, e) in self.entries.iter().enumerate() {
            let d = (&e.key - query).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    pub fn to_file(&self) -> LibraryFile {
        LibraryFile {
            key_dim: self.key_dim,
            entries: self
                .entries
                .iter()
                .map(|e| LibraryEntryFile {
                    key: e.key.iter().copied().collect(),
                    initial_state: e.initial_state.iter().copied().collect(),
                    controller: e.controller.to_file(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &LibraryFile) -> Result<Self> {
        let mut lib = Self::new(file.key_dim)?;
        for e in &file.entries {
            lib.push(LibraryEntry {
                key: Vector::from_vec(e.key.clone()),
                initial_state: Vector::from_vec(e.initial_state.clone()),
                controller: LinearGaussianController::from_file(&e.controller)?,
            })
            .map_err(|err| Error::Format(err.to_string()))?;
        }
        Ok(lib)
    }
}

pub fn nearest_neighbor_select<'a>(lib: &'a LocalPolicyLibrary, query: &Vector) -> Result<&'a LinearGaussianController> {
    Ok(&lib.entries[lib.nearest_index(query)?].controller)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryFile {
    pub key_dim: usize,
    pub entries: Vec<LibraryEntryFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryEntryFile {
    pub key: Vec<f64>,
    pub initial_state: Vec<f64>,
    pub controller: ControllerFile,
}
