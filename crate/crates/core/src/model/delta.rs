//! Instance reconfiguration deltas.

use std::collections::{BTreeMap, BTreeSet};

use super::instance::{validate_instance, Instance, Task};
use crate::error::Error;

/// The difference between an original instance and an updated one: task
/// parameter changes, task additions/removals, and precedence edits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReconfigDelta {
    /// Task id to full replacement (duration/window/demand changes).
    pub modified: BTreeMap<String, Task>,
    pub added: Vec<Task>,
    pub removed: BTreeSet<String>,
    pub added_precedence: BTreeSet<(String, String)>,
    pub removed_precedence: BTreeSet<(String, String)>,
}

impl ReconfigDelta {
    pub fn is_empty(&self) -> bool {
        self.modified.is_empty()
            && self.added.is_empty()
            && self.removed.is_empty()
            && self.added_precedence.is_empty()
            && self.removed_precedence.is_empty()
    }
}

/// Apply a delta, yielding the updated instance. The input is left untouched.
///
/// Modify/remove entries must reference existing ids and removed edges must
/// exist; removing a task does not cascade to its incident edges, so a delta
/// that removes a task but keeps an incident edge fails post-validation.
pub fn apply_delta(inst: &Instance, delta: &ReconfigDelta) -> Result<Instance, Error> {
    for id in delta.modified.keys() {
        if inst.index_of(id).is_none() {
            return Err(Error::UnknownTask { id: id.clone() });
        }
    }
    for (id, replacement) in &delta.modified {
        if &replacement.id != id {
            return Err(Error::DeltaIdMismatch {
                key: id.clone(),
                task: replacement.id.clone(),
            });
        }
    }
    for id in &delta.removed {
        if inst.index_of(id).is_none() {
            return Err(Error::UnknownTask { id: id.clone() });
        }
    }
    for edge in &delta.removed_precedence {
        if !inst.precedence().contains(edge) {
            return Err(Error::UnknownEdge {
                pred: edge.0.clone(),
                succ: edge.1.clone(),
            });
        }
    }

    let mut tasks: Vec<Task> = inst
        .tasks()
        .iter()
        .filter(|t| !delta.removed.contains(&t.id))
        .map(|t| delta.modified.get(&t.id).cloned().unwrap_or_else(|| t.clone()))
        .collect();
    tasks.extend(delta.added.iter().cloned());

    let mut precedence = inst.precedence().clone();
    for edge in &delta.removed_precedence {
        precedence.remove(edge);
    }
    for edge in &delta.added_precedence {
        precedence.insert(edge.clone());
    }

    let updated = Instance::new(tasks, inst.resources().to_vec(), precedence);
    let report = validate_instance(&updated);
    if !report.is_ok() {
        return Err(Error::InvalidUpdatedInstance {
            violations: report.violations.iter().map(|v| v.to_string()).collect(),
        });
    }
    Ok(updated)
}
