//! JSON instance files.
//!
//! One record per file with parallel arrays indexed consistently with
//! `Tasks`: window and duration arrays, dependency name pairs, per-task
//! per-resource demand arrays, unit costs, an optional embedded schedule,
//! pass-through provenance metadata (`Best_cost`, `Time`, `Bound`) and an
//! optional parameter-change section. Serialization is canonical: tasks
//! sorted by id, two-space indentation, fixed key order, integers unquoted.
//! Underscore-prefixed keys are additive annotations written by this toolkit
//! and ignored by strict readers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{
    check_schedule, validate_instance, Cost, Instance, ReconfigDelta, ResourceKind, Schedule,
    Task, Verdict,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipFile {
    #[serde(rename = "Tasks")]
    pub tasks: Vec<String>,
    #[serde(rename = "Earliest_start")]
    pub earliest_start: Vec<i64>,
    #[serde(rename = "Deadline")]
    pub deadline: Vec<i64>,
    #[serde(rename = "Duration")]
    pub duration: Vec<i64>,
    #[serde(rename = "Dependencies")]
    pub dependencies: Vec<(String, String)>,
    /// Per-task array of per-resource demands.
    #[serde(rename = "Resources")]
    pub resources: Vec<Vec<i64>>,
    #[serde(rename = "Costs")]
    pub costs: Vec<f64>,
    #[serde(rename = "Task_start")]
    pub task_start: Option<Vec<Option<i64>>>,
    #[serde(rename = "Best_cost")]
    pub best_cost: Option<f64>,
    #[serde(rename = "Time")]
    pub time: Option<f64>,
    #[serde(rename = "Bound")]
    pub bound: Option<f64>,
    #[serde(rename = "Modified_data")]
    pub modified_data: Option<ModifiedData>,
    /// Resource names; annotation keeping load/save an identity.
    #[serde(
        rename = "_resource_ids",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub resource_ids: Option<Vec<String>>,
    /// Which tool wrote the record.
    #[serde(rename = "_producer", skip_serializing_if = "Option::is_none", default)]
    pub producer: Option<String>,
}

/// Parameter changes relative to the stored instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedData {
    #[serde(rename = "Modified")]
    pub modified: BTreeMap<String, TaskRecord>,
    #[serde(rename = "Added")]
    pub added: Vec<NamedTaskRecord>,
    #[serde(rename = "Removed")]
    pub removed: Vec<String>,
    #[serde(rename = "Added_dependencies")]
    pub added_dependencies: Vec<(String, String)>,
    #[serde(rename = "Removed_dependencies")]
    pub removed_dependencies: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    #[serde(rename = "Duration")]
    pub duration: i64,
    #[serde(rename = "Earliest_start")]
    pub earliest_start: i64,
    #[serde(rename = "Deadline")]
    pub deadline: i64,
    #[serde(rename = "Resources")]
    pub resources: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTaskRecord {
    #[serde(rename = "Task")]
    pub task: String,
    #[serde(flatten)]
    pub record: TaskRecord,
}

/// Pass-through provenance fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub best_cost: Option<f64>,
    pub time: Option<f64>,
    pub bound: Option<f64>,
    pub producer: Option<String>,
}

/// Everything decoded from one file.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    /// Embedded schedule, possibly partial.
    pub prior: Option<Schedule>,
    /// Feasibility of a complete embedded schedule; checked, never assumed.
    pub prior_verdict: Option<Verdict>,
    pub delta: Option<ReconfigDelta>,
    pub metadata: Metadata,
}

/// Exact conversion of a file cost to a rational; finite f64 values are
/// dyadic so this never loses precision (it fails only on overflow).
fn cost_from_f64(value: f64) -> Option<Cost> {
    if !value.is_finite() {
        return None;
    }
    let mut num = value;
    let mut den: i64 = 1;
    while num.fract() != 0.0 {
        num *= 2.0;
        den = den.checked_mul(2)?;
        if num.abs() > 9.0e15 {
            return None;
        }
    }
    if num.abs() > 9.0e15 {
        return None;
    }
    Some(Cost::new(num as i64, den))
}

fn cost_to_f64(cost: &Cost) -> Result<f64, Error> {
    let v = cost.to_f64().ok_or_else(|| Error::BadCheckpoint {
        reason: "cost out of float range".to_string(),
    })?;
    match cost_from_f64(v) {
        Some(back) if back == *cost => Ok(v),
        _ => Err(Error::InvalidConfig {
            reason: format!("cost {cost} is not exactly representable in the file format"),
        }),
    }
}

fn task_record(task: &Task) -> TaskRecord {
    TaskRecord {
        duration: task.duration,
        earliest_start: task.earliest_start,
        deadline: task.deadline,
        resources: task.demands.clone(),
    }
}

fn record_to_task(id: &str, rec: &TaskRecord) -> Task {
    Task {
        id: id.to_string(),
        duration: rec.duration,
        earliest_start: rec.earliest_start,
        deadline: rec.deadline,
        demands: rec.resources.clone(),
    }
}

/// Build the wire record from model values.
pub fn to_record(
    inst: &Instance,
    prior: Option<&Schedule>,
    delta: Option<&ReconfigDelta>,
    metadata: &Metadata,
) -> Result<RipFile, Error> {
    let mut costs = Vec::with_capacity(inst.n_resources());
    for r in inst.resources() {
        costs.push(cost_to_f64(&r.unit_cost)?);
    }
    let task_start = prior.map(|p| {
        inst.tasks()
            .iter()
            .map(|t| p.start_of(&t.id))
            .collect::<Vec<Option<i64>>>()
    });
    let modified_data = delta.map(|d| ModifiedData {
        modified: d
            .modified
            .iter()
            .map(|(id, t)| (id.clone(), task_record(t)))
            .collect(),
        added: d
            .added
            .iter()
            .map(|t| NamedTaskRecord {
                task: t.id.clone(),
                record: task_record(t),
            })
            .collect(),
        removed: d.removed.iter().cloned().collect(),
        added_dependencies: d.added_precedence.iter().cloned().collect(),
        removed_dependencies: d.removed_precedence.iter().cloned().collect(),
    });
    Ok(RipFile {
        tasks: inst.tasks().iter().map(|t| t.id.clone()).collect(),
        earliest_start: inst.tasks().iter().map(|t| t.earliest_start).collect(),
        deadline: inst.tasks().iter().map(|t| t.deadline).collect(),
        duration: inst.tasks().iter().map(|t| t.duration).collect(),
        dependencies: inst.precedence().iter().cloned().collect(),
        resources: inst.tasks().iter().map(|t| t.demands.clone()).collect(),
        costs,
        task_start,
        best_cost: metadata.best_cost,
        time: metadata.time,
        bound: metadata.bound,
        modified_data,
        resource_ids: Some(inst.resources().iter().map(|r| r.id.clone()).collect()),
        producer: metadata.producer.clone(),
    })
}

/// Decode a wire record; the instance must validate.
pub fn from_record(record: &RipFile) -> Result<LoadedInstance, Error> {
    let n = record.tasks.len();
    let check_len = |field: &str, got: usize| -> Result<(), Error> {
        if got != n {
            Err(Error::LengthMismatch {
                field: field.to_string(),
                expected: n,
                got,
            })
        } else {
            Ok(())
        }
    };
    check_len("Earliest_start", record.earliest_start.len())?;
    check_len("Deadline", record.deadline.len())?;
    check_len("Duration", record.duration.len())?;
    check_len("Resources", record.resources.len())?;
    if let Some(ts) = &record.task_start {
        check_len("Task_start", ts.len())?;
    }

    let known: BTreeSet<&str> = record.tasks.iter().map(|s| s.as_str()).collect();
    for (pred, succ) in &record.dependencies {
        for name in [pred, succ] {
            if !known.contains(name.as_str()) {
                return Err(Error::UnknownName {
                    field: "Dependencies".to_string(),
                    name: name.clone(),
                });
            }
        }
    }

    let n_resources = record.costs.len();
    let resource_ids: Vec<String> = match &record.resource_ids {
        Some(ids) if ids.len() == n_resources => ids.clone(),
        Some(ids) => {
            return Err(Error::LengthMismatch {
                field: "_resource_ids".to_string(),
                expected: n_resources,
                got: ids.len(),
            })
        }
        None => (1..=n_resources).map(|k| format!("R{k}")).collect(),
    };
    let mut resources = Vec::with_capacity(n_resources);
    for (id, &c) in resource_ids.iter().zip(&record.costs) {
        let unit_cost = cost_from_f64(c).ok_or_else(|| Error::UnknownName {
            field: "Costs".to_string(),
            name: format!("{c}"),
        })?;
        resources.push(ResourceKind {
            id: id.clone(),
            unit_cost,
        });
    }

    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        if record.resources[i].len() != n_resources {
            return Err(Error::LengthMismatch {
                field: format!("Resources[{}]", record.tasks[i]),
                expected: n_resources,
                got: record.resources[i].len(),
            });
        }
        tasks.push(Task {
            id: record.tasks[i].clone(),
            duration: record.duration[i],
            earliest_start: record.earliest_start[i],
            deadline: record.deadline[i],
            demands: record.resources[i].clone(),
        });
    }

    let precedence: BTreeSet<(String, String)> = record.dependencies.iter().cloned().collect();
    let instance = Instance::new(tasks, resources, precedence);
    let report = validate_instance(&instance);
    if !report.is_ok() {
        return Err(Error::InvalidInstance {
            violations: report.violations.iter().map(|v| v.to_string()).collect(),
        });
    }

    let prior = record.task_start.as_ref().map(|ts| {
        Schedule::from_pairs(
            record
                .tasks
                .iter()
                .zip(ts)
                .filter_map(|(id, s)| s.map(|s| (id.clone(), s))),
        )
    });
    let prior_verdict = match &prior {
        Some(p) if p.is_complete(&instance) => Some(check_schedule(&instance, p)?),
        _ => None,
    };

    let delta = record.modified_data.as_ref().map(|md| ReconfigDelta {
        modified: md
            .modified
            .iter()
            .map(|(id, rec)| (id.clone(), record_to_task(id, rec)))
            .collect(),
        added: md
            .added
            .iter()
            .map(|nt| record_to_task(&nt.task, &nt.record))
            .collect(),
        removed: md.removed.iter().cloned().collect(),
        added_precedence: md.added_dependencies.iter().cloned().collect(),
        removed_precedence: md.removed_dependencies.iter().cloned().collect(),
    });

    Ok(LoadedInstance {
        instance,
        prior,
        prior_verdict,
        delta,
        metadata: Metadata {
            best_cost: record.best_cost,
            time: record.time,
            bound: record.bound,
            producer: record.producer.clone(),
        },
    })
}

/// Canonical byte form: two-space pretty JSON, fixed key order, newline
/// terminated.
pub fn to_canonical_json(record: &RipFile) -> String {
    let mut out = serde_json::to_string_pretty(record).expect("record serialization");
    out.push('\n');
    out
}

pub fn parse_json(path_label: &str, text: &str) -> Result<RipFile, Error> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path_label.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn save_instance(
    path: &Path,
    inst: &Instance,
    prior: Option<&Schedule>,
    delta: Option<&ReconfigDelta>,
    metadata: &Metadata,
) -> Result<(), Error> {
    let record = to_record(inst, prior, delta, metadata)?;
    std::fs::write(path, to_canonical_json(&record)).map_err(|e| Error::Io {
        context: format!("writing {}", path.display()),
        source: e,
    })
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        context: format!("reading {}", path.display()),
        source: e,
    })?;
    let record = parse_json(&path.display().to_string(), &text)?;
    from_record(&record)
}
