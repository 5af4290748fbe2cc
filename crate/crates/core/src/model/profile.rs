//! Time-indexed resource usage profiles.

use super::instance::{Amount, Horizon, Instance, StartMap, Task, Time};
use crate::error::Error;

/// Per-resource usage over a discrete horizon: the running commitment state
/// induced by already-placed tasks. Entries outside the stored span read 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageProfile {
    horizon: Horizon,
    /// usage[k][t - horizon.start]
    usage: Vec<Vec<Amount>>,
}

impl UsageProfile {
    pub fn zero(horizon: Horizon, n_resources: usize) -> Self {
        UsageProfile {
            horizon,
            usage: vec![vec![0; horizon.span()]; n_resources],
        }
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn n_resources(&self) -> usize {
        self.usage.len()
    }

    pub fn level(&self, k: usize, t: Time) -> Amount {
        if self.horizon.contains(t) {
            self.usage[k][self.horizon.index(t)]
        } else {
            0
        }
    }

    pub fn resource(&self, k: usize) -> &[Amount] {
        &self.usage[k]
    }

    /// Add (or with `sign = -1` remove) one task's contribution at `start`.
    pub fn apply_task(&mut self, task: &Task, start: Time, sign: i64) {
        for t in start..start + task.duration {
            if !self.horizon.contains(t) {
                continue;
            }
            let idx = self.horizon.index(t);
            for (k, &d) in task.demands.iter().enumerate() {
                self.usage[k][idx] += sign * d;
            }
        }
    }

    /// Peak usage per resource; 0 for an empty horizon.
    pub fn peaks(&self) -> Vec<Amount> {
        self.usage
            .iter()
            .map(|row| row.iter().copied().max().unwrap_or(0))
            .collect()
    }

    /// Sum of `u_k(t)` over the closed range `from..=to`, clamped to the
    /// stored span (entries outside it are zero by definition).
    pub fn sum_closed(&self, k: usize, from: Time, to: Time) -> i64 {
        let lo = from.max(self.horizon.start);
        let hi = to.min(self.horizon.end - 1);
        let mut acc = 0;
        for t in lo..=hi {
            acc += self.usage[k][self.horizon.index(t)];
        }
        acc
    }

    /// Pointwise sum with a profile over the same horizon.
    pub fn add_assign(&mut self, other: &UsageProfile) {
        assert_eq!(self.horizon, other.horizon, "profile horizon mismatch");
        assert_eq!(self.usage.len(), other.usage.len());
        for (a, b) in self.usage.iter_mut().zip(&other.usage) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    /// Pointwise difference; the inverse of [`UsageProfile::add_assign`].
    pub fn sub_assign(&mut self, other: &UsageProfile) {
        assert_eq!(self.horizon, other.horizon, "profile horizon mismatch");
        assert_eq!(self.usage.len(), other.usage.len());
        for (a, b) in self.usage.iter_mut().zip(&other.usage) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= *y;
            }
        }
    }

    pub(crate) fn rows_mut(&mut self) -> &mut Vec<Vec<Amount>> {
        &mut self.usage
    }

    pub fn is_zero(&self) -> bool {
        self.usage.iter().all(|row| row.iter().all(|&v| v == 0))
    }
}

/// Accumulate the usage of a (possibly partial) start assignment.
///
/// Unassigned tasks contribute nothing. A start outside its task window is an
/// error: profiles only ever describe window-feasible commitments.
pub fn build_usage_profile(inst: &Instance, starts: &StartMap) -> Result<UsageProfile, Error> {
    let mut profile = UsageProfile::zero(inst.horizon(), inst.n_resources());
    for (id, &start) in starts {
        let task = inst
            .task_by_id(id)
            .ok_or_else(|| Error::UnknownTask { id: id.clone() })?;
        if start < task.earliest_start || start > task.latest_start() {
            return Err(Error::StartOutsideWindow {
                task: id.clone(),
                start,
                earliest_start: task.earliest_start,
                latest_start: task.latest_start(),
            });
        }
        profile.apply_task(task, start, 1);
    }
    Ok(profile)
}
