//! Schedules and an independent validity checker.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::petrinet::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    pub makespan: Time,
}

impl Schedule {
    /// Sorts entries by (job, op) and derives the makespan.
    pub fn from_entries(mut entries: Vec<ScheduleEntry>) -> Self {
        entries.sort_by_key(|e| (e.job, e.op));
        let makespan = entries.iter().map(|e| e.end).max().unwrap_or(0);
        Self { entries, makespan }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }

    /// CSV with header `job,op,machine,start,end`; the makespan is derived.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let entries = r.deserialize().collect::<Result<Vec<ScheduleEntry>, _>>()?;
        Ok(Self::from_entries(entries))
    }
}

/// Checks `schedule` against `instance`: one entry per operation on the
/// right machine, exact durations, job precedence, no machine overlap, and a
/// makespan equal to the last end time.
pub fn validate(schedule: &Schedule, instance: &Instance) -> Result<()> {
    let fail = |msg: String| Err(Error::InvalidSchedule(msg));

    let mut by_job: Vec<Vec<Option<&ScheduleEntry>>> =
        instance.jobs().iter().map(|ops| vec![None; ops.len()]).collect();
    for e in &schedule.entries {
        let Some(slot) = by_job.get_mut(e.job).and_then(|ops| ops.get_mut(e.op)) else {
            return fail(format!("entry for unknown operation ({}, {})", e.job, e.op));
        };
        if slot.replace(e).is_some() {
            return fail(format!("operation ({}, {}) scheduled twice", e.job, e.op));
        }
    }

    for (j, ops) in by_job.iter().enumerate() {
        let mut prev_end = 0;
        for (k, entry) in ops.iter().enumerate() {
            let Some(e) = entry else {
                return fail(format!("operation ({j}, {k}) missing"));
            };
            let op = instance.job(j)[k];
            if e.machine != op.machine {
                return fail(format!("operation ({j}, {k}) on machine {} not {}", e.machine, op.machine));
            }
            if e.end < e.start || e.end - e.start != Time::from(op.duration) {
                return fail(format!("operation ({j}, {k}) lasts {} not {}", e.end as i64 - e.start as i64, op.duration));
            }
            if e.start < prev_end {
                return fail(format!("operation ({j}, {k}) starts at {} before its predecessor ends at {prev_end}", e.start));
            }
            prev_end = e.end;
        }
    }

    let mut per_machine: Vec<Vec<&ScheduleEntry>> = vec![Vec::new(); instance.num_machines()];
    for e in &schedule.entries {
        per_machine[e.machine].push(e);
    }
    for (m, list) in per_machine.iter_mut().enumerate() {
        list.sort_by_key(|e| e.start);
        for pair in list.windows(2) {
            if pair[1].start < pair[0].end {
                return fail(format!(
                    "machine {m}: ({}, {}) overlaps ({}, {})",
                    pair[0].job, pair[0].op, pair[1].job, pair[1].op
                ));
            }
        }
    }

    let last = schedule.entries.iter().map(|e| e.end).max().unwrap_or(0);
    if last != schedule.makespan {
        return fail(format!("makespan {} but last operation ends at {last}", schedule.makespan));
    }
    Ok(())
}
