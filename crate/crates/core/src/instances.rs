//! Job-shop instances: the data model, the Taillard linear congruential
//! generator, and readers/writers for the Taillard and OR-library text formats.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One operation of a job: the machine it must visit and for how long.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub machine: usize,
    pub duration: u32,
}

impl Operation {
    pub fn new(machine: usize, duration: u32) -> Self {
        Self { machine, duration }
    }
}

/// A J x M job-shop problem. Each job is an ordered list of operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    num_machines: usize,
    jobs: Vec<Vec<Operation>>,
}

impl Instance {
    /// Builds an instance, checking that every job is nonempty, every machine
    /// index is below `num_machines` and every duration is at least one.
    pub fn new(num_machines: usize, jobs: Vec<Vec<Operation>>) -> Result<Self> {
        if num_machines == 0 {
            return Err(Error::InvalidInstance("zero machines".into()));
        }
        for (j, ops) in jobs.iter().enumerate() {
            if ops.is_empty() {
                return Err(Error::InvalidInstance(format!("job {j} has no operations")));
            }
            for (k, op) in ops.iter().enumerate() {
                if op.machine >= num_machines {
                    return Err(Error::InvalidInstance(format!(
                        "job {j} operation {k} uses machine {} of {num_machines}",
                        op.machine
                    )));
                }
                if op.duration == 0 {
                    return Err(Error::InvalidInstance(format!(
                        "job {j} operation {k} has zero duration"
                    )));
                }
            }
        }
        Ok(Self { num_machines, jobs })
    }

    /// Builds an instance from row-major duration and machine-order matrices
    /// (machines 0-indexed).
    pub fn from_matrices(durations: &[Vec<u32>], machines: &[Vec<usize>]) -> Result<Self> {
        if durations.len() != machines.len() {
            return Err(Error::InvalidInstance(
                "duration and machine matrices differ in row count".into(),
            ));
        }
        let num_machines = machines.first().map_or(0, Vec::len);
        let jobs = durations
            .iter()
            .zip(machines)
            .map(|(d, m)| {
                if d.len() != m.len() {
                    return Err(Error::InvalidInstance("ragged matrices".into()));
                }
                Ok(m.iter().zip(d).map(|(&m, &d)| Operation::new(m, d)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(num_machines, jobs)
    }

    pub fn num_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn num_machines(&self) -> usize {
        self.num_machines
    }

    pub fn jobs(&self) -> &[Vec<Operation>] {
        &self.jobs
    }

    pub fn job(&self, j: usize) -> &[Operation] {
        &self.jobs[j]
    }

    pub fn total_operations(&self) -> usize {
        self.jobs.iter().map(Vec::len).sum()
    }

    pub fn max_duration(&self) -> u32 {
        self.jobs.iter().flatten().map(|op| op.duration).max().unwrap_or(0)
    }

    /// True when every job visits every machine exactly once.
    pub fn is_standard(&self) -> bool {
        self.jobs.iter().all(|ops| {
            let mut seen = vec![false; self.num_machines];
            ops.len() == self.num_machines
                && ops.iter().all(|op| !std::mem::replace(&mut seen[op.machine], true))
        })
    }

    /// Appends an operation to the tail of job `job`, extending the job list
    /// if `job` is past the current end (intermediate jobs must already exist).
    pub(crate) fn push_operation(&mut self, job: usize, op: Operation) -> Result<()> {
        if op.machine >= self.num_machines || op.duration == 0 {
            return Err(Error::BadIndex(format!("operation {op:?}")));
        }
        while self.jobs.len() <= job {
            self.jobs.push(Vec::new());
        }
        self.jobs[job].push(op);
        Ok(())
    }

    /// Canonical serialization (OR-library text, 0-indexed machines).
    pub fn to_orlib(&self) -> String {
        let mut out = format!("{} {}\n", self.num_jobs(), self.num_machines);
        for ops in &self.jobs {
            let row: Vec<String> = ops
                .iter()
                .map(|op| format!("{} {}", op.machine, op.duration))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Taillard text: header, durations matrix, 1-indexed machine matrix.
    /// Requires every job to have exactly M operations.
    pub fn to_taillard(&self) -> Result<String> {
        let m = self.num_machines;
        if let Some((j, ops)) = self.jobs.iter().enumerate().find(|(_, ops)| ops.len() != m) {
            return Err(Error::InvalidInstance(format!(
                "job {j} has {} operations; the Taillard layout needs {m}",
                ops.len()
            )));
        }
        let mut out = format!("{} {}\n", self.num_jobs(), m);
        for ops in &self.jobs {
            for op in ops {
                let _ = write!(out, "{:>3} ", op.duration);
            }
            out.pop();
            out.push('\n');
        }
        for ops in &self.jobs {
            for op in ops {
                let _ = write!(out, "{:>3} ", op.machine + 1);
            }
            out.pop();
            out.push('\n');
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Taillard's generator

/// Modulus of the Lehmer generator, 2^31 - 1.
pub const LCG_MODULUS: i64 = 2_147_483_647;
const LCG_A: i64 = 16_807;
const LCG_B: i64 = 127_773;
const LCG_C: i64 = 2_836;

/// State of the minimal-standard Lehmer generator, advanced with Schrage's
/// decomposition so that every intermediate fits in a signed 64-bit (in fact
/// 32-bit) integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LcgState(i64);

impl LcgState {
    pub fn new(seed: i64) -> Result<Self> {
        if (1..LCG_MODULUS).contains(&seed) {
            Ok(Self(seed))
        } else {
            Err(Error::InvalidSeed(seed))
        }
    }

    pub fn value(self) -> i64 {
        self.0
    }

    /// One generator step: returns the successor state and `X'/m` in (0, 1).
    pub fn step(self) -> (Self, f64) {
        let k = self.0 / LCG_B;
        let mut next = LCG_A * (self.0 % LCG_B) - k * LCG_C;
        if next < 0 {
            next += LCG_MODULUS;
        }
        (Self(next), next as f64 / LCG_MODULUS as f64)
    }

    pub fn next_unit(&mut self) -> f64 {
        let (next, u) = self.step();
        *self = next;
        u
    }

    /// `floor(lo + u * (hi - lo + 1))`, consuming exactly one step.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> Result<i64> {
        if lo > hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        let u = self.next_unit();
        Ok(scale_unit(u, lo, hi))
    }
}

pub(crate) fn scale_unit(u: f64, lo: i64, hi: i64) -> i64 {
    let v = (lo as f64 + u * (hi - lo + 1) as f64).floor() as i64;
    v.clamp(lo, hi)
}

/// Generates a random instance the way Taillard's benchmarks were built:
/// durations in [1, 99] drawn row-major from the time stream, then each job's
/// machine order shuffled with swaps drawn from the machine stream.
pub fn generate_random(
    jobs: usize,
    machines: usize,
    time_seed: i64,
    machine_seed: i64,
) -> Result<Instance> {
    if jobs == 0 || machines == 0 {
        return Err(Error::InvalidInstance(format!(
            "cannot generate a {jobs}x{machines} instance"
        )));
    }
    let mut time_rng = LcgState::new(time_seed)?;
    let mut machine_rng = LcgState::new(machine_seed)?;

    let mut durations = vec![vec![0u32; machines]; jobs];
    for row in durations.iter_mut() {
        for d in row.iter_mut() {
            *d = time_rng.uniform_int(1, 99)? as u32;
        }
    }

    let last = machines as i64 - 1;
    let mut orders: Vec<Vec<usize>> = (0..jobs).map(|_| (0..machines).collect()).collect();
    for row in orders.iter_mut() {
        for j in 0..machines {
            let k = machine_rng.uniform_int(j as i64, last)? as usize;
            row.swap(j, k);
        }
    }
    Instance::from_matrices(&durations, &orders)
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceFormat {
    Taillard,
    Orlib,
}

impl FromStr for InstanceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "taillard" | "ta" => Ok(Self::Taillard),
            "orlib" | "or-library" | "or" => Ok(Self::Orlib),
            other => Err(Error::InvalidConfig(format!("unknown instance format {other:?}"))),
        }
    }
}

/// A numeric line of an instance file, 1-based line number.
struct Row {
    line: usize,
    values: Vec<i64>,
}

/// Splits text into numeric rows. Lines whose first token does not start
/// like a number (headers such as "Times" or "Nb of jobs, ...") and blank
/// lines are skipped; inside a numeric line every token must be an integer.
fn numeric_rows(text: &str) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_start();
        let Some(first) = trimmed.chars().next() else {
            continue;
        };
        if !(first.is_ascii_digit() || first == '-' || first == '+') {
            continue;
        }
        let mut values = Vec::new();
        let mut offset = 0;
        for token in raw.split_whitespace() {
            let column = raw[offset..].find(token).map_or(offset, |p| p + offset) + 1;
            offset = column - 1 + token.len();
            let v = token.parse::<i64>().map_err(|_| Error::Parse {
                line,
                column,
                message: format!("expected an integer, found {token:?}"),
            })?;
            values.push(v);
        }
        rows.push(Row { line, values });
    }
    Ok(rows)
}

fn header(rows: &[Row]) -> Result<(usize, usize)> {
    let row = rows.first().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "missing \"J M\" header".into(),
    })?;
    if row.values.len() < 2 {
        return Err(Error::Parse {
            line: row.line,
            column: 1,
            message: "header must hold the job and machine counts".into(),
        });
    }
    let (j, m) = (row.values[0], row.values[1]);
    if j < 0 || m <= 0 {
        return Err(Error::Parse {
            line: row.line,
            column: 1,
            message: format!("invalid dimensions {j} x {m}"),
        });
    }
    Ok((j as usize, m as usize))
}

fn duration_at(v: i64, line: usize) -> Result<u32> {
    u32::try_from(v).ok().filter(|&d| d >= 1).ok_or(Error::InvalidInstance(format!(
        "duration {v} on line {line} must be a positive integer"
    )))
}

fn machine_at(v: i64, line: usize, machines: usize, one_based: bool) -> Result<usize> {
    let idx = if one_based { v - 1 } else { v };
    if idx < 0 || idx >= machines as i64 {
        return Err(Error::MachineOutOfRange {
            line,
            machine: v,
            machines,
        });
    }
    Ok(idx as usize)
}

fn missing_rows(rows: &[Row], needed: usize, what: &str) -> Error {
    let line = rows.last().map_or(1, |r| r.line);
    Error::Parse {
        line,
        column: 1,
        message: format!("expected {needed} {what} rows, file ended early"),
    }
}

/// Parses an instance file. Trailing rows beyond the declared dimensions are
/// ignored.
pub fn parse_instance(text: &str, format: InstanceFormat) -> Result<Instance> {
    let rows = numeric_rows(text)?;
    let (num_jobs, num_machines) = header(&rows)?;
    let body = &rows[1..];
    let jobs = match format {
        InstanceFormat::Taillard => {
            if body.len() < 2 * num_jobs {
                return Err(missing_rows(&rows, 2 * num_jobs, "matrix"));
            }
            let (times, orders) = body[..2 * num_jobs].split_at(num_jobs);
            for row in times.iter().chain(orders) {
                if row.values.len() != num_machines {
                    return Err(Error::DimensionMismatch {
                        line: row.line,
                        expected: num_machines,
                        found: row.values.len(),
                    });
                }
            }
            times
                .iter()
                .zip(orders)
                .map(|(t, o)| {
                    t.values
                        .iter()
                        .zip(&o.values)
                        .map(|(&d, &m)| {
                            Ok(Operation::new(
                                machine_at(m, o.line, num_machines, true)?,
                                duration_at(d, t.line)?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?
        }
        InstanceFormat::Orlib => {
            if body.len() < num_jobs {
                return Err(missing_rows(&rows, num_jobs, "job"));
            }
            body[..num_jobs]
                .iter()
                .map(|row| {
                    if row.values.is_empty() || row.values.len() % 2 != 0 {
                        return Err(Error::DimensionMismatch {
                            line: row.line,
                            expected: 2 * num_machines,
                            found: row.values.len(),
                        });
                    }
                    row.values
                        .chunks_exact(2)
                        .map(|pair| {
                            Ok(Operation::new(
                                machine_at(pair[0], row.line, num_machines, false)?,
                                duration_at(pair[1], row.line)?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Instance::new(num_machines, jobs)
}

/// Reads and parses an instance file.
pub fn load_instance(path: impl AsRef<std::path::Path>, format: InstanceFormat) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text, format)
}

/// Taillard instances bundled with the crate.
pub mod bundled {
    use super::{parse_instance, Instance, InstanceFormat};

    pub const TA01: &str = include_str!("../data/ta01.txt");
    pub const TA31: &str = include_str!("../data/ta31.txt");
    pub const TA41: &str = include_str!("../data/ta41.txt");

    /// ta01, 15 jobs x 15 machines.
    pub fn ta01() -> Instance {
        parse_instance(TA01, InstanceFormat::Taillard).expect("bundled ta01 parses")
    }

    /// ta31, 30 jobs x 15 machines.
    pub fn ta31() -> Instance {
        parse_instance(TA31, InstanceFormat::Taillard).expect("bundled ta31 parses")
    }

    /// ta41, 30 jobs x 20 machines.
    pub fn ta41() -> Instance {
        parse_instance(TA41, InstanceFormat::Taillard).expect("bundled ta41 parses")
    }

    pub fn by_name(name: &str) -> Option<Instance> {
        match name {
            "ta01" => Some(ta01()),
            "ta31" => Some(ta31()),
            "ta41" => Some(ta41()),
            _ => None,
        }
    }
}
