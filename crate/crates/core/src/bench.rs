//! Benchmark harness: makespan tables, optimality gaps, ablation runs and
//! Gantt export.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, RewardMode};
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::petrinet::{FiringEvent, Time};
use crate::policies::{run_episode, Policy, PolicyKind, RulePolicy};
use crate::ppo::{train, Agent, NetworkParams, TrainConfig, TrainLog};
use crate::schedule::{validate, Schedule};

/// Relative improvement of `cmax` over `baseline`: `-(cmax - baseline) / baseline`.
/// Positive when `cmax` is the shorter makespan.
pub fn optimality_gap(cmax: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok((baseline - cmax) / baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub jobs: usize,
    pub machines: usize,
    pub policy: PolicyKind,
    pub makespan: Option<Time>,
    pub decision_steps: Option<u64>,
    pub clock_ticks: Option<u64>,
    pub wall_ms: f64,
    /// Gap against the baseline policy's makespan on the same instance.
    pub gap: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub schedule: Option<Schedule>,
    #[serde(skip)]
    pub events: Vec<FiringEvent>,
}

impl BenchRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub baseline: Option<PolicyKind>,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    instance: &'a str,
    jobs: usize,
    machines: usize,
    policy: PolicyKind,
    makespan: Option<Time>,
    decision_steps: Option<u64>,
    clock_ticks: Option<u64>,
    wall_ms: f64,
    gap: Option<f64>,
    error: Option<&'a str>,
}

impl BenchReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(BenchRow::is_ok)
    }

    pub fn row(&self, instance: &str, policy: PolicyKind) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.instance == instance && r.policy == policy)
    }

    /// Fills the gap column against `baseline`'s makespan per instance.
    pub fn compute_gaps(&mut self, baseline: PolicyKind) {
        self.baseline = Some(baseline);
        let bases: Vec<(String, Option<Time>)> = self
            .rows
            .iter()
            .filter(|r| r.policy == baseline)
            .map(|r| (r.instance.clone(), r.makespan))
            .collect();
        for row in &mut self.rows {
            let base = bases.iter().find(|(i, _)| *i == row.instance).and_then(|(_, m)| *m);
            row.gap = match (row.makespan, base) {
                (Some(c), Some(b)) => optimality_gap(c as f64, b as f64).ok(),
                _ => None,
            };
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                instance: &r.instance,
                jobs: r.jobs,
                machines: r.machines,
                policy: r.policy,
                makespan: r.makespan,
                decision_steps: r.decision_steps,
                clock_ticks: r.clock_ticks,
                wall_ms: r.wall_ms,
                gap: r.gap,
                error: r.error.as_deref(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let gap_header = match self.baseline {
            Some(b) => format!("gap vs {b}"),
            None => "gap".to_string(),
        };
        let header = ["instance", "size", "policy", "makespan", "decisions", "ticks", "ms", &gap_header];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        let opt = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
        for r in &self.rows {
            cells.push(vec![
                r.instance.clone(),
                format!("{}x{}", r.jobs, r.machines),
                r.policy.to_string(),
                match &r.error {
                    Some(e) => format!("error: {e}"),
                    None => opt(r.makespan),
                },
                opt(r.decision_steps),
                opt(r.clock_ticks),
                format!("{:.1}", r.wall_ms),
                r.gap.map_or("-".to_string(), |g| format!("{:+.1}%", g * 100.0)),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut text = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| if c < 3 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(text, "{}", line.join("  ").trim_end());
        }
        for note in &self.notes {
            let _ = writeln!(text, "note: {note}");
        }
        text
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchConfig {
    pub env: EnvConfig,
    /// Seed for the random policy.
    pub seed: u64,
    /// Parameters for the agent policy.
    pub agent: Option<NetworkParams>,
    pub baseline: Option<PolicyKind>,
}

fn run_row(name: &str, instance: &Instance, kind: PolicyKind, config: &BenchConfig) -> BenchRow {
    let start = Instant::now();
    let outcome = (|| {
        let mut policy: Box<dyn Policy> = match kind {
            PolicyKind::Agent => {
                let params = config
                    .agent
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("the agent policy needs a checkpoint".into()))?;
                Box::new(Agent::greedy(params))
            }
            other => Box::new(RulePolicy::new(other, config.seed)?),
        };
        let out = run_episode(policy.as_mut(), instance, &config.env)?;
        // re-checked here so no row is ever reported from an unchecked plan
        validate(&out.schedule, instance)?;
        Ok::<_, Error>(out)
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = BenchRow {
        instance: name.to_string(),
        jobs: instance.num_jobs(),
        machines: instance.num_machines(),
        policy: kind,
        makespan: None,
        decision_steps: None,
        clock_ticks: None,
        wall_ms,
        gap: None,
        error: None,
        schedule: None,
        events: Vec::new(),
    };
    match outcome {
        Ok(out) => {
            row.makespan = Some(out.schedule.makespan);
            row.decision_steps = Some(out.decision_steps);
            row.clock_ticks = Some(out.clock_ticks);
            row.schedule = Some(out.schedule);
            row.events = out.events;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every policy on every named instance. A failing row records its
/// error and the run continues. Rows are ordered by instance, then policy.
pub fn run_bench(instances: &[(String, Instance)], policies: &[PolicyKind], config: &BenchConfig) -> BenchReport {
    let mut report = BenchReport::default();
    for (name, instance) in instances {
        for &kind in policies {
            report.rows.push(run_row(name, instance, kind, config));
        }
    }
    if let Some(b) = config.baseline {
        report.compute_gaps(b);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Reference,
    /// Sample over the full action space; illegal picks are zero-reward no-ops.
    NoMask,
    /// -1 per decision step instead of the utilization reward.
    FixedReward,
    /// Query the agent every clock tick.
    NoEvent,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [Self::Reference, Self::NoMask, Self::FixedReward, Self::NoEvent];

    pub fn name(self) -> &'static str {
        match self {
            Self::Reference => "reference",
            Self::NoMask => "no_mask",
            Self::FixedReward => "fixed_reward",
            Self::NoEvent => "no_event",
        }
    }

    pub fn apply(self, base: &EnvConfig) -> EnvConfig {
        let mut cfg = base.clone();
        match self {
            Self::Reference => {}
            Self::NoMask => cfg.masking = false,
            Self::FixedReward => cfg.reward_mode = RewardMode::FixedNegative,
            Self::NoEvent => cfg.event_based = false,
        }
        cfg
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation mode {s:?}")))
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Trains under `mode` applied to `base`; same budget and seed as any
/// other mode given the same `train_config`.
pub fn run_ablation(
    instance: &Instance,
    mode: AblationMode,
    base: &EnvConfig,
    train_config: &TrainConfig,
) -> Result<(NetworkParams, TrainLog)> {
    train(std::slice::from_ref(instance), &mode.apply(base), train_config)
}

/// Mean over decision points of enabled allocations / capacity.
pub fn measure_enabled_fraction(instance: &Instance, policy: &mut dyn Policy, config: &EnvConfig) -> Result<f64> {
    Ok(run_episode(policy, instance, config)?.enabled_fraction)
}

/// First- and last-decile comparison of a series (e.g. episode lengths).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecileTrend {
    pub first_mean: f64,
    pub last_mean: f64,
    /// Welch's t statistic of first minus last.
    pub t: f64,
}

impl DecileTrend {
    /// Threshold on Welch's t for calling a decrease significant.
    pub const SIGNIFICANT_T: f64 = 2.0;

    pub fn of(series: &[f64]) -> Option<Self> {
        let d = series.len() / 10;
        if d < 2 {
            return None;
        }
        let (first, last) = (&series[..d], &series[series.len() - d..]);
        let stats = |xs: &[f64]| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var / n)
        };
        let (m1, s1) = stats(first);
        let (m2, s2) = stats(last);
        let se = (s1 + s2).sqrt();
        let t = if se > 0.0 {
            (m1 - m2) / se
        } else if m1 == m2 {
            0.0
        } else {
            f64::INFINITY.copysign(m1 - m2)
        };
        Some(Self { first_mean: m1, last_mean: m2, t })
    }

    /// The last decile is lower than the first by a significant margin.
    pub fn sustained_decrease(&self) -> bool {
        self.last_mean < self.first_mean && self.t > Self::SIGNIFICANT_T
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GanttFormat {
    Json,
    Csv,
    Svg,
}

impl FromStr for GanttFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            other => Err(Error::InvalidConfig(format!("unknown gantt format {other:?}"))),
        }
    }
}

const ROW_HEIGHT: f64 = 24.0;
const LABEL_WIDTH: f64 = 48.0;
const CHART_WIDTH: f64 = 960.0;

fn job_color(job: usize) -> String {
    // golden-angle hue steps keep neighbouring jobs apart
    let hue = (job as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},60%,65%)")
}

/// SVG Gantt chart: one row per machine, one labeled rect per operation.
pub fn render_svg(schedule: &Schedule) -> String {
    let machines = schedule.entries.iter().map(|e| e.machine + 1).max().unwrap_or(0);
    let span = schedule.makespan.max(1) as f64;
    let scale = CHART_WIDTH / span;
    let height = machines as f64 * ROW_HEIGHT + ROW_HEIGHT;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="10">"#,
        LABEL_WIDTH + CHART_WIDTH + 8.0
    );
    for m in 0..machines {
        let y = m as f64 * ROW_HEIGHT;
        let _ = writeln!(svg, r#"<text x="2" y="{:.1}">M{m}</text>"#, y + ROW_HEIGHT * 0.65);
    }
    for e in &schedule.entries {
        let x = LABEL_WIDTH + e.start as f64 * scale;
        let w = (e.end - e.start) as f64 * scale;
        let y = e.machine as f64 * ROW_HEIGHT + 2.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{y:.1}" width="{w:.2}" height="{:.1}" fill="{}" stroke="black" stroke-width="0.5"><title>job {} op {} [{}, {})</title></rect>"#,
            ROW_HEIGHT - 4.0,
            job_color(e.job),
            e.job,
            e.op,
            e.start,
            e.end
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + w / 2.0,
            y + ROW_HEIGHT * 0.55,
            e.job
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{LABEL_WIDTH}" y="{:.1}">makespan {}</text>"#,
        height - 6.0,
        schedule.makespan
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn export_gantt(schedule: &Schedule, path: &Path, format: GanttFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        GanttFormat::Json => schedule.write_json(&mut out)?,
        GanttFormat::Csv => schedule.write_csv(&mut out)?,
        GanttFormat::Svg => out.write_all(render_svg(schedule).as_bytes())?,
    }
    out.flush()?;
    Ok(())
}
