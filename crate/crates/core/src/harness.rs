//! Monte Carlo experiments over vehicle trajectories.
//!
//! Each trajectory sample becomes one message, sent once per
//! (attack, defense) cell. Every trial gets its own counter and attack
//! seed derived from its index, so results do not depend on how trials
//! are scheduled across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::adversary::{AttackPlan, FloatBit, FloatFieldTarget};
use crate::crypto::{scramble, Direction, Scrambler64, SecurityContext};
use crate::pipeline::{DefenseMode, Pipeline, PipelineError, Verdict};
use crate::wire::{ChecksumVariant, Field, Message};

pub const DEFAULT_TRIALS: usize = 500;
/// Separates key derivation from per-trial seeding.
const KEY_DOMAIN: u64 = 0x4E45_412D_4B45_5953;
const SYNTH_DOMAIN: u64 = 0x5452_414A_4543_5453;
const SYNTH_DT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse {column} value `{value}`")]
    BadCell {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("no usable trajectory samples")]
    NoData,
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("decay fit needs at least 2 nonzero rates, got {0}")]
    Fit(usize),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub vehicle_id: u32,
    pub frame_id: i64,
    pub local_x: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl TrajectorySample {
    fn problem(&self) -> Option<&'static str> {
        if !(self.local_x.is_finite() && self.velocity.is_finite() && self.acceleration.is_finite())
        {
            Some("non-finite value")
        } else if self.velocity < 0.0 {
            Some("negative velocity")
        } else {
            None
        }
    }

    pub fn to_message(&self) -> Result<Message, crate::wire::WireError> {
        Message::new(
            self.local_x as f32,
            self.velocity as f32,
            self.acceleration as f32,
        )
    }
}

/// A row that parsed but violates the sample invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryLoad {
    pub samples: Vec<TrajectorySample>,
    pub rejected: Vec<RejectedRow>,
}

pub fn load_trajectories(path: &Path) -> Result<TrajectoryLoad, HarnessError> {
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trajectories(file)
}

/// Reads comma-separated rows. Column names are matched case-insensitively;
/// the NGSIM names `Vehicle_ID, Frame_ID, Local_X, v_Vel, v_Acc` are
/// expected, with `Global_X` accepted when `Local_X` is absent.
pub fn read_trajectories<R: Read>(reader: R) -> Result<TrajectoryLoad, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    let find = |names: &[&str], label: &'static str| {
        names
            .iter()
            .find_map(|n| headers.iter().position(|h| h == n))
            .ok_or(HarnessError::MissingColumn(label))
    };
    let vehicle = find(&["vehicle_id", "vehicle"], "Vehicle_ID")?;
    let frame = find(&["frame_id", "frame"], "Frame_ID")?;
    let x = find(&["local_x", "global_x"], "Local_X")?;
    let vel = find(&["v_vel", "velocity"], "v_Vel")?;
    let acc = find(&["v_acc", "acceleration"], "v_Acc")?;

    let mut out = TrajectoryLoad::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |idx: usize, column: &'static str| {
            let value = record.get(idx).unwrap_or("");
            (value, column)
        };
        let bad = |(value, column): (&str, &'static str)| HarnessError::BadCell {
            line,
            column,
            value: value.to_string(),
        };
        let float = |c: (&str, &'static str)| c.0.parse::<f64>().map_err(|_| bad(c));
        let sample = TrajectorySample {
            vehicle_id: {
                let c = cell(vehicle, "Vehicle_ID");
                c.0.parse().map_err(|_| bad(c))?
            },
            frame_id: {
                let c = cell(frame, "Frame_ID");
                c.0.parse().map_err(|_| bad(c))?
            },
            local_x: float(cell(x, "Local_X"))?,
            velocity: float(cell(vel, "v_Vel"))?,
            acceleration: float(cell(acc, "v_Acc"))?,
        };
        match sample.problem() {
            Some(reason) => out.rejected.push(RejectedRow { line, reason }),
            None => out.samples.push(sample),
        }
    }
    Ok(out)
}

/// Bounded random walk: acceleration in [-10, 10] ft/s², velocity in
/// [0, 80] ft/s integrated at 0.1 s steps, position cumulative.
pub fn synth_trajectories(seed: u64, vehicles: usize, samples_per_vehicle: usize) -> Vec<TrajectorySample> {
    let mut out = Vec::with_capacity(vehicles * samples_per_vehicle);
    for v in 0..vehicles {
        let mut rng = Scrambler64::new(scramble(seed ^ SYNTH_DOMAIN) ^ scramble(v as u64));
        let mut x = 500.0 * rng.unit_f64();
        let mut vel = 15.0 + 50.0 * rng.unit_f64();
        let mut acc = 4.0 * rng.unit_f64() - 2.0;
        for frame in 0..samples_per_vehicle {
            out.push(TrajectorySample {
                vehicle_id: v as u32 + 1,
                frame_id: frame as i64 + 1,
                local_x: x,
                velocity: vel,
                acceleration: acc,
            });
            acc = (acc + 3.0 * rng.unit_f64() - 1.5).clamp(-10.0, 10.0);
            vel = (vel + acc * SYNTH_DT).clamp(0.0, 80.0);
            x += vel * SYNTH_DT;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic { vehicles: usize },
    Samples(Vec<TrajectorySample>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub attacks: Vec<AttackPlan>,
    pub defenses: Vec<DefenseMode>,
    pub variant: ChecksumVariant,
    /// Trials per vehicle: the first `trials` valid samples are used.
    pub trials: usize,
    pub seed: u64,
    pub source: DataSource,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(attacks: Vec<AttackPlan>, defenses: Vec<DefenseMode>, source: DataSource) -> Self {
        ExperimentConfig {
            attacks,
            defenses,
            variant: ChecksumVariant::Standard,
            trials: DEFAULT_TRIALS,
            seed: 0,
            source,
            threads: None,
        }
    }

    /// Checksum-pair plans for a list of flip counts (2 flips per pair).
    pub fn checksum_plans(flips: &[usize]) -> Result<Vec<AttackPlan>, HarnessError> {
        flips
            .iter()
            .map(|&f| {
                if f == 0 || f % 2 != 0 || f > 32 {
                    Err(HarnessError::Config(format!(
                        "checksum attacks need an even flip count in 2..=32, got {f}"
                    )))
                } else {
                    Ok(AttackPlan::Checksum {
                        pairs: f / 2,
                        field: None,
                    })
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.attacks.is_empty() || self.defenses.is_empty() {
            return Err(HarnessError::Config("need at least one attack and one defense".into()));
        }
        Ok(())
    }

    fn samples(&self) -> Result<Vec<TrajectorySample>, HarnessError> {
        match &self.source {
            DataSource::File(path) => Ok(load_trajectories(path)?.samples),
            DataSource::Synthetic { vehicles } => {
                Ok(synth_trajectories(self.seed, *vehicles, self.trials))
            }
            DataSource::Samples(s) => Ok(s.clone()),
        }
    }
}

/// The four payload-position settings: a checksum pair on the
/// acceleration float, then acceleration/velocity pairs on the sign bit,
/// the second exponent bit and the first mantissa bit.
pub fn sweep_settings() -> Vec<AttackPlan> {
    let pair = |bit| {
        AttackPlan::Payload(
            FloatFieldTarget {
                field: Field::Acceleration,
                bit,
            },
            FloatFieldTarget {
                field: Field::Velocity,
                bit,
            },
        )
    };
    vec![
        AttackPlan::Checksum {
            pairs: 1,
            field: Some(Field::Acceleration),
        },
        pair(FloatBit::Sign),
        pair(FloatBit::ExponentSecondMsb),
        pair(FloatBit::MantissaMsb),
    ]
}

pub fn plan_label(plan: &AttackPlan) -> String {
    match plan {
        AttackPlan::Checksum { field: None, .. } => "checksum".into(),
        AttackPlan::Checksum {
            field: Some(field), ..
        } => format!("checksum+{field}"),
        AttackPlan::Payload(a, b) => format!("payload:{a};{b}"),
        AttackPlan::Custom(_) => "custom".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportCell {
    pub vehicle: u32,
    pub strategy: String,
    pub flips: usize,
    pub defense: DefenseMode,
    pub trials: usize,
    pub successes: usize,
    /// Indexed by [`Verdict::index`].
    pub histogram: [usize; 5],
}

impl ReportCell {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.histogram[verdict.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExperimentReport {
    pub cells: Vec<ReportCell>,
}

pub const REPORT_HEADER: &str = "vehicle,strategy,flips,defense,trials,successes,rate";
pub const DECAY_HEADER: &str = "flips,rate,reference_rate";

impl ExperimentReport {
    pub fn cells_for<'a>(
        &'a self,
        strategy: &'a str,
        defense: DefenseMode,
    ) -> impl Iterator<Item = &'a ReportCell> + 'a {
        self.cells
            .iter()
            .filter(move |c| c.strategy == strategy && c.defense == defense)
    }

    pub fn cell(&self, vehicle: u32, strategy: &str, flips: usize, defense: DefenseMode) -> Option<&ReportCell> {
        self.cells.iter().find(|c| {
            c.vehicle == vehicle && c.strategy == strategy && c.flips == flips && c.defense == defense
        })
    }

    pub fn vehicles(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.cells.iter().map(|c| c.vehicle).collect();
        v.dedup();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Success rate per flip count, pooled over vehicles.
    pub fn decay_points(&self, strategy: &str, defense: DefenseMode) -> Vec<(usize, f64)> {
        let mut pooled: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for c in self.cells_for(strategy, defense) {
            let e = pooled.entry(c.flips).or_default();
            e.0 += c.successes;
            e.1 += c.trials;
        }
        pooled
            .into_iter()
            .map(|(f, (s, t))| (f, s as f64 / t as f64))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.4}",
                c.vehicle,
                c.strategy,
                c.flips,
                c.defense,
                c.trials,
                c.successes,
                c.rate()
            );
        }
        out
    }

    /// One pivot table per (strategy, defense): vehicles down, flips across.
    pub fn to_markdown(&self) -> String {
        let mut groups: Vec<(String, DefenseMode)> = Vec::new();
        for c in &self.cells {
            if !groups.iter().any(|(s, d)| *s == c.strategy && *d == c.defense) {
                groups.push((c.strategy.clone(), c.defense));
            }
        }
        let mut out = String::new();
        for (strategy, defense) in groups {
            let cells: Vec<&ReportCell> = self.cells_for(&strategy, defense).collect();
            let mut flips: Vec<usize> = cells.iter().map(|c| c.flips).collect();
            flips.sort_unstable();
            flips.dedup();
            let _ = writeln!(out, "### {strategy}, defense={defense}\n");
            out.push_str("| vehicle |");
            for f in &flips {
                let _ = write!(out, " {f} flips |");
            }
            out.push_str("\n|---|");
            out.push_str(&"---|".repeat(flips.len()));
            out.push('\n');
            for v in self.vehicles() {
                let _ = write!(out, "| {v} |");
                for f in &flips {
                    match cells.iter().find(|c| c.vehicle == v && c.flips == *f) {
                        Some(c) => {
                            let _ = write!(out, " {:.3} |", c.rate());
                        }
                        None => out.push_str(" - |"),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    pub fn decay_csv(&self, strategy: &str, defense: DefenseMode) -> String {
        let mut out = String::from(DECAY_HEADER);
        out.push('\n');
        for (flips, rate) in self.decay_points(strategy, defense) {
            let reference = (-(flips as f64) / 2.0).exp2();
            let _ = writeln!(out, "{flips},{rate:.4},{reference:.4}");
        }
        out
    }

    pub fn verdict_totals(&self) -> [usize; 5] {
        let mut t = [0; 5];
        for c in &self.cells {
            for (acc, n) in t.iter_mut().zip(c.histogram) {
                *acc += n;
            }
        }
        t
    }
}

/// Shared key for a whole experiment, derived from the master seed.
pub fn experiment_key(seed: u64) -> [u8; 16] {
    let mut key = [0u8; 16];
    Scrambler64::new(scramble(seed ^ KEY_DOMAIN)).fill_bytes(&mut key);
    key
}

pub fn trial_seed(master: u64, trial_index: u64) -> u64 {
    scramble(master ^ trial_index)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let samples = cfg.samples()?;
    let mut by_vehicle: Vec<(u32, Vec<Message>)> = Vec::new();
    for s in samples {
        let Ok(m) = s.to_message() else { continue };
        let slot = match by_vehicle.iter().position(|(v, _)| *v == s.vehicle_id) {
            Some(i) => i,
            None => {
                by_vehicle.push((s.vehicle_id, Vec::new()));
                by_vehicle.len() - 1
            }
        };
        if by_vehicle[slot].1.len() < cfg.trials {
            by_vehicle[slot].1.push(m);
        }
    }
    if by_vehicle.is_empty() {
        return Err(HarnessError::NoData);
    }

    let work = || run_cells(cfg, &by_vehicle);
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn run_cells(cfg: &ExperimentConfig, by_vehicle: &[(u32, Vec<Message>)]) -> Result<ExperimentReport, HarnessError> {
    let key = experiment_key(cfg.seed);
    let base = SecurityContext::new(key, 0, 0, Direction::Uplink).expect("bearer 0 is valid");
    let mut report = ExperimentReport::default();
    for (ordinal, (vehicle, messages)) in by_vehicle.iter().enumerate() {
        for plan in &cfg.attacks {
            for &defense in &cfg.defenses {
                let pipeline = Pipeline::new(defense, cfg.variant);
                let layout = pipeline.layout(crate::wire::MESSAGE_LEN);
                let verdicts = messages
                    .par_iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let index = (ordinal * cfg.trials + i) as u64;
                        let spec = plan.realize(&layout, trial_seed(cfg.seed, index))
                            .map_err(PipelineError::from)?;
                        let ctx = base.with_count(index as u32);
                        Ok(pipeline.run_trial(m, &ctx, &spec)?.verdict)
                    })
                    .collect::<Result<Vec<Verdict>, HarnessError>>()?;
                let mut histogram = [0; 5];
                for v in &verdicts {
                    histogram[v.index()] += 1;
                }
                report.cells.push(ReportCell {
                    vehicle: *vehicle,
                    strategy: plan_label(plan),
                    flips: plan.flips(),
                    defense,
                    trials: verdicts.len(),
                    successes: histogram[Verdict::AcceptedMutated.index()],
                    histogram,
                });
            }
        }
    }
    Ok(report)
}

/// Runs the payload-position settings (see [`sweep_settings`]) under the
/// configuration's defenses and data.
pub fn payload_position_sweep(
    cfg: &ExperimentConfig,
    targets: &[AttackPlan],
) -> Result<ExperimentReport, HarnessError> {
    let cfg = ExperimentConfig {
        attacks: targets.to_vec(),
        ..cfg.clone()
    };
    run_experiment(&cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of log2(rate) against flips.
    pub slope: f64,
    pub intercept: f64,
    pub used: Vec<(usize, f64)>,
    /// Flip counts dropped because their rate was zero.
    pub excluded: Vec<usize>,
}

pub fn fit_decay(points: &[(usize, f64)]) -> Result<DecayFit, HarnessError> {
    let (used, zero): (Vec<_>, Vec<_>) = points.iter().copied().partition(|(_, r)| *r > 0.0);
    if used.len() < 2 {
        return Err(HarnessError::Fit(used.len()));
    }
    let n = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|(f, _)| *f as f64).collect();
    let ys: Vec<f64> = used.iter().map(|(_, r)| r.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Fit(1));
    }
    let slope = sxy / sxx;
    Ok(DecayFit {
        slope,
        intercept: my - slope * mx,
        used,
        excluded: zero.into_iter().map(|(f, _)| f).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_ngsim_columns() {
        let csv = "Vehicle_ID,Frame_ID,Total_Frames,Local_X,Local_Y,v_Vel,v_Acc\n\
                   2,13,437,16.467,35.381,40.00,0.00\n\
                   2,14,437,16.447,39.381,40.00,0.00\n\
                   3,20,400,5.0,1.0,-1.0,0.5\n\
                   3,21,400,5.0,1.0,30.0,-2.5\n";
        let load = read_trajectories(csv.as_bytes()).unwrap();
        assert_eq!(load.samples.len(), 3);
        assert_eq!(load.samples[2].acceleration, -2.5);
        assert_eq!(
            load.rejected,
            vec![RejectedRow {
                line: 4,
                reason: "negative velocity"
            }]
        );
    }

    #[test]
    fn load_errors_carry_location() {
        let err = read_trajectories("vehicle_id,frame_id,local_x,v_vel\n1,1,1,1\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, HarnessError::MissingColumn("v_Acc")));
        let err = read_trajectories(
            "vehicle_id,frame_id,local_x,v_vel,v_acc\n1,1,1,1,0\n1,2,abc,1,0\n".as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            HarnessError::BadCell {
                line: 3,
                column: "Local_X",
                ..
            }
        ));
        let missing = load_trajectories(Path::new("/nonexistent/trajectories.csv"));
        assert!(matches!(missing, Err(HarnessError::Io { .. })));
    }

    #[test]
    fn nan_rows_are_rejected() {
        let load =
            read_trajectories("vehicle_id,frame_id,local_x,v_vel,v_acc\n1,1,NaN,1,0\n".as_bytes())
                .unwrap();
        assert!(load.samples.is_empty());
        assert_eq!(load.rejected[0].reason, "non-finite value");
    }

    #[test]
    fn synthetic_walk_is_bounded_and_deterministic() {
        let a = synth_trajectories(9, 3, 500);
        assert_eq!(a.len(), 1500);
        assert_eq!(a, synth_trajectories(9, 3, 500));
        assert_ne!(a, synth_trajectories(10, 3, 500));
        for s in &a {
            assert!(s.problem().is_none());
            assert!((-10.0..=10.0).contains(&s.acceleration));
            assert!((0.0..=80.0).contains(&s.velocity));
        }
    }

    #[test]
    fn decay_fit_examples() {
        let exact = [(2, 0.5), (4, 0.25), (6, 0.125), (8, 0.0625)];
        let fit = fit_decay(&exact).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);

        let with_zero = [(2, 0.03), (4, 0.004), (6, 0.0), (8, 0.002)];
        let fit = fit_decay(&with_zero).unwrap();
        assert_eq!(fit.excluded, vec![6]);
        assert_eq!(fit.used.len(), 3);

        assert!(matches!(
            fit_decay(&[(2, 0.0), (4, 0.0), (6, 0.0)]),
            Err(HarnessError::Fit(0))
        ));
    }

    #[test]
    fn checksum_plans_reject_bad_flips() {
        assert!(ExperimentConfig::checksum_plans(&[0]).is_err());
        assert!(ExperimentConfig::checksum_plans(&[3]).is_err());
        assert!(ExperimentConfig::checksum_plans(&[34]).is_err());
        assert_eq!(ExperimentConfig::checksum_plans(&[2, 8]).unwrap().len(), 2);
    }

    #[test]
    fn report_formats() {
        let cfg = ExperimentConfig {
            trials: 20,
            seed: 1,
            ..ExperimentConfig::new(
                ExperimentConfig::checksum_plans(&[2, 4]).unwrap(),
                vec![DefenseMode::NONE],
                DataSource::Synthetic { vehicles: 2 },
            )
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.cells.len(), 4);
        let csv = r.to_csv();
        assert!(csv.starts_with(REPORT_HEADER));
        assert_eq!(csv.lines().count(), 5);
        assert!(r.to_markdown().contains("| 1 |"));
        let decay = r.decay_csv("checksum", DefenseMode::NONE);
        assert!(decay.contains("2,") && decay.contains(",0.5000\n"));
        for c in &r.cells {
            assert_eq!(c.histogram.iter().sum::<usize>(), c.trials);
        }
    }
}
