//! `bitflip` command line.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::adversary::{AttackPlan, AttackSpec, Strategy};
use crate::crypto::{
    derive_keystream, Direction, FixedKeystream, KeystreamGenerator, ScramblerMac, SecurityContext,
};
use crate::harness::{
    experiment_key, fit_decay, payload_position_sweep, run_experiment, sweep_settings, DataSource,
    ExperimentConfig, ExperimentReport, HarnessError,
};
use crate::pipeline::{mitm_tamper, DefenseMode, Pipeline, PipelineError, Verdict};
use crate::vectors::{all_vector_files, to_hex};
use crate::wire::{ChecksumVariant, Field, Message, WireLayout, CHECKSUM_BIT_OFFSET};

/// Ciphered values shown in the reference walkthrough.
pub const REFERENCE_CIPHERED_CHECKSUM: u16 = 0xC354;
pub const REFERENCE_CIPHERED_ACCELERATION: u32 = 0xE2C2_CE32;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Clap(e) => e.exit_code(),
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bitflip", version, about = "Bit-flipping attacks on ciphered UDP payloads and a keystream shuffling defense")]
struct Cli {
    #[command(subcommand)]
    command: RawCommand,
}

#[derive(Debug, Subcommand)]
enum RawCommand {
    /// Walk one packet through sender, attacker and receiver with hex dumps.
    Demo(DemoArgs),
    /// Run the attack × defense success-rate matrix.
    Experiment(ExperimentArgs),
    /// Run the four payload-position settings.
    Sweep(SweepArgs),
    /// Write checksum, scrambler, keystream, MAC and permutation vectors.
    Vectors(VectorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// `checksum`, `payload`, `none`, or a full form such as `checksum:k=2`,
    /// `payload:acc.sign,vel.sign`, `custom:56,136`.
    #[arg(long, default_value = "checksum")]
    attack: String,
    /// position,velocity,acceleration
    #[arg(long, default_value = "300.0,25.0,2.0", value_delimiter = ',', allow_negative_numbers = true)]
    message: Vec<f32>,
    /// none, shuffle, mac or shuffle+mac
    #[arg(long, default_value = "none")]
    defense: String,
    #[arg(long, value_enum, default_value = "standard")]
    variant: VariantArg,
    /// Seeds the key and any random attack positions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Packet counter.
    #[arg(long, default_value_t = 0)]
    count: u32,
    /// Steer the keystream so the ciphered checksum is 0xc354 and the ciphered
    /// acceleration 0xe2c2ce32, as in the reference walkthrough.
    #[arg(long)]
    reference_ciphertext: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    Inverted,
}

impl From<VariantArg> for ChecksumVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => ChecksumVariant::Standard,
            VariantArg::Inverted => ChecksumVariant::Inverted,
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Trajectory CSV (Vehicle_ID, Frame_ID, Local_X, v_Vel, v_Acc).
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Number of synthetic vehicles (used when --input is absent).
    #[arg(long)]
    synthetic: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Comma-separated list of none, shuffle, mac, shuffle+mac.
    #[arg(long, value_delimiter = ',')]
    defense: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "standard")]
    variant: VariantArg,
    /// Trials (samples) per vehicle.
    #[arg(long, default_value_t = crate::harness::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    data: DataArgs,
    /// Report file; the report goes to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// checksum, payload, custom, or a full attack form like `payload:acc.sign,vel.sign`.
    #[arg(long, default_value = "checksum")]
    strategy: String,
    /// Flip counts for the checksum strategy.
    #[arg(long, value_delimiter = ',')]
    flips: Option<Vec<usize>>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct VectorArgs {
    /// Directory to write the vector files into.
    #[arg(long, default_value = "vectors")]
    output: PathBuf,
}

#[derive(Debug, Clone)]
pub struct DemoConfig {
    pub attack: Option<AttackPlan>,
    pub message: Message,
    pub defense: DefenseMode,
    pub variant: ChecksumVariant,
    pub seed: u64,
    pub count: u32,
    pub reference_ciphertext: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone)]
pub enum CliCommand {
    Demo(DemoConfig),
    Experiment(ExperimentConfig, RunOutput),
    Sweep(ExperimentConfig, RunOutput),
    Vectors(PathBuf),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_defenses(list: Option<Vec<String>>, default: &[DefenseMode]) -> Result<Vec<DefenseMode>, CliError> {
    match list {
        None => Ok(default.to_vec()),
        Some(items) => items.iter().map(|s| s.parse().map_err(usage)).collect(),
    }
}

fn parse_plan(text: &str, default_field_pair: bool) -> Result<Option<AttackPlan>, CliError> {
    let plan = match text {
        "none" => return Ok(None),
        // Single pair at column 8: checksum bit and the acceleration
        // exponent LSB (2.0 -> 4.0).
        "checksum" if default_field_pair => AttackPlan::Custom(vec![56, 136]),
        "checksum" => AttackPlan::Checksum {
            pairs: 1,
            field: None,
        },
        "payload" => "payload:position.11,velocity.11".parse().map_err(|e| usage(format!("{e}")))?,
        "custom" => return Err(usage("custom strategy needs positions, e.g. custom:56,136")),
        other => other.parse().map_err(|e| usage(format!("{e}")))?,
    };
    Ok(Some(plan))
}

fn run_config(
    attacks: Vec<AttackPlan>,
    run: RunArgs,
    default_vehicles: usize,
    default_defenses: &[DefenseMode],
) -> Result<(ExperimentConfig, RunOutput), CliError> {
    if run.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if run.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let source = match (run.data.input, run.data.synthetic) {
        (Some(path), None) => DataSource::File(path),
        (None, Some(0)) => return Err(usage("--synthetic must be at least 1")),
        (None, Some(v)) => DataSource::Synthetic { vehicles: v },
        (None, None) => DataSource::Synthetic {
            vehicles: default_vehicles,
        },
        (Some(_), Some(_)) => return Err(usage("--input and --synthetic are mutually exclusive")),
    };
    let cfg = ExperimentConfig {
        attacks,
        defenses: parse_defenses(run.defense, default_defenses)?,
        variant: run.variant.into(),
        trials: run.trials,
        seed: run.seed,
        source,
        threads: run.threads,
    };
    Ok((
        cfg,
        RunOutput {
            path: run.output,
            format: run.format,
        },
    ))
}

/// Parses and validates a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<CliCommand, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    match cli.command {
        RawCommand::Demo(a) => {
            let [p, v, acc] = a.message[..] else {
                return Err(usage("--message takes exactly three values"));
            };
            let message = Message::new(p, v, acc).map_err(|e| usage(e.to_string()))?;
            Ok(CliCommand::Demo(DemoConfig {
                attack: parse_plan(&a.attack, true)?,
                message,
                defense: a.defense.parse().map_err(usage)?,
                variant: a.variant.into(),
                seed: a.seed,
                count: a.count,
                reference_ciphertext: a.reference_ciphertext,
            }))
        }
        RawCommand::Experiment(a) => {
            let plans = match (a.strategy.as_str(), a.flips) {
                ("checksum", flips) => {
                    let flips = flips.unwrap_or_else(|| vec![2, 4, 6, 8]);
                    ExperimentConfig::checksum_plans(&flips).map_err(|e| usage(e.to_string()))?
                }
                (text, flips) => {
                    let plan = parse_plan(text, false)?.ok_or_else(|| usage("strategy `none` runs nothing"))?;
                    if let Some(f) = flips {
                        if f != [plan.flips()] {
                            return Err(usage(format!(
                                "--flips conflicts with strategy `{plan}` ({} flips)",
                                plan.flips()
                            )));
                        }
                    }
                    vec![plan]
                }
            };
            let (cfg, out) = run_config(plans, a.run, 3, &[DefenseMode::NONE, DefenseMode::SHUFFLE])?;
            Ok(CliCommand::Experiment(cfg, out))
        }
        RawCommand::Sweep(a) => {
            let (cfg, out) = run_config(sweep_settings(), a.run, 1, &[DefenseMode::NONE])?;
            Ok(CliCommand::Sweep(cfg, out))
        }
        RawCommand::Vectors(a) => Ok(CliCommand::Vectors(a.output)),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Executes a command, writing human-readable output to `out`.
pub fn run(command: &CliCommand, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match command {
        CliCommand::Demo(cfg) => demo(cfg)?,
        CliCommand::Experiment(cfg, output) => {
            let report = run_experiment(cfg)?;
            emit_report(&report, output, cfg)?
        }
        CliCommand::Sweep(cfg, output) => {
            let report = payload_position_sweep(cfg, &cfg.attacks)?;
            emit_report(&report, output, cfg)?
        }
        CliCommand::Vectors(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let mut s = String::new();
            for (name, contents) in all_vector_files() {
                let path = dir.join(name);
                write_file(&path, &contents)?;
                let _ = writeln!(s, "wrote {}", path.display());
            }
            s
        }
    };
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn render(report: &ExperimentReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Markdown => report.to_markdown(),
    }
}

fn emit_report(report: &ExperimentReport, output: &RunOutput, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut s = String::new();
    let has_checksum_curve = report.cells.iter().any(|c| c.strategy == "checksum");
    match &output.path {
        None => s.push_str(&render(report, output.format)),
        Some(path) => {
            write_file(path, &render(report, output.format))?;
            let _ = writeln!(s, "wrote {}", path.display());
            if has_checksum_curve {
                for &defense in &cfg.defenses {
                    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
                    let decay = path.with_file_name(format!("{stem}_decay_{}.csv", defense.to_string().replace('+', "_")));
                    write_file(&decay, &report.decay_csv("checksum", defense))?;
                    let _ = writeln!(s, "wrote {}", decay.display());
                }
            }
        }
    }
    let totals = report.verdict_totals();
    let hist: Vec<String> = Verdict::ALL
        .iter()
        .map(|v| format!("{}={}", v, totals[v.index()]))
        .collect();
    let _ = writeln!(s, "# verdicts: {}", hist.join(" "));
    if has_checksum_curve {
        for &defense in &cfg.defenses {
            match fit_decay(&report.decay_points("checksum", defense)) {
                Ok(fit) => {
                    let _ = writeln!(
                        s,
                        "# decay fit ({defense}): slope {:.3} per flip (reference -0.5){}",
                        fit.slope,
                        if fit.excluded.is_empty() {
                            String::new()
                        } else {
                            format!(", zero-rate flips excluded: {:?}", fit.excluded)
                        }
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "# decay fit ({defense}): {e}");
                }
            }
        }
    }
    Ok(s)
}

fn spaced_hex(bytes: &[u8]) -> String {
    let hex = to_hex(bytes);
    let mut s = String::new();
    for (i, pair) in hex.as_bytes().chunks(2).enumerate() {
        if i > 0 {
            s.push(if i == 8 { '|' } else { ' ' });
        }
        s.push_str(std::str::from_utf8(pair).unwrap_or("??"));
    }
    s
}

fn word16(bytes: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([bytes[at], bytes[at + 1]])
}

fn word32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn describe_bit(bit: usize, layout: &WireLayout) -> String {
    let col = bit % 16;
    if layout.checksum_bits().contains(&bit) {
        format!("{bit} (checksum col {col})")
    } else if layout.payload_bits().contains(&bit) && bit < 64 + 96 {
        let field = Field::ALL[(bit - 64) / 32];
        format!("{bit} ({field} bit {}, col {col})", (bit - 64) % 32)
    } else {
        format!("{bit} (col {col})")
    }
}

/// Keystream that reproduces the reference ciphertext values for this
/// plaintext: checksum field 0xc354 and acceleration 0xe2c2ce32.
pub fn reference_keystream(ctx: &SecurityContext, plaintext: &[u8]) -> Result<FixedKeystream, PipelineError> {
    let mut ks = derive_keystream(ctx, plaintext.len())?.as_bytes().to_vec();
    let cks = REFERENCE_CIPHERED_CHECKSUM.to_be_bytes();
    ks[6] = plaintext[6] ^ cks[0];
    ks[7] = plaintext[7] ^ cks[1];
    for (i, b) in REFERENCE_CIPHERED_ACCELERATION.to_be_bytes().iter().enumerate() {
        ks[16 + i] = plaintext[16 + i] ^ b;
    }
    Ok(FixedKeystream(ks))
}

fn demo(cfg: &DemoConfig) -> Result<String, CliError> {
    let ctx = SecurityContext::new(experiment_key(cfg.seed), cfg.count, 0, Direction::Uplink)
        .expect("bearer 0 is valid");
    let plain = Pipeline::new(cfg.defense, cfg.variant);
    let plaintext = plain.trace_payload(&crate::wire::encode_message(&cfg.message), &ctx)?.plaintext;
    let keystream: Box<dyn KeystreamGenerator> = if cfg.reference_ciphertext {
        Box::new(reference_keystream(&ctx, &plaintext)?)
    } else {
        Box::new(crate::crypto::ScramblerKeystream)
    };
    let pipeline = Pipeline::with_generators(keystream.as_ref(), ScramblerMac, cfg.defense, cfg.variant);
    let layout = pipeline.layout(crate::wire::MESSAGE_LEN);
    let trace = pipeline.trace_payload(&crate::wire::encode_message(&cfg.message), &ctx)?;
    let spec = match &cfg.attack {
        None => AttackSpec::empty(),
        Some(plan) => plan.realize(&layout, cfg.seed).map_err(PipelineError::from)?,
    };
    let tampered = mitm_tamper(&trace.wire, &spec).map_err(PipelineError::from)?;
    let outcome = pipeline.receiver_process(&tampered, &ctx, &cfg.message);

    let m = &cfg.message;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "defense {}  variant {}  count {}",
        cfg.defense, cfg.variant, cfg.count
    );
    let _ = writeln!(
        s,
        "sent        position={} velocity={} acceleration={}",
        m.position(),
        m.velocity(),
        m.acceleration()
    );
    let _ = writeln!(s, "plaintext   {}", spaced_hex(&trace.plaintext));
    let _ = writeln!(s, "keystream   {}", spaced_hex(trace.keystream.as_bytes()));
    let _ = writeln!(s, "ciphertext  {}", spaced_hex(&trace.ciphertext));
    if trace.permutation.is_some() {
        let _ = writeln!(s, "shuffled    {}", spaced_hex(&trace.wire));
    }
    let _ = writeln!(
        s,
        "checksum    plaintext 0x{:04x}, ciphered 0x{:04x} (bits {}-{})",
        trace.datagram.checksum,
        word16(&trace.ciphertext, 6),
        CHECKSUM_BIT_OFFSET,
        CHECKSUM_BIT_OFFSET + 15
    );
    let strategy = if spec.flips() == 0 { "none".to_string() } else { spec.strategy().to_string() };
    let flips: Vec<String> = spec.positions().iter().map(|&b| describe_bit(b, &layout)).collect();
    let _ = writeln!(s, "attack      {strategy}: flip {}", if flips.is_empty() { "nothing".into() } else { flips.join(", ") });
    let _ = writeln!(s, "tampered    {}", spaced_hex(&tampered));
    let _ = writeln!(
        s,
        "checksum field on wire: 0x{:04x} → 0x{:04x}",
        word16(&trace.wire, 6),
        word16(&tampered, 6)
    );
    for field in Field::ALL {
        let at = 8 + 4 * field.index();
        let (before, after) = (word32(&trace.wire, at), word32(&tampered, at));
        if before != after {
            let _ = writeln!(s, "{field} on wire: 0x{before:08x} → 0x{after:08x}");
        }
    }
    let _ = writeln!(s, "verdict     {}", outcome.verdict);
    match outcome.received {
        Some(r) => {
            let [p, v, a] = r.values();
            let _ = writeln!(s, "received    position={p} velocity={v} acceleration={a}");
            if !outcome.mutated_fields.is_empty() {
                let names: Vec<&str> = outcome.mutated_fields.iter().map(|f| f.name()).collect();
                let _ = writeln!(s, "mutated     {}", names.join(", "));
            }
        }
        None => {
            let _ = writeln!(s, "received    (discarded)");
        }
    }
    if spec.strategy() == Strategy::ChecksumPair || spec.positions() == [56, 136] {
        let parity: Vec<String> = spec
            .positions()
            .chunks(2)
            .filter(|p| p.len() == 2 && layout.checksum_bits().contains(&p[0]))
            .map(|p| {
                let cb = crate::wire::get_bit(&trace.plaintext, p[0]) as u8;
                let pb = crate::wire::get_bit(&trace.plaintext, p[1]) as u8;
                format!("col {}: checksum bit {cb}, payload bit {pb}", p[0] % 16)
            })
            .collect();
        if !parity.is_empty() {
            let _ = writeln!(s, "plaintext   {}", parity.join("; "));
        }
    }
    Ok(s)
}
