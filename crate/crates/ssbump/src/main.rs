use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand};
use ssbump::output::{self, Format};
use ssbump::{load_scenario, Diagnostic, TABLE1_SCENARIO};
use ssbump_core::geo::{GeoPoint, Heading};
use ssbump_core::protocol::{decode_frame, encode_beacon, EvBeacon, Frame, FrameError, VehicleId};
use ssbump_core::radio::{airtime_ms, LoraLinkParams};
use ssbump_core::sim::{run, Report, Scenario, DEFAULT_SEED};

const EXIT_INVALID: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

/// Smart speed bump simulator.
///
/// Exit status: 0 success, 1 invalid input or integrity failure, 2 I/O or
/// usage error, 3 table1 mismatch.
#[derive(Parser)]
#[command(name = "ssbump", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report.
    Run(RunArgs),
    /// Reproduce the average time delay table from the shipped fixture.
    Table1(Table1Args),
    /// Encode or decode a beacon frame.
    Codec(CodecArgs),
    /// LoRa time on air for one frame.
    Airtime(AirtimeArgs),
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("expected an unsigned decimal or 0x-hex seed: {e}"))
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (.scn).
    #[arg(long)]
    scenario: PathBuf,
    /// RNG seed, decimal or 0x-hex.
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_seed)]
    seed: u64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Run seeds seed, seed+1, ... seed+N-1 in parallel; reports are merged
    /// in seed order.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    sweep: u32,
}

#[derive(Args)]
struct Table1Args {
    /// RNG seed, decimal or 0x-hex.
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_seed)]
    seed: u64,
    /// Check this scenario instead of the embedded fixture.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct CodecArgs {
    #[command(subcommand)]
    op: CodecOp,
}

#[derive(Subcommand)]
enum CodecOp {
    /// Print the hex frame for a beacon.
    Encode {
        /// Nonzero vehicle id.
        #[arg(long)]
        id: u32,
        /// Latitude, degrees.
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        /// Longitude, degrees.
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// Heading, degrees clockwise from north.
        #[arg(long, default_value_t = 0.0)]
        heading: f64,
        /// Timestamp, whole seconds.
        #[arg(long, default_value_t = 0)]
        ts: u32,
    },
    /// Print the fields of a hex frame.
    Decode {
        /// Frame bytes as hex.
        hex: String,
    },
}

fn parse_bandwidth(s: &str) -> Result<u32, String> {
    let (digits, scale) = match s.strip_suffix(['k', 'K']) {
        Some(d) => (d, 1000),
        None => (s, 1),
    };
    digits
        .parse::<u32>()
        .map(|v| v * scale)
        .map_err(|e| format!("expected hertz such as 125000 or 125k: {e}"))
}

#[derive(Args)]
struct AirtimeArgs {
    /// Spreading factor.
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u8).range(7..=12))]
    sf: u8,
    /// Bandwidth in Hz; 125k, 250k or 500k.
    #[arg(long, default_value = "125k", value_parser = parse_bandwidth)]
    bw: u32,
    /// Coding rate denominator n of 4/n.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(5..=8))]
    cr: u8,
    /// Payload length, bytes.
    #[arg(long, default_value_t = 22)]
    payload_len: usize,
    /// Preamble symbols.
    #[arg(long, default_value_t = 8)]
    preamble: u16,
    /// Implicit header mode.
    #[arg(long)]
    implicit_header: bool,
    /// Omit the payload CRC.
    #[arg(long)]
    no_crc: bool,
    /// Low data rate optimization.
    #[arg(long)]
    ldro: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Table1(args) => cmd_table1(&args),
        Command::Codec(args) => cmd_codec(args.op),
        Command::Airtime(args) => cmd_airtime(&args),
    }
}

fn report_diagnostics(path: &Path, diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        match d.line {
            Some(line) => eprintln!("{}:{line}: {}", path.display(), DiagnosticBody(d)),
            None => eprintln!("{}: {}", path.display(), DiagnosticBody(d)),
        }
    }
}

/// A diagnostic without its line prefix.
struct DiagnosticBody<'a>(&'a Diagnostic);

impl std::fmt::Display for DiagnosticBody<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = self.0;
        if d.path.is_empty() {
            f.write_str(&d.message)
        } else {
            write!(f, "{}: {}", d.path, d.message)
        }
    }
}

fn read_scenario(path: &Path) -> Result<Scenario, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })?;
    load_scenario(&text).map_err(|diags| {
        report_diagnostics(path, &diags);
        ExitCode::from(EXIT_INVALID)
    })
}

fn run_checked(scenario: &Scenario, seed: u64) -> Report {
    run(scenario, seed).expect("loaded scenarios are validated")
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let scenario = match read_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let seeds: Vec<u64> = (0..u64::from(args.sweep)).map(|i| args.seed.wrapping_add(i)).collect();
    let reports: Vec<Report> = if seeds.len() == 1 {
        vec![run_checked(&scenario, seeds[0])]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let scenario = &scenario;
                    scope.spawn(move || run_checked(scenario, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };

    let text = match (args.format, reports.as_slice()) {
        (Format::Json, [one]) => output::structured(one),
        (Format::Json, many) => output::structured_many(many),
        (Format::Table, many) => many.iter().map(output::tabular).collect::<Vec<_>>().join("\n"),
        (Format::Csv, many) => output::records_csv(many),
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_IO);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

const TABLE1_CONVENTIONAL_S: f64 = 9.4;
const TABLE1_SSBUMP_S: f64 = 3.6;
const TABLE1_TOLERANCE_S: f64 = 0.1;
const TABLE1_REDUCTION_PERCENT: (f64, f64) = (61.0, 62.2);

fn cmd_table1(args: &Table1Args) -> ExitCode {
    let scenario = match &args.scenario {
        Some(path) => match read_scenario(path) {
            Ok(s) => s,
            Err(code) => return code,
        },
        None => load_scenario(TABLE1_SCENARIO).expect("embedded fixture is valid"),
    };
    let report = run_checked(&scenario, args.seed);
    print!("{}", output::tabular(&report));

    let near = |got: Option<f64>, want: f64| got.is_some_and(|g| (g - want).abs() <= TABLE1_TOLERANCE_S + 1e-9);
    let mut mismatches = Vec::new();
    if !near(report.conventional.mean_transit_s, TABLE1_CONVENTIONAL_S) {
        mismatches.push(format!(
            "Conventional: observed {:?} s, expected {TABLE1_CONVENTIONAL_S} ± {TABLE1_TOLERANCE_S} s",
            report.conventional.mean_transit_s
        ));
    }
    if !near(report.ssbump.mean_transit_s, TABLE1_SSBUMP_S) {
        mismatches.push(format!(
            "SSBump: observed {:?} s, expected {TABLE1_SSBUMP_S} ± {TABLE1_TOLERANCE_S} s",
            report.ssbump.mean_transit_s
        ));
    }
    let (lo, hi) = TABLE1_REDUCTION_PERCENT;
    if !report.reduction_percent.is_some_and(|r| (lo..=hi).contains(&r)) {
        mismatches.push(format!(
            "reduction: observed {:?} %, expected within [{lo}, {hi}] %",
            report.reduction_percent
        ));
    }
    if mismatches.is_empty() {
        ExitCode::SUCCESS
    } else {
        for m in mismatches {
            eprintln!("mismatch: {m}");
        }
        ExitCode::from(EXIT_MISMATCH)
    }
}

fn cmd_codec(op: CodecOp) -> ExitCode {
    match op {
        CodecOp::Encode {
            id,
            lat,
            lon,
            heading,
            ts,
        } => {
            let Some(vehicle_id) = VehicleId::new(id) else {
                eprintln!("error: vehicle id must be nonzero");
                return ExitCode::from(EXIT_INVALID);
            };
            let fields = GeoPoint::new(lat, lon).and_then(|p| Ok((p, Heading::new(heading)?)));
            let (position, heading) = match fields {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            let beacon = EvBeacon {
                vehicle_id,
                position,
                heading,
                timestamp: ts,
            };
            println!("{}", hex::encode(encode_beacon(&beacon)));
            ExitCode::SUCCESS
        }
        CodecOp::Decode { hex: text } => {
            let bytes = match hex::decode(text.trim()) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: not a hex string: {e}");
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            match decode_frame(&bytes) {
                Ok(Frame::Beacon(b)) => {
                    println!("type=beacon");
                    println!("id={}", b.vehicle_id);
                    println!("lat={:.6}", b.position.lat_deg());
                    println!("lon={:.6}", b.position.lon_deg());
                    println!("heading={:.2}", b.heading.deg());
                    println!("ts={}", b.timestamp);
                    ExitCode::SUCCESS
                }
                Ok(Frame::Telemetry(t)) => {
                    println!("type=telemetry");
                    println!("bump_id={}", t.bump_id);
                    println!("mode={:?}", t.mode);
                    println!("speed_cms={}", t.last_speed_reading);
                    println!("ts={}", t.timestamp);
                    ExitCode::SUCCESS
                }
                Err(e @ FrameError::Integrity { .. }) => {
                    eprintln!("integrity failure: {e}");
                    ExitCode::from(EXIT_INVALID)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INVALID)
                }
            }
        }
    }
}

fn cmd_airtime(args: &AirtimeArgs) -> ExitCode {
    let params = LoraLinkParams {
        spreading_factor: args.sf,
        bandwidth_hz: args.bw,
        coding_rate_denom: args.cr,
        preamble_symbols: args.preamble,
        explicit_header: !args.implicit_header,
        crc_on: !args.no_crc,
        low_data_rate_optimize: args.ldro,
        ..LoraLinkParams::default()
    };
    if let Err(e) = params.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_IO);
    }
    println!("{:.3}", airtime_ms(&params, args.payload_len));
    ExitCode::SUCCESS
}
