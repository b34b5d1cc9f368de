use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use steptrack::antenna_sim::BeaconSample;
use steptrack::estimators::{fit_samples, EstimatorKind, FitSettings, DEFAULT_RLS_DELTA};
use steptrack::scenario::Scenario;
use steptrack::telemetry::{CsvReader, CsvWriter, StatsAccumulator, TelemetryRecord};
use steptrack::Error;

#[derive(Parser)]
#[command(name = "steptrack", version, about = "Satellite step-track simulation and offline fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its telemetry CSV.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's output path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the scenario's duration.
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Fit the beacon peak over a window of a telemetry log.
    Fit {
        log: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        k_y: f64,
        #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long, value_enum, default_value_t = Mode::BatchLs)]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_RLS_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = steptrack::beacon_model::DEFAULT_KX_FLOOR)]
        kx_floor: f64,
        /// Use only records where the antenna has been resting on its command.
        #[arg(long)]
        settled_only: bool,
    },
    /// Beacon statistics over a window of a telemetry log.
    Stats {
        log: PathBuf,
        #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
        t1: f64,
    },
    /// Write a decimated (time, azimuth, elevation, beacon) CSV for plotting.
    Trajectory {
        log: PathBuf,
        #[arg(long, default_value_t = 1)]
        decimation: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    BatchLs,
    Rls,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_ESTIMATION: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            scenario,
            output,
            duration_s,
        } => simulate(&scenario, output, duration_s),
        Command::Fit {
            log,
            k_y,
            t0,
            t1,
            mode,
            lambda,
            delta,
            kx_floor,
            settled_only,
        } => {
            let settings = FitSettings {
                estimator: match mode {
                    Mode::BatchLs => EstimatorKind::BatchLs,
                    Mode::Rls => EstimatorKind::Rls,
                },
                k_y,
                kx_floor,
                lambda,
                delta,
            };
            fit(&log, t0, t1, &settings, settled_only)
        }
        Command::Stats { log, t0, t1 } => stats(&log, t0, t1),
        Command::Trajectory {
            log,
            decimation,
            output,
        } => trajectory(&log, decimation, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_estimation() {
                ExitCode::from(EXIT_ESTIMATION)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn open_log(path: &Path) -> Result<CsvReader<BufReader<File>>, Error> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(CsvReader::new(BufReader::new(f)))
}

fn simulate(path: &Path, output: Option<PathBuf>, duration: Option<f64>) -> Result<(), Error> {
    let mut scenario = Scenario::load(path)?;
    if let Some(d) = duration {
        scenario.duration_s = d;
    }
    let output = output
        .or_else(|| scenario.output.clone())
        .ok_or_else(|| Error::Config("no output path (set `output` or pass --output)".into()))?;

    let mut sink = CsvWriter::new(create(&output)?)?;
    let report = scenario.run(&mut sink)?;
    sink.flush()?;

    for e in &report.events {
        if let steptrack::tracker::TrackerEventKind::Aborted(err)
        | steptrack::tracker::TrackerEventKind::PatternInfeasible(err) = &e.kind
        {
            eprintln!("cycle {} at t={:.2} s aborted: {err}", e.cycle_index, e.t);
        }
    }
    println!("records            {}", report.records);
    println!("cycles             {}", report.cycles);
    println!("aborted cycles     {}", report.aborted_cycles());
    if let Some(b) = report.beacon {
        println!("beacon mean        {:.4} dB", b.mean);
        println!("beacon stddev      {:.4} dB", b.stddev);
        println!("beacon min / max   {:.4} / {:.4} dB", b.min, b.max);
    }
    if let (Some(az), Some(el)) = (report.commanded_az_range, report.commanded_el_range) {
        println!("command az p-p     {:.4} deg", az.1 - az.0);
        println!("command el p-p     {:.4} deg", el.1 - el.0);
    }
    println!("output             {}", output.display());
    Ok(())
}

/// Keeps records taken while the antenna rested on its command for two ticks.
fn settled(records: &[TelemetryRecord]) -> Vec<TelemetryRecord> {
    let at_rest = |r: &TelemetryRecord| {
        r.readback_az == r.commanded_az && r.readback_el == r.commanded_el
    };
    records
        .windows(2)
        .filter(|w| {
            at_rest(&w[0])
                && at_rest(&w[1])
                && w[0].commanded_az == w[1].commanded_az
                && w[0].commanded_el == w[1].commanded_el
        })
        .map(|w| w[1])
        .collect()
}

fn fit(path: &Path, t0: f64, t1: f64, settings: &FitSettings, settled_only: bool) -> Result<(), Error> {
    let mut records = Vec::new();
    for r in open_log(path)? {
        let r = r?;
        if r.t >= t0 && r.t <= t1 {
            records.push(r);
        }
    }
    if settled_only {
        records = settled(&records);
    }
    let samples: Vec<BeaconSample> = records
        .iter()
        .map(|r| BeaconSample {
            t: r.t,
            azimuth: r.readback_az,
            elevation: r.readback_el,
            level: r.beacon_db,
        })
        .collect();
    let mean_el = samples.iter().map(|s| s.elevation).sum::<f64>() / samples.len().max(1) as f64;
    let report = fit_samples(&samples, mean_el, settings)?;
    println!("samples       {}", report.samples);
    println!("k_x           {}", report.coefficients.k_x);
    println!("k_y           {}", report.coefficients.k_y);
    println!("p             {}", report.peak.p);
    println!("q             {}", report.peak.q);
    println!("l_pq          {}", report.peak.l_pq);
    println!("residual_rms  {}", report.residual_rms);
    Ok(())
}

fn stats(path: &Path, t0: f64, t1: f64) -> Result<(), Error> {
    let mut acc = StatsAccumulator::new();
    for r in open_log(path)? {
        let r = r?;
        if r.t >= t0 && r.t <= t1 {
            acc.push(r.beacon_db);
        }
    }
    let s = acc.finish().ok_or(Error::EmptyWindow { t0, t1 })?;
    println!("count   {}", s.count);
    println!("mean    {}", s.mean);
    println!("stddev  {}", s.stddev);
    println!("min     {}", s.min);
    println!("max     {}", s.max);
    Ok(())
}

fn trajectory(path: &Path, decimation: usize, output: &Path) -> Result<(), Error> {
    if decimation == 0 {
        return Err(Error::Config("decimation must be >= 1".into()));
    }
    let mut out = create(output)?;
    writeln!(out, "t_s,readback_az_deg,readback_el_deg,commanded_az_deg,commanded_el_deg,beacon_db")?;
    for (i, r) in open_log(path)?.enumerate() {
        let r = r?;
        if i % decimation != 0 {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t, r.readback_az, r.readback_el, r.commanded_az, r.commanded_el, r.beacon_db
        )?;
    }
    out.flush()?;
    Ok(())
}
