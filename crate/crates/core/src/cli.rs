//! `jrc-sim` command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, Scale, ScenarioConfig};
use crate::error::{Error, Result};
use crate::eval::{ber_crossing, run_sweep, run_trials, simulate_frame, trial_seed, SweepResult};
use crate::plot;
use crate::signal::SPEED_OF_LIGHT;

pub const EXIT_OK: i32 = 0;
/// A check run by the command (e.g. loopback) failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const DETECTIONS_CSV_HEADER: &str =
    "delay_bin,doppler_bin,range_m,velocity_mps,doppler_hz,doppler_refined_hz,gain_re,gain_im,peak_power_db";
pub const TRUTH_CSV_HEADER: &str = "range_m,velocity_mps,delay_bin,doppler_hz,gain_re,gain_im";
pub const LOOPBACK_CSV_HEADER: &str = "trial,seed,bits,errors_perfect,errors_estimated";

#[derive(Parser, Debug)]
#[command(name = "jrc-sim", version, about = "FMCW/OFDM joint radar-communication frame simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Process one frame and export its range-Doppler map and detections.
    RadarMap(Common),
    /// Monte-Carlo MSE/BER sweep over an SNR grid.
    Sweep(Common),
    /// Perfect-CSI loopback over several frames; fails on any bit error.
    LoopbackTest(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SNR in dB; a comma-separated list sets the sweep grid. `inf` is noiseless.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scale: Option<Scale>,
    /// Detection threshold above the map median, dB.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also render PNG plots.
    #[arg(long)]
    plot: bool,
}

impl Common {
    /// File values overridden by flags, with all defaults resolved.
    fn config(&self, single_snr: bool) -> Result<ScenarioConfig> {
        let mut c = parse_config(self.config.as_deref())?;
        if let Some(s) = self.scale {
            c.sim.scale = s;
        }
        match (self.snr.as_slice(), single_snr) {
            ([], _) => {}
            ([s], true) => c.sim.snr_db = *s,
            (_, true) => return Err(Error::config("this command takes a single --snr value")),
            (grid, false) => c.sim.snr_grid = grid.to_vec(),
        }
        if let Some(t) = self.trials {
            c.sim.trials = t;
        }
        if let Some(s) = self.seed {
            c.sim.seed = s;
        }
        if let Some(t) = self.threshold {
            c.radar.threshold_db = t;
        }
        if let Some(o) = &self.out {
            c.sim.output_dir = o.clone();
        }
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(Error::config("--jobs must be at least 1"));
            }
            c.sim.jobs = Some(j);
        }
        let c = c.resolved()?;
        c.scenario()?;
        Ok(c)
    }
}

/// Output files staged in a sibling directory and moved into place only
/// once everything has been written.
struct Staging {
    target: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    fn new(target: &Path) -> Result<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if target.exists() && !target.is_dir() {
            return Err(Error::io(
                target,
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "output path is not a directory"),
            ));
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            dir,
            files: Vec::new(),
            committed: false,
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn commit(mut self) -> Result<()> {
        if !self.target.exists() {
            fs::rename(&self.dir, &self.target).map_err(|e| Error::io(&self.target, e))?;
        } else {
            for f in &self.files {
                let dst = self.target.join(f);
                fs::rename(self.dir.join(f), &dst).map_err(|e| Error::io(&dst, e))?;
            }
            let _ = fs::remove_dir_all(&self.dir);
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))
}

fn radar_map(common: &Common) -> Result<i32> {
    let cfg = common.config(true)?;
    let scenario = cfg.scenario()?;
    let run = simulate_frame(&scenario, cfg.sim.snr_db, trial_seed(cfg.sim.seed, 0))?;
    let fs = scenario.frame.sample_rate_hz();
    let to_velocity = |hz: f64| hz * SPEED_OF_LIGHT / scenario.carrier_hz;

    let mut det = String::from(DETECTIONS_CSV_HEADER);
    det.push('\n');
    for e in &run.radar.estimates {
        let _ = writeln!(
            det,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.9e},{:.9e},{:.6}",
            e.delay_bin,
            e.doppler_bin,
            e.distance_m(),
            to_velocity(e.doppler_refined_hz),
            e.doppler_hz,
            e.doppler_refined_hz,
            e.gain_hat.re,
            e.gain_hat.im,
            e.peak_power_db
        );
    }
    let mut truth = String::from(TRUTH_CSV_HEADER);
    truth.push('\n');
    for t in &run.truth {
        let _ = writeln!(
            truth,
            "{:.6},{:.6},{},{:.6},{:.9e},{:.9e}",
            t.range_m,
            t.velocity_mps,
            t.delay_samples(fs),
            t.doppler_hz,
            t.gain.re,
            t.gain.im
        );
    }

    let mut out = Staging::new(&cfg.sim.output_dir)?;
    out.write("config.toml", cfg.to_toml())?;
    out.write("range_doppler.csv", run.radar.map.to_csv())?;
    out.write("detections.csv", det)?;
    out.write("truth.csv", truth)?;
    if common.plot {
        let img = plot::render_map(&run.radar.map, scenario.frame.ofdm.n_cp + 16, 4);
        out.write("range_doppler.png", plot::encode_png(&img))?;
    }
    out.commit()?;

    println!(
        "{} detection(s) at SNR {} dB",
        run.radar.estimates.len(),
        cfg.sim.snr_db
    );
    for e in &run.radar.estimates {
        println!(
            "  range {:8.2} m  velocity {:7.2} m/s  power {:6.1} dB",
            e.distance_m(),
            to_velocity(e.doppler_refined_hz),
            e.peak_power_db
        );
    }
    if let Some(msg) = &run.radar.estimation_error {
        eprintln!("warning: gain estimation failed: {msg}");
    }
    Ok(EXIT_OK)
}

fn summary_table(res: &SweepResult) -> String {
    let mut s = format!(
        "{:>7} {:>11} {:>11} {:>11} {:>11} {:>8} {:>8}\n",
        "snr_db", "mse", "ci95", "ber_est", "ber_perf", "failed", "resolved"
    );
    for p in &res.points {
        let _ = writeln!(
            s,
            "{:>7.2} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>8} {:>8.3}",
            p.snr_db, p.mse_mean, p.mse_ci95, p.ber_est_mean, p.ber_perfect_mean, p.detection_failures, p.resolved_fraction
        );
    }
    let snrs = res.snrs();
    let est: Vec<f64> = res.points.iter().map(|p| p.ber_est_mean).collect();
    let perf: Vec<f64> = res.points.iter().map(|p| p.ber_perfect_mean).collect();
    let fmt = |x: Option<f64>| x.map_or("not reached".to_string(), |v| format!("{v:.2} dB"));
    let _ = writeln!(
        s,
        "BER 1e-2 crossing: estimated CSI {}, perfect CSI {}",
        fmt(ber_crossing(&snrs, &est, 1e-2)),
        fmt(ber_crossing(&snrs, &perf, 1e-2))
    );
    s
}

fn sweep(common: &Common) -> Result<i32> {
    let cfg = common.config(false)?;
    let scenario = cfg.scenario()?;
    if cfg.sim.trials == 1 {
        eprintln!("warning: one trial per SNR point is not statistically meaningful");
    }
    let snapshot = cfg.to_toml();
    let res = pool(cfg.sim.jobs)?.install(|| {
        run_sweep(&scenario, &cfg.sim.snr_grid, cfg.sim.trials, cfg.sim.seed, snapshot.clone())
    })?;
    let mut out = Staging::new(&cfg.sim.output_dir)?;
    out.write("config.toml", &snapshot)?;
    out.write("sweep.csv", res.to_csv())?;
    if common.plot {
        let x = res.snrs();
        let mse: Vec<f64> = res.points.iter().map(|p| p.mse_mean).collect();
        let est: Vec<f64> = res.points.iter().map(|p| p.ber_est_mean).collect();
        let perf: Vec<f64> = res.points.iter().map(|p| p.ber_perfect_mean).collect();
        let img = plot::render_curves(&x, &[plot::Series { y: &mse, color: [200, 30, 30] }], true, 640, 420);
        out.write("mse.png", plot::encode_png(&img))?;
        let img = plot::render_curves(
            &x,
            &[
                plot::Series { y: &est, color: [200, 30, 30] },
                plot::Series { y: &perf, color: [30, 30, 200] },
            ],
            true,
            640,
            420,
        );
        out.write("ber.png", plot::encode_png(&img))?;
    }
    out.commit()?;
    print!("{}", summary_table(&res));
    Ok(EXIT_OK)
}

fn loopback(common: &Common) -> Result<i32> {
    let mut cfg = common.config(true)?;
    if common.snr.is_empty() {
        cfg.sim.snr_db = f64::INFINITY;
    }
    let scenario = cfg.scenario()?;
    let trials = cfg.sim.trials.max(1);
    let results = pool(cfg.sim.jobs)?
        .install(|| run_trials(&scenario, &[cfg.sim.snr_db], trials, cfg.sim.seed))?
        .remove(0);
    let mut csv = String::from(LOOPBACK_CSV_HEADER);
    csv.push('\n');
    let (mut bits, mut perfect, mut estimated) = (0usize, 0usize, 0usize);
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{},{}", r.seed, r.n_bits, r.perfect_bit_errors, r.bit_errors);
        bits += r.n_bits;
        perfect += r.perfect_bit_errors;
        estimated += r.bit_errors;
    }
    let mut out = Staging::new(&cfg.sim.output_dir)?;
    out.write("config.toml", cfg.to_toml())?;
    out.write("loopback.csv", csv)?;
    out.commit()?;
    println!("{bits} bits over {trials} frame(s) at SNR {} dB", cfg.sim.snr_db);
    println!("  perfect CSI:   {perfect} bit error(s)");
    println!("  estimated CSI: {estimated} bit error(s)");
    if perfect > 0 && cfg.sim.snr_db == f64::INFINITY {
        eprintln!("loopback FAILED: noiseless perfect-CSI chain produced bit errors");
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(EXIT_OK)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Argument(_) | Error::Estimation(_) => EXIT_RUNTIME,
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::RadarMap(c) => radar_map(c),
        Command::Sweep(c) => sweep(c),
        Command::LoopbackTest(c) => loopback(c),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
