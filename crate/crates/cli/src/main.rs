use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use upsim_core::analysis::{self, AnalysisSettings, Report};
use upsim_core::config::Config;
use upsim_core::models::{self, BoostParams, RectifierParams};
use upsim_core::sstf::{self, RationalTransferFunction};
use upsim_core::switchsim::{self, SimulationOutput, Waveform};
use upsim_core::Error;

/// Environment variable overriding the default output directory.
const OUT_DIR_ENV: &str = "UPSIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "upsim", version, about = "Back-up power supply modelling and simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print averaged transfer functions of the charging stages.
    Tf(TfArgs),
    /// Run the switched simulation and write one CSV per waveform.
    Simulate(SimArgs),
    /// Harmonic and power-factor analysis of waveform CSVs.
    Analyze(AnalyzeArgs),
    /// Simulate, then analyze the result.
    Report(SimArgs),
    /// Print the default configuration with units.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Rectifier,
    Boost,
    Charger,
    All,
}

#[derive(clap::Args)]
struct TfArgs {
    #[arg(long, value_enum)]
    stage: Stage,
    /// Rectifier filter inductance (H).
    #[arg(long, default_value_t = 0.1e-3)]
    l_r: f64,
    /// Rectifier filter capacitance (F).
    #[arg(long, default_value_t = 500e-6)]
    c_r: f64,
    /// Boost inductance (H).
    #[arg(long, default_value_t = 0.95e-3)]
    l_c: f64,
    /// Boost output capacitance (F).
    #[arg(long, default_value_t = 47e-6)]
    c_c: f64,
    /// Boost load resistance (Ω).
    #[arg(long, default_value_t = 10.0)]
    r_c: f64,
    /// Boost duty ratio.
    #[arg(long, short = 'd', default_value_t = 0.5)]
    duty: f64,
    /// Boost switching frequency (Hz).
    #[arg(long, default_value_t = 40e3)]
    f_sw: f64,
    /// Frequencies (Hz) for a magnitude/phase table; repeatable.
    #[arg(long = "freq")]
    freqs: Vec<f64>,
}

#[derive(clap::Args)]
struct SimArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (falls back to $UPSIM_OUT_DIR, then ./upsim-out).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Waveform CSV files, or directories holding them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 50.0)]
    f0: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_MAX_ORDER)]
    max_order: usize,
    #[arg(long, default_value_t = analysis::DEFAULT_CYCLES)]
    cycles: usize,
    /// Directory for the report and spectrum CSVs; printed only when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Simulation(String),
    Analysis(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Simulation(_) => 2,
            Failure::Analysis(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Simulation(m) | Failure::Analysis(m) => m,
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn analysis_failure(e: impl ToString) -> Failure {
    Failure::Analysis(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.cmd {
        Command::Tf(a) => cmd_tf(&a),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Report(a) => cmd_report(&a),
        Command::DefaultConfig => {
            print!("{}", Config::default().to_text());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn cmd_tf(a: &TfArgs) -> Result<(), Failure> {
    let rect = RectifierParams::new(a.l_r, a.c_r).map_err(usage)?;
    let boost = BoostParams::new(a.l_c, a.c_c, a.r_c, a.duty, a.f_sw).map_err(usage)?;
    let stages: Vec<(&str, RationalTransferFunction)> = match a.stage {
        Stage::Rectifier => vec![("rectifier", models::rectifier_tf(&rect).map_err(usage)?)],
        Stage::Boost => vec![("boost", models::boost_averaged_tf(&boost).map_err(usage)?)],
        Stage::Charger => vec![("charger", models::charger_tf(&rect, &boost).map_err(usage)?)],
        Stage::All => vec![
            ("rectifier", models::rectifier_tf(&rect).map_err(usage)?),
            ("boost", models::boost_averaged_tf(&boost).map_err(usage)?),
            ("charger", models::charger_tf(&rect, &boost).map_err(usage)?),
        ],
    };
    let mut out = String::new();
    for (name, tf) in &stages {
        let _ = writeln!(out, "stage: {name}");
        let _ = writeln!(out, "numerator (ascending powers of s): {:?}", tf.num());
        let _ = writeln!(out, "denominator (ascending powers of s): {:?}", tf.den());
        let _ = writeln!(out, "denominator order: {}", tf.den_degree());
        match sstf::dc_gain(tf) {
            Ok(g) => {
                let _ = writeln!(out, "dc gain: {g:?}");
            }
            Err(e) => {
                let _ = writeln!(out, "dc gain: undefined ({e})");
            }
        }
        if !a.freqs.is_empty() {
            let _ = writeln!(out, "f_hz,magnitude,phase_deg");
            for &f in &a.freqs {
                let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f);
                match sstf::evaluate_tf(tf, s) {
                    Ok(g) => {
                        let _ = writeln!(out, "{f},{:.6},{:.4}", g.norm(), g.arg().to_degrees());
                    }
                    Err(e) => return Err(usage(e)),
                }
            }
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn out_dir(arg: &Option<PathBuf>) -> PathBuf {
    arg.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("upsim-out"))
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            Config::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn sim_failure(e: Error) -> Failure {
    match e {
        Error::Simulation { .. } => Failure::Simulation(e.to_string()),
        other => usage(other),
    }
}

fn cmd_simulate(a: &SimArgs) -> Result<(Config, SimulationOutput, PathBuf), Failure> {
    let cfg = load_config(&a.config)?;
    let out = switchsim::run(&cfg.scenario).map_err(sim_failure)?;
    let summary = summary(&cfg, &out);
    let dir = out_dir(&a.out);
    fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    for w in &out.waveforms {
        write_waveform(&dir.join(format!("{}.csv", w.name)), w)?;
    }
    write_file(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok((cfg, out, dir))
}

fn cmd_report(a: &SimArgs) -> Result<(), Failure> {
    let (cfg, out, dir) = cmd_simulate(a)?;
    let report = analysis::build_report(&out.waveforms, &cfg.analysis).map_err(analysis_failure)?;
    emit_report(&report, &out.waveforms, &cfg.analysis, Some(&dir))
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let settings = AnalysisSettings {
        f0: a.f0,
        max_order: a.max_order,
        cycles: a.cycles,
    };
    let mut files = Vec::new();
    for p in &a.inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .filter(|p| {
                    !p.file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with("spectrum_"))
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    let waveforms = files
        .iter()
        .map(|p| read_waveform(p))
        .collect::<Result<Vec<_>, _>>()?;
    let report = analysis::build_report(&waveforms, &settings).map_err(analysis_failure)?;
    emit_report(&report, &waveforms, &settings, a.out.as_deref())
}

fn emit_report(
    report: &Report,
    waveforms: &[Waveform],
    settings: &AnalysisSettings,
    dir: Option<&Path>,
) -> Result<(), Failure> {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "Harmonic magnitudes (peak) over {} cycles at {} Hz",
        settings.cycles, settings.f0
    );
    let _ = writeln!(text, "{:>6} {:>14} {:>14} {:>14}", "order", "mains_i", "load_v", "load_i");
    for (label, row) in analysis::harmonic_table(report) {
        let _ = writeln!(
            text,
            "{label:>6} {:>14.6} {:>14.6} {:>14.6}",
            row[0], row[1], row[2]
        );
    }
    let p = &report.performance;
    let _ = writeln!(text);
    let _ = writeln!(
        text,
        "{:>10} {:>14} {:>14} {:>14}",
        "PF", "THD mains_i %", "THD load_v %", "THD load_i %"
    );
    let _ = writeln!(
        text,
        "{:>10.4} {:>14.4} {:>14.4} {:>14.4}",
        p.pf_sending, p.thd_mains_i, p.thd_load_v, p.thd_load_i
    );
    let _ = writeln!(text);
    let _ = writeln!(text, "displacement PF: {:.4}", p.pf_displacement);
    let _ = writeln!(text, "grid real power: {:.3} W", p.p_real);
    let _ = writeln!(text, "grid apparent power: {:.3} VA", p.s_apparent);
    let _ = writeln!(text, "load real power: {:.3} W", p.p_load);

    let _ = writeln!(text);
    text.push_str(&rms_table(waveforms, settings.f0, settings.cycles));
    print!("{text}");

    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("report.txt"), &text)?;
        for (name, spec) in [
            ("mains_i", &report.mains_i),
            ("load_v", &report.load_v),
            ("load_i", &report.load_i),
        ] {
            let mut csv = String::from("order,frequency_hz,magnitude,phase_rad\n");
            for (k, m) in &spec.magnitudes {
                let _ = writeln!(
                    csv,
                    "{k},{},{m},{}",
                    *k as f64 * spec.f0,
                    spec.phase(*k)
                );
            }
            write_file(&dir.join(format!("spectrum_{name}.csv")), &csv)?;
        }
    }
    Ok(())
}

fn summary(cfg: &Config, out: &SimulationOutput) -> String {
    let sc = &cfg.scenario;
    let f0 = sc.grid.f0;
    let cycles = cfg.analysis.cycles;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} steps of {} s, {} network topologies",
        out.steps, sc.sim.dt, out.topologies
    );
    let _ = writeln!(s);
    s.push_str(&rms_table(&out.waveforms, f0, cycles));
    let _ = writeln!(s);
    let grid_window = grid_window(&out.waveforms, f0, cycles);
    let in_grid_window = |name: &str| {
        let w = out.get(name)?;
        w.aligned_to(grid_window.as_ref()?).ok()
    };
    let v_in = in_grid_window("rectified_v").map(|w| w.mean());
    match (sc.boost_params(), v_in) {
        (Ok(p), Some(v_in)) => match models::ccm_check(&p, v_in) {
            Ok(c) => {
                let _ = writeln!(
                    s,
                    "boost conduction: {:?} (average {:.4} A, half ripple {:.4} A at {:.3} V input)",
                    c.mode, c.avg_current, c.half_ripple, v_in
                );
            }
            Err(e) => {
                let _ = writeln!(s, "boost conduction: not evaluated ({e})");
            }
        },
        (Err(e), _) => {
            let _ = writeln!(s, "boost conduction: not evaluated ({e})");
        }
        (_, None) => {
            let _ = writeln!(s, "boost conduction: not evaluated (no live rectifier output)");
        }
    }
    if let Some(win) = in_grid_window("boost_inductor_i") {
        let min = win.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let _ = writeln!(s, "boost inductor minimum current (grid window): {min:.6} A");
    }

    let _ = writeln!(s);
    let _ = writeln!(s, "events:");
    for e in &out.events {
        let _ = writeln!(s, "  {e}");
    }
    s
}

/// Last `cycles` line periods during which the grid was live.
fn grid_window(waveforms: &[Waveform], f0: f64, cycles: usize) -> Option<Waveform> {
    let mains = waveforms.iter().find(|w| w.name == "mains_v")?;
    switchsim::active_window(mains, f0, cycles).ok()
}

/// RMS and mean of every signal over the grid window and the final window.
fn rms_table(waveforms: &[Waveform], f0: f64, cycles: usize) -> String {
    let grid = grid_window(waveforms, f0, cycles);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>14} {:>14} {:>14} {:>14}",
        "signal", "rms (grid)", "mean (grid)", "rms (final)", "mean (final)"
    );
    let cell = |w: Option<Waveform>| match w {
        Some(w) => (format!("{:.6}", analysis::rms(&w)), format!("{:.6}", w.mean())),
        None => ("-".to_string(), "-".to_string()),
    };
    for w in waveforms {
        if switchsim::STATE_TRACES.contains(&w.name.as_str()) {
            continue;
        }
        let (gr, gm) = cell(grid.as_ref().and_then(|g| w.aligned_to(g).ok()));
        let (fr, fm) = cell(switchsim::steady_state_window(w, f0, cycles).ok());
        let _ = writeln!(s, "{:<20} {gr:>14} {gm:>14} {fr:>14} {fm:>14}", w.name);
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_waveform(path: &Path, w: &Waveform) -> Result<(), Failure> {
    let io = |e: csv::Error| usage(format!("{}: {e}", path.display()));
    let mut wr = csv::Writer::from_path(path).map_err(io)?;
    wr.write_record(["t", w.name.as_str()]).map_err(io)?;
    for (i, x) in w.samples.iter().enumerate() {
        wr.write_record([w.time(i).to_string(), x.to_string()])
            .map_err(io)?;
    }
    wr.flush()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_waveform(path: &Path) -> Result<Waveform, Failure> {
    let bad = |msg: String| usage(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" {
        return Err(bad("expected header `t,<name>`".into()));
    }
    let name = headers[1].to_string();
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: `{s}` is not a number", row + 2)))
        };
        t.push(parse(&rec[0])?);
        x.push(parse(&rec[1])?);
    }
    if t.len() < 2 {
        return Err(bad("fewer than two samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    Waveform::new(name, dt, t[0], x).map_err(|e| bad(e.to_string()))
}
