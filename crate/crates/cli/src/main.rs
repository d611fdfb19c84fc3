//! `qwalk`: command-line driver for spectra, phase diagrams, edge modes and
//! the verification battery.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use qwalk_core::edge::{Eta, Sector};
use qwalk_core::plot::{emit_plot, PlotKind};
use qwalk_core::sweep::{run_point, run_sweep, Axis, AxisName, SweepSpec, Task, TaskOptions};
use qwalk_core::table::{self, Format, ResultTable};
use qwalk_core::topology::Contour;
use qwalk_core::walk::{Boundary, WalkParams};
use qwalk_core::{selftest, Error};

const THREADS_ENV: &str = "QWALK_THREADS";
const FIDELITY_MIN: f64 = 1.0 - 1e-5;
const RESIDUAL_MAX: f64 = 1e-7;

#[derive(Parser, Debug)]
#[command(name = "qwalk", version, about = "Nonunitary time-multiplexed quantum walk toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// First coin angle; radians or a multiple of pi such as 0.2pi
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta1: Option<String>,
    /// Second coin angle; radians or a multiple of pi such as -0.15pi
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta2: Option<String>,
    /// Gain/loss parameter
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Number of lattice sites
    #[arg(long, global = true)]
    sites: Option<usize>,
    /// pbc or fbc
    #[arg(long, global = true)]
    boundary: Option<String>,
    /// Momentum samples for Bloch and loop computations
    #[arg(long, global = true)]
    nk: Option<usize>,
    /// Output table path; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long, global = true)]
    format: Option<String>,
    /// Write an SVG plot to this path
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with defaults for any of the flags above
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quasienergy spectrum at one point, or along a scan
    Spectrum {
        /// Scan axis as NAME:START:STOP:COUNT, e.g. theta2:-1pi:1pi:201
        #[arg(long, allow_hyphen_values = true)]
        scan: Option<String>,
        /// Add the periodic Bloch spectrum next to the finite-lattice one
        #[arg(long)]
        compare: bool,
    },
    /// Invariants (nu0, nupi) over the theta1 x theta2 plane
    PhaseDiagram {
        /// Points per axis
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// bloch or gbz
        #[arg(long, default_value = "gbz")]
        contour: String,
    },
    /// Edge-state transfer regions over the theta1 x theta2 plane
    TransferMap {
        /// Points per axis
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Analytic edge-mode amplitudes for both sectors and chiralities
    EdgeModes,
    /// Generalized Brillouin zone and its band energies
    Gbz,
    /// Compare analytic edge modes with numerically diagonalized ones
    Verify,
    /// Run the acceptance battery
    Selftest,
}

/// Keys accepted in the config file; same names as the flags.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    theta1: Option<AngleValue>,
    theta2: Option<AngleValue>,
    gamma: Option<f64>,
    sites: Option<usize>,
    boundary: Option<String>,
    nk: Option<usize>,
    out: Option<PathBuf>,
    format: Option<String>,
    plot: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum AngleValue {
    Radians(f64),
    Text(String),
}

impl AngleValue {
    fn resolve(&self) -> Result<f64, Failure> {
        match self {
            AngleValue::Radians(x) => Ok(*x),
            AngleValue::Text(s) => parse_angle(s),
        }
    }
}

/// Settings after merging defaults, config file and flags.
#[derive(Debug, Clone)]
struct Settings {
    params: WalkParams,
    n_k: usize,
    out: Option<PathBuf>,
    format: Format,
    plot: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_numerical_precondition() => 2,
            Failure::Core(_) => 1,
            Failure::Verification(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Core(e) => write!(f, "{} error: {e}", e.kind()),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) => Failure::Usage(m),
            other => Failure::Core(other),
        }
    }
}

/// Parses `0.2pi`, `-pi`, `pi/2`, `0.5π` or plain radians.
fn parse_angle(s: &str) -> Result<f64, Failure> {
    let bad = || Failure::Usage(format!("cannot parse angle '{s}'"));
    let t = s.trim().to_ascii_lowercase().replace('π', "pi");
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim().to_owned(), d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (t.clone(), 1.0),
    };
    let value = match num.strip_suffix("pi") {
        Some(coef) => {
            let coef = coef.trim().trim_end_matches('*');
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            c * PI
        }
        None => num.parse::<f64>().map_err(|_| bad())?,
    };
    let v = value / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_axis(s: &str) -> Result<Axis, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, start, stop, count] = parts[..] else {
        return Err(Failure::Usage(format!("scan '{s}' is not NAME:START:STOP:COUNT")));
    };
    let name: AxisName = name.parse()?;
    let count = count.parse::<usize>().map_err(|_| Failure::Usage(format!("bad point count '{count}'")))?;
    Ok(Axis::new(name, parse_angle(start)?, parse_angle(stop)?, count)?)
}

fn load_config(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Failure::Core(Error::Io { path: path.to_path_buf(), source }))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

fn env_threads() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        _ => Ok(None),
    }
}

fn resolve(g: &GlobalArgs) -> Result<Settings, Failure> {
    let file = match &g.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let angle = |flag: &Option<String>, cfg: &Option<AngleValue>, default: f64| -> Result<f64, Failure> {
        match (flag, cfg) {
            (Some(s), _) => parse_angle(s),
            (None, Some(v)) => v.resolve(),
            (None, None) => Ok(default),
        }
    };
    let theta1 = angle(&g.theta1, &file.theta1, 0.2 * PI)?;
    let theta2 = angle(&g.theta2, &file.theta2, -0.15 * PI)?;
    let gamma = g.gamma.or(file.gamma).unwrap_or(0.0);
    let sites = g.sites.or(file.sites).unwrap_or(60);
    let boundary: Boundary = g.boundary.as_ref().or(file.boundary.as_ref()).map_or(Ok(Boundary::Fbc), |s| s.parse())?;
    let format: Format = g.format.as_ref().or(file.format.as_ref()).map_or(Ok(Format::Csv), |s| s.parse())?;
    let n_k = g.nk.or(file.nk).unwrap_or(qwalk_core::topology::DEFAULT_NK);
    let threads = match g.threads.or(file.threads) {
        Some(t) => Some(t),
        None => env_threads()?,
    };
    if threads == Some(0) {
        return Err(Failure::Usage("thread count must be positive".into()));
    }
    Ok(Settings {
        params: WalkParams::new(theta1, theta2, gamma, sites, boundary)?,
        n_k,
        out: g.out.clone().or(file.out),
        format,
        plot: g.plot.clone().or(file.plot),
        threads,
    })
}

fn emit(table: &ResultTable, s: &Settings, plot_kind: Option<PlotKind>) -> Result<(), Failure> {
    match &s.out {
        Some(path) => table::write_table(table, s.format, path)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            let io_err = |source| Failure::Core(Error::Io { path: PathBuf::from("<stdout>"), source });
            match s.format {
                Format::Csv => table::write_csv_to(table, &mut lock)
                    .map_err(|e| Failure::Core(Error::Csv { path: PathBuf::from("<stdout>"), source: e }))?,
                Format::Json => writeln!(lock, "{:#}", table::to_json(table)).map_err(io_err)?,
            }
            lock.flush().map_err(io_err)?;
        }
    }
    if let Some(path) = &s.plot {
        let kind = plot_kind.ok_or_else(|| Failure::Usage("this subcommand has no plot".into()))?;
        emit_plot(table, kind, path)?;
    }
    Ok(())
}

fn plane_sweep(s: &Settings, task: Task, grid: usize, contour: Contour) -> Result<ResultTable, Failure> {
    let spec = SweepSpec {
        axis1: Axis::new(AxisName::Theta1, -PI, PI, grid)?,
        axis2: Some(Axis::new(AxisName::Theta2, -PI, PI, grid)?),
        fixed: s.params,
        task,
        options: TaskOptions { n_k: s.n_k, contour },
    };
    Ok(run_sweep(&spec)?)
}

fn verify(s: &Settings) -> Result<(), Failure> {
    let table = run_point(Task::Verify, &s.params, &TaskOptions { n_k: s.n_k, contour: Contour::Bloch })?;
    emit(&table, s, None)?;
    let fid = table.reals("fidelity")?;
    let res = table.reals("eigen_residual")?;
    let sub = table.reals("sublattice_residual")?;
    let mut bad = Vec::new();
    let labels = Sector::BOTH.iter().flat_map(|a| Eta::BOTH.iter().map(move |e| (*a, *e)));
    for (i, (alpha, eta)) in labels.enumerate() {
        if !(fid[i] >= FIDELITY_MIN && res[i] <= RESIDUAL_MAX && sub[i] <= RESIDUAL_MAX) {
            bad.push(format!(
                "alpha={alpha} eta={:+}: fidelity {:.3e}, residual {:.3e}, sublattice {:.3e}",
                eta.value(),
                fid[i],
                res[i],
                sub[i]
            ));
        }
    }
    if bad.is_empty() {
        eprintln!("verify: all {} edge modes match", fid.len());
        Ok(())
    } else {
        Err(Failure::Verification(bad.join("; ")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Command::Selftest = cli.command {
        let outcomes = selftest::run_all();
        let mut failed = 0;
        for o in &outcomes {
            println!("{o}");
            failed += usize::from(!o.passed);
        }
        return if failed == 0 {
            Ok(())
        } else {
            Err(Failure::Verification(format!("{failed} of {} criteria failed", outcomes.len())))
        };
    }
    let s = resolve(&cli.global)?;
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    let opts = TaskOptions { n_k: s.n_k, contour: Contour::Bloch };
    match cli.command {
        Command::Spectrum { scan: Some(scan), compare } => {
            if compare {
                return Err(Failure::Usage("--compare applies to single-point spectra".into()));
            }
            let spec = SweepSpec { axis1: parse_axis(&scan)?, axis2: None, fixed: s.params, task: Task::SpectrumScan, options: opts };
            emit(&run_sweep(&spec)?, &s, Some(PlotKind::Scan))
        }
        Command::Spectrum { scan: None, compare } => {
            let mut t = run_point(Task::SpectrumScan, &s.params, &opts)?;
            if compare {
                let other = match s.params.boundary {
                    Boundary::Fbc => Boundary::Pbc,
                    Boundary::Pbc => Boundary::Fbc,
                };
                let extra = run_point(Task::SpectrumScan, &s.params.with_boundary(other), &opts)?;
                for row in extra.rows {
                    t.push_row(row)?;
                }
            }
            emit(&t, &s, Some(PlotKind::ScatterComplex))
        }
        Command::PhaseDiagram { grid, contour } => {
            let contour: Contour = contour.parse()?;
            emit(&plane_sweep(&s, Task::PhaseDiagram, grid, contour)?, &s, Some(PlotKind::Heatmap))
        }
        Command::TransferMap { grid } => {
            emit(&plane_sweep(&s, Task::TransferMap, grid, Contour::Bloch)?, &s, Some(PlotKind::Heatmap))
        }
        Command::EdgeModes => emit(&run_point(Task::EdgeModes, &s.params, &opts)?, &s, Some(PlotKind::Profile)),
        Command::Gbz => emit(&run_point(Task::Gbz, &s.params, &opts)?, &s, None),
        Command::Verify => verify(&s),
        Command::Selftest => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qwalk: {f}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_in_units_of_pi() {
        let close = |s: &str, v: f64| (parse_angle(s).unwrap() - v).abs() < 1e-15;
        assert!(close("0.2pi", 0.2 * PI));
        assert!(close("-0.15pi", -0.15 * PI));
        assert!(close("pi", PI));
        assert!(close("-pi", -PI));
        assert!(close("pi/2", PI / 2.0));
        assert!(close("0.5π", PI / 2.0));
        assert!(close("1.25", 1.25));
        assert!(parse_angle("twopi").is_err());
        assert!(parse_angle("").is_err());
    }

    #[test]
    fn scan_axis_parsing() {
        let a = parse_axis("theta2:-1pi:1pi:11").unwrap();
        assert_eq!(a.name, AxisName::Theta2);
        assert_eq!(a.count, 11);
        assert!((a.start + PI).abs() < 1e-15);
        assert!(parse_axis("theta2:0:1").is_err());
        assert!(parse_axis("phi:0:1:3").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join(format!("qwalk-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "theta1 = \"0.3pi\"\ngamma = 0.1\nsites = 20\n").unwrap();
        let g = GlobalArgs { config: Some(path.clone()), sites: Some(30), ..Default::default() };
        let s = resolve(&g).unwrap();
        assert!((s.params.theta1 - 0.3 * PI).abs() < 1e-15);
        assert_eq!(s.params.gamma, 0.1);
        assert_eq!(s.params.n_sites, 30);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn exit_codes_by_failure() {
        assert_eq!(Failure::Usage(String::new()).code(), 1);
        assert_eq!(Failure::Verification(String::new()).code(), 3);
        assert_eq!(Failure::from(Error::InvalidParameter("x".into())).code(), 1);
    }
}
