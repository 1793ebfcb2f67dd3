use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sdc::cavity::{round_trip_matrix, CavityGeometry, Param};
use sdc::config::{Format, RunConfig};
use sdc::gaussian::beam_profile;
use sdc::output::{write_table, Cell, Table};
use sdc::power::{power_surface, power_vs_distance, DtTuning};
use sdc::stability::{
    default_search_range, g_parameter, is_stable, retune_dt, solve_g_zero, stability_map, width_vs_distance, Axis,
    WidthSweepOptions,
};
use sdc::tolerance::{bmc_tolerance, linear_tolerance, ToleranceSpec};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "sdc", version, about = "Spatially distributed cavity design sweeps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent. A manifest is written beside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Overrides the configured Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Stability parameter, verdict and round-trip matrix.
    G,
    /// g over a two-parameter grid: x_mm,y_mm,g.
    Map(MapArgs),
    /// Stable-interval width against working distance: dw_mm,lower_mm,upper_mm,width_mm.
    Width(WidthArgs),
    /// dt giving g = 0 at each working distance: dw_mm,dt_star_mm.
    Dtstar(DistanceArgs),
    /// Fundamental-mode radius along the one-way path: z_mm,w00_mm.
    Profile(ProfileArgs),
    /// Maximum distance tolerance: dw_mm,tau_d_max_mm,method,seed.
    Tolerance(ToleranceArgs),
    /// Output power against working distance: dw_mm,dt_mm,g,w00_gain_mm,t_diff,p_out_w.
    Power(PowerArgs),
    /// Output power over gain radius and magnification: a_g_mm,m_tel,p_out_w.
    Surface(SurfaceArgs),
}

#[derive(Args, Debug, Serialize)]
struct MapArgs {
    #[arg(long, default_value = "d1")]
    x: Param,
    #[arg(long, default_value = "dt")]
    y: Param,
    /// x range `lo:hi:count`; the parameter's default window with 200 points when absent.
    #[arg(long)]
    x_range: Option<String>,
    #[arg(long)]
    y_range: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct DistanceArgs {
    /// Working distances in mm: `a,b,c` or `lo:hi:count`.
    #[arg(long)]
    dw: String,
}

#[derive(Args, Debug, Serialize)]
struct WidthArgs {
    #[arg(long, default_value = "dt")]
    param: Param,
    #[arg(long)]
    dw: String,
    /// Move dt to g = 0 at each distance before measuring.
    #[arg(long)]
    retune: bool,
    /// Search window `lo:hi` in mm; the parameter's default window when absent.
    #[arg(long)]
    search: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct ProfileArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Bmc,
    Linear,
    Both,
}

#[derive(Args, Debug, Serialize)]
struct ToleranceArgs {
    #[arg(long)]
    dw: String,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    /// Move dt to g = 0 at each distance first.
    #[arg(long)]
    retune: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum TuningArg {
    Fixed,
    Retune,
    Design,
}

#[derive(Args, Debug, Serialize)]
struct PowerArgs {
    #[arg(long)]
    dw: String,
    #[arg(long, value_enum, default_value = "retune")]
    tuning: TuningArg,
    /// Design distance (mm) for `--tuning design`.
    #[arg(long)]
    design_dw: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct SurfaceArgs {
    #[arg(long, default_value_t = 100_000.0)]
    dw: f64,
    /// Gain radii in mm.
    #[arg(long, default_value = "0.1:6:60")]
    a_g: String,
    /// Telescope magnifications.
    #[arg(long, default_value = "1:10:10")]
    m_tel: String,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Io(_) => EXIT_IO,
        }
    }
}

impl From<sdc::Error> for Failure {
    fn from(e: sdc::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

/// `a,b,c` or `lo:hi:count` (inclusive, evenly spaced).
fn parse_values(name: &str, s: &str) -> Result<Vec<f64>, Failure> {
    let bad = |msg: String| Failure::Config(format!("--{name}: {msg}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| bad(format!("`{t}`: {e}")));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected lo:hi:count, got `{s}`")));
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|e| bad(format!("count `{}`: {e}", parts[2])))?;
        if n == 0 {
            return Err(bad("count must be positive".into()));
        }
        Ok(Axis { param: Param::Dw, lo, hi, count: n }.values())
    } else {
        s.split(',').map(num).collect()
    }
}

fn parse_window(name: &str, s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Failure::Config(format!("--{name}: `{t}`: {e}")));
    match parts.as_slice() {
        [lo, hi] => Ok((num(lo)?, num(hi)?)),
        _ => Err(Failure::Config(format!("--{name}: expected lo:hi, got `{s}`"))),
    }
}

fn axis(geom: &CavityGeometry, param: Param, range: Option<&str>, flag: &str) -> Result<Axis, Failure> {
    match range {
        None => {
            let (lo, hi) = default_search_range(geom, param);
            Ok(Axis::new(param, lo, hi, 200))
        }
        Some(r) => {
            let v = parse_values(flag, r)?;
            if !r.contains(':') || v.is_empty() {
                return Err(Failure::Config(format!("--{flag}: expected lo:hi:count")));
            }
            Ok(Axis::new(param, v[0], *v.last().unwrap(), v.len()))
        }
    }
}

fn num_or_empty(r: sdc::Result<f64>) -> Cell {
    r.ok().into()
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut config = match &cli.common.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.tolerance.seed = seed;
    }
    if let Some(f) = cli.common.format {
        config.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    let out: Option<PathBuf> = cli.common.out.clone().or_else(|| config.path.as_ref().map(PathBuf::from));
    let geom = config.geometry;
    let lambda = config.wavelength;

    let table = match &cli.command {
        Command::G => {
            let m = round_trip_matrix(&geom)?;
            let g = g_parameter(&geom)?;
            let verdict = if is_stable(g) { "stable" } else { "unstable" };
            if out.is_none() && config.format == Format::Csv {
                println!("g = {}", sdc::output::format_f64(g));
                println!("verdict: {verdict}");
                println!("round_trip = {m}");
                return Ok(());
            }
            let mut t = Table::new(&["g", "verdict", "a", "b", "c", "d"]);
            t.push(vec![g.into(), verdict.into(), m.a.into(), m.b.into(), m.c.into(), m.d.into()]);
            t
        }
        Command::Map(a) => {
            let x = axis(&geom, a.x, a.x_range.as_deref(), "x-range")?;
            let y = axis(&geom, a.y, a.y_range.as_deref(), "y-range")?;
            let map = stability_map(&geom, x, y)?;
            let mut t = Table::new(&["x_mm", "y_mm", "g"]);
            for (i, &xv) in map.x_grid.iter().enumerate() {
                for (j, &yv) in map.y_grid.iter().enumerate() {
                    t.push(vec![xv.into(), yv.into(), map.g_values[i][j].into()]);
                }
            }
            t
        }
        Command::Width(a) => {
            let dws = parse_values("dw", &a.dw)?;
            let search = a.search.as_deref().map(|s| parse_window("search", s)).transpose()?;
            let rows = width_vs_distance(&geom, a.param, &dws, WidthSweepOptions { retune_dt: a.retune, search });
            let mut t = Table::new(&["dw_mm", "lower_mm", "upper_mm", "width_mm"]);
            for r in rows {
                let iv = r.interval;
                t.push(vec![
                    r.dw.into(),
                    iv.map(|i| i.lower).into(),
                    iv.map(|i| i.upper).into(),
                    iv.map(|i| i.width).into(),
                ]);
            }
            t
        }
        Command::Dtstar(a) => {
            let dws = parse_values("dw", &a.dw)?;
            let mut t = Table::new(&["dw_mm", "dt_star_mm"]);
            for dw in dws {
                let g = geom.with(Param::Dw, dw);
                let (lo, hi) = default_search_range(&g, Param::Dt);
                t.push(vec![dw.into(), num_or_empty(solve_g_zero(&g, Param::Dt, lo, hi))]);
            }
            t
        }
        Command::Profile(a) => {
            let prof = beam_profile(&geom, lambda, a.samples)?;
            let mut t = Table::new(&["z_mm", "w00_mm"]);
            for p in prof {
                t.push(vec![p.z.into(), p.w00.into()]);
            }
            t
        }
        Command::Tolerance(a) => {
            let dws = parse_values("dw", &a.dw)?;
            let spec: ToleranceSpec = config.tolerance;
            let mut t = Table::new(&["dw_mm", "tau_d_max_mm", "method", "seed"]);
            for dw in dws {
                let mut g = geom.with(Param::Dw, dw);
                if a.retune {
                    match retune_dt(&g) {
                        Ok(r) => g = r,
                        Err(e) => log::warn!("dt retune failed at dw = {dw}: {e}"),
                    }
                }
                if a.method != MethodArg::Linear {
                    let r = bmc_tolerance(&g, &spec);
                    if let Err(e) = &r {
                        log::warn!("bmc at dw = {dw}: {e}");
                    }
                    t.push(vec![dw.into(), num_or_empty(r.map(|r| r.tau_d_max)), "bmc".into(), spec.seed.into()]);
                }
                if a.method != MethodArg::Bmc {
                    let r = linear_tolerance(&g, spec.tau_f_star);
                    if let Err(e) = &r {
                        log::warn!("linear at dw = {dw}: {e}");
                    }
                    t.push(vec![dw.into(), num_or_empty(r.map(|r| r.tau_d_max)), "linear".into(), Cell::Empty]);
                }
            }
            t
        }
        Command::Power(a) => {
            let dws = parse_values("dw", &a.dw)?;
            let tuning = match (a.tuning, a.design_dw) {
                (TuningArg::Fixed, _) => DtTuning::Fixed,
                (TuningArg::Retune, _) => DtTuning::RetunePerDistance,
                (TuningArg::Design, Some(d)) => DtTuning::DesignDistance(d),
                (TuningArg::Design, None) => {
                    return Err(Failure::Config("--tuning design requires --design-dw".into()));
                }
            };
            let rows = power_vs_distance(&geom, &config.gain, &config.loss, &dws, tuning, lambda)?;
            let mut t = Table::new(&["dw_mm", "dt_mm", "g", "w00_gain_mm", "t_diff", "p_out_w"]);
            for r in rows {
                t.push(vec![r.dw.into(), r.dt.into(), r.g.into(), r.w00_gain.into(), r.t_diff.into(), r.p_out.into()]);
            }
            t
        }
        Command::Surface(a) => {
            let a_g = parse_values("a-g", &a.a_g)?;
            let m_tel = parse_values("m-tel", &a.m_tel)?;
            let pts = power_surface(&geom, &config.gain, &config.loss, a.dw, &a_g, &m_tel, lambda)?;
            let mut t = Table::new(&["a_g_mm", "m_tel", "p_out_w"]);
            for p in pts {
                t.push(vec![p.a_g.into(), p.m_tel.into(), p.p_out.into()]);
            }
            t
        }
    };

    write_table(&table, config.format, out.as_deref().map(Path::new), command_name(&cli.command), &config, &cli.command)
        .map_err(|e| Failure::Io(e.to_string()))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::G => "g",
        Command::Map(_) => "map",
        Command::Width(_) => "width",
        Command::Dtstar(_) => "dtstar",
        Command::Profile(_) => "profile",
        Command::Tolerance(_) => "tolerance",
        Command::Power(_) => "power",
        Command::Surface(_) => "surface",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("config error: {m}"),
                Failure::Numeric(m) => format!("numerical failure: {m}"),
                Failure::Io(m) => format!("io error: {m}"),
            };
            eprintln!("{msg}");
            ExitCode::from(f.code())
        }
    }
}
