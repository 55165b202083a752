//! Command-line front end. Every subcommand is a thin adapter: it resolves
//! flags (flag > --config file > environment > default), calls the library,
//! and prints the result as CSV or JSON with identical numeric content.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eqp::bs::{bs_d1_d2, bs_price};
use eqp::equilibrium::equilibrium_price;
use eqp::implied_vol::implied_vol;
use eqp::model::{CallContract, MarketParams};
use eqp::numerics::Probability;
use eqp::oracle::oracle_suite;
use eqp::physical::prob_positive_return;
use eqp::sweep::{
    default_convention_candidates, make_surface, make_table, reference_bs_row,
    reference_surface_spec, reference_table_spec, reproduce_reference_tables, scan_compositions,
    scan_csv, scan_grid_k_mu_rate, scan_grid_k_mu_sigma, scan_grid_k_mu_ttm, Axis, AxisParam,
    SweepGrid,
};
use eqp::Error;

#[derive(Parser)]
#[command(name = "eqp", version, about = "Option pricing under the stock's own growth rate: \
probabilities of positive return, equilibrium premiums, and reproduction grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price a call with the Black-Scholes formula
    PriceBs(PriceBsArgs),
    /// Probability that holding the call beats financing its premium
    Prob(ProbArgs),
    /// Premium at which the probability of positive return hits a target
    PriceEq(PriceEqArgs),
    /// Volatility implied by a call price
    ImpliedVol(ImpliedVolArgs),
    /// Premium table over growth rates and strikes
    Table(TableArgs),
    /// Keep grid points whose probability of positive return beats a threshold
    Scan(ScanArgs),
    /// Implied-vol surface of equilibrium premiums
    Surface(SurfaceArgs),
    /// Rank day-count readings against the bundled reference values
    ConventionSearch(ConventionSearchArgs),
    /// Cross-check the closed forms against Monte Carlo
    McCheck(McCheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Spot price
    #[arg(long, allow_hyphen_values = true)]
    s0: Option<f64>,
    /// Growth rate of the stock, per year
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Volatility, per year
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Risk-free rate, per year
    #[arg(long, allow_hyphen_values = true)]
    rate: Option<f64>,
    /// Strike price
    #[arg(long, allow_hyphen_values = true)]
    strike: Option<f64>,
    /// Time to expiry, in days
    #[arg(long, allow_hyphen_values = true)]
    ttm_days: Option<f64>,
    /// Days per year (252, 360, 365 or 366)
    #[arg(long)]
    day_count: Option<u32>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo path count
    #[arg(long)]
    paths: Option<u64>,
    /// key=value file supplying any of the flags above by name
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PriceBsArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ProbArgs {
    #[command(flatten)]
    common: Common,
    /// Premium paid for the call
    #[arg(long, allow_hyphen_values = true)]
    premium: Option<f64>,
    /// Use the Black-Scholes price as the premium
    #[arg(long)]
    use_bs: bool,
}

#[derive(Args)]
struct PriceEqArgs {
    #[command(flatten)]
    common: Common,
    /// Target probability of positive return, in (0, 1)
    #[arg(long, allow_hyphen_values = true)]
    target_p: Option<f64>,
}

#[derive(Args)]
struct ImpliedVolArgs {
    #[command(flatten)]
    common: Common,
    /// Observed call price
    #[arg(long, allow_hyphen_values = true)]
    price: Option<f64>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    common: Common,
    /// Target probability of positive return, in (0, 1)
    #[arg(long, allow_hyphen_values = true)]
    target_p: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScanPreset {
    /// strike x growth rate x interest rate
    KMuR,
    /// strike x growth rate x volatility
    KMuSigma,
    /// strike x growth rate x expiry
    KMuT,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Keep points with probability strictly above this
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// One of the bundled grids
    #[arg(long, value_enum, conflicts_with = "axis")]
    preset: Option<ScanPreset>,
    /// Custom axis, e.g. "K=80:120:2" or "mu=-0.1,0.0,0.1"; repeatable.
    /// Parameters not given as axes are fixed from the matching flags.
    #[arg(long)]
    axis: Vec<String>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[command(flatten)]
    common: Common,
    /// Target probability of positive return, in (0, 1)
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    target_p: f64,
}

#[derive(Args)]
struct ConventionSearchArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct McCheckArgs {
    #[command(flatten)]
    common: Common,
    /// Number of random market configurations
    #[arg(long, default_value_t = 20)]
    cases: u32,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

// ---- settings resolution: flag > config file > environment > default ----

struct Settings {
    s0: f64,
    mu: Option<f64>,
    sigma: f64,
    rate: f64,
    strike: Option<f64>,
    ttm_days: f64,
    day_count: u32,
    format: Format,
    out: Option<PathBuf>,
    seed: u64,
    paths: u64,
}

const CONFIG_KEYS: [&str; 10] = [
    "s0", "mu", "sigma", "rate", "strike", "ttm-days", "day-count", "format", "seed", "paths",
];

fn load_config(path: &PathBuf) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Lib(Error::Config(format!("cannot read {}: {e}", path.display())))
    })?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Lib(Error::Config(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(CliError::Lib(Error::Config(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                lineno + 1
            ))));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
            CliError::Lib(Error::Config(format!("config key {key}={raw:?}: {e}")))
        }),
    }
}

fn resolve(common: &Common) -> CliResult<Settings> {
    let cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };
    let env_day_count = match std::env::var("EQP_DAY_COUNT") {
        Ok(raw) => Some(raw.parse::<u32>().map_err(|e| {
            CliError::Lib(Error::Config(format!("EQP_DAY_COUNT={raw:?}: {e}")))
        })?),
        Err(_) => None,
    };
    let format = match common.format {
        Some(f) => f,
        None => match cfg.get("format") {
            Some(raw) => <Format as ValueEnum>::from_str(raw, true)
                .map_err(|e| CliError::Lib(Error::Config(format!("config key format: {e}"))))?,
            None => Format::Csv,
        },
    };
    Ok(Settings {
        s0: common.s0.or(config_get(&cfg, "s0")?).unwrap_or(100.0),
        mu: common.mu.or(config_get(&cfg, "mu")?),
        sigma: common.sigma.or(config_get(&cfg, "sigma")?).unwrap_or(0.1),
        rate: common.rate.or(config_get(&cfg, "rate")?).unwrap_or(0.05),
        strike: common.strike.or(config_get(&cfg, "strike")?),
        ttm_days: common
            .ttm_days
            .or(config_get(&cfg, "ttm-days")?)
            .unwrap_or(60.0),
        day_count: common
            .day_count
            .or(config_get(&cfg, "day-count")?)
            .or(env_day_count)
            .unwrap_or(365),
        format,
        out: common.out.clone(),
        seed: common.seed.or(config_get(&cfg, "seed")?).unwrap_or(42),
        paths: common
            .paths
            .or(config_get(&cfg, "paths")?)
            .unwrap_or(1_000_000),
    })
}

impl Settings {
    fn market(&self, mu: f64) -> eqp::Result<MarketParams> {
        MarketParams::new(self.s0, mu, self.sigma, self.rate, self.day_count)
    }

    fn contract(&self, m: &MarketParams) -> CliResult<CallContract> {
        let strike = require(self.strike, "strike")?;
        Ok(CallContract::from_days(strike, self.ttm_days, m)?)
    }
}

// ---- output plumbing ----

enum Cell {
    F(f64),
    OptF(Option<f64>),
    U(u64),
    S(String),
}

fn one_row(pairs: &[(&str, Cell)], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut head = String::new();
            let mut row = String::new();
            for (i, (name, cell)) in pairs.iter().enumerate() {
                if i > 0 {
                    head.push(',');
                    row.push(',');
                }
                head.push_str(name);
                match cell {
                    Cell::F(v) => {
                        let _ = write!(row, "{v}");
                    }
                    Cell::OptF(Some(v)) => {
                        let _ = write!(row, "{v}");
                    }
                    Cell::OptF(None) => {}
                    Cell::U(v) => {
                        let _ = write!(row, "{v}");
                    }
                    Cell::S(v) => row.push_str(v),
                }
            }
            format!("{head}\n{row}\n")
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            for (name, cell) in pairs {
                let value = match cell {
                    Cell::F(v) => serde_json::json!(v),
                    Cell::OptF(v) => serde_json::json!(v),
                    Cell::U(v) => serde_json::json!(v),
                    Cell::S(v) => serde_json::json!(v),
                };
                obj.insert((*name).to_string(), value);
            }
            let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
                .expect("scalar output serializes");
            text.push('\n');
            text
        }
    }
}

fn to_json_text<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    text
}

fn emit(settings: &Settings, text: &str) -> CliResult<()> {
    match &settings.out {
        Some(path) => fs::write(path, text).map_err(|e| {
            CliError::Lib(Error::Config(format!("cannot write {}: {e}", path.display())))
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---- subcommands ----

fn run_price_bs(args: &PriceBsArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    // the Black-Scholes value does not depend on the growth rate
    let m = settings.market(settings.mu.unwrap_or(0.0))?;
    let c = settings.contract(&m)?;
    let price = bs_price(&m, &c);
    let d = bs_d1_d2(&m, &c);
    let text = one_row(
        &[
            ("s0", Cell::F(settings.s0)),
            ("strike", Cell::F(c.strike())),
            ("sigma", Cell::F(settings.sigma)),
            ("rate", Cell::F(settings.rate)),
            ("t_days", Cell::F(settings.ttm_days)),
            ("day_count", Cell::U(settings.day_count.into())),
            ("ttm_years", Cell::F(c.ttm_years())),
            ("d1", Cell::F(d.d1)),
            ("d2", Cell::F(d.d2)),
            ("bs_value", Cell::F(price)),
        ],
        settings.format,
    );
    emit(&settings, &text)
}

fn run_prob(args: &ProbArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let mu = require(settings.mu, "mu")?;
    let m = settings.market(mu)?;
    let c = settings.contract(&m)?;
    let premium = match (args.premium, args.use_bs) {
        (Some(premium), false) => premium,
        (None, true) => bs_price(&m, &c),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --premium or --use-bs".to_string(),
            ))
        }
    };
    let r = prob_positive_return(&m, &c, premium)?;
    let text = one_row(
        &[
            ("s0", Cell::F(settings.s0)),
            ("strike", Cell::F(c.strike())),
            ("mu", Cell::F(mu)),
            ("sigma", Cell::F(settings.sigma)),
            ("rate", Cell::F(settings.rate)),
            ("t_days", Cell::F(settings.ttm_days)),
            ("day_count", Cell::U(settings.day_count.into())),
            ("ttm_years", Cell::F(c.ttm_years())),
            ("premium", Cell::F(premium)),
            ("e1", Cell::F(r.e1)),
            ("e2", Cell::F(r.e2)),
            ("n_e1", Cell::F(r.n_e1.value())),
            ("n_e2", Cell::F(r.n_e2.value())),
            ("p", Cell::F(r.p.value())),
        ],
        settings.format,
    );
    emit(&settings, &text)
}

fn run_price_eq(args: &PriceEqArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let mu = require(settings.mu, "mu")?;
    let target_p = require(args.target_p, "target-p")?;
    let m = settings.market(mu)?;
    let c = settings.contract(&m)?;
    let quote = equilibrium_price(&m, &c, Probability::new(target_p)?)?;
    let text = one_row(
        &[
            ("s0", Cell::F(settings.s0)),
            ("strike", Cell::F(c.strike())),
            ("mu", Cell::F(mu)),
            ("sigma", Cell::F(settings.sigma)),
            ("rate", Cell::F(settings.rate)),
            ("t_days", Cell::F(settings.ttm_days)),
            ("day_count", Cell::U(settings.day_count.into())),
            ("ttm_years", Cell::F(c.ttm_years())),
            ("target_p", Cell::F(target_p)),
            ("status", Cell::S(quote.status.to_string())),
            ("raw_value", Cell::OptF(quote.raw_value)),
            ("value", Cell::OptF(quote.value)),
            ("exercise_p", Cell::F(quote.exercise_p.value())),
        ],
        settings.format,
    );
    emit(&settings, &text)
}

fn run_implied_vol(args: &ImpliedVolArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let price = require(args.price, "price")?;
    // inversion does not involve the growth rate
    let m = settings.market(settings.mu.unwrap_or(0.0))?;
    let c = settings.contract(&m)?;
    let vol = implied_vol(&m, &c, price)?;
    let text = one_row(
        &[
            ("s0", Cell::F(settings.s0)),
            ("strike", Cell::F(c.strike())),
            ("rate", Cell::F(settings.rate)),
            ("t_days", Cell::F(settings.ttm_days)),
            ("day_count", Cell::U(settings.day_count.into())),
            ("ttm_years", Cell::F(c.ttm_years())),
            ("price", Cell::F(price)),
            ("implied_vol", Cell::F(vol)),
        ],
        settings.format,
    );
    emit(&settings, &text)
}

fn run_table(args: &TableArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let target_p = require(args.target_p, "target-p")?;
    let mut spec = reference_table_spec(target_p, settings.day_count, settings.ttm_days)?;
    spec.s0 = settings.s0;
    spec.sigma = settings.sigma;
    spec.rate = settings.rate;
    let artifact = make_table(&spec)?;
    let text = match settings.format {
        Format::Csv => artifact.machine_csv(),
        Format::Json => to_json_text(&artifact),
    };
    emit(&settings, &text)?;
    // diagnostic comparison against the bundled reference values
    if spec.s0 == 100.0 && spec.sigma == 0.1 && spec.rate == 0.05 {
        let report = reproduce_reference_tables(&default_convention_candidates())?;
        eprint!("{}", report.summary());
    }
    Ok(())
}

fn parse_axis(raw: &str) -> CliResult<Axis> {
    let usage = || {
        CliError::Usage(format!(
            "bad --axis {raw:?}; expected name=start:stop:step or name=v1,v2,..."
        ))
    };
    let (name, body) = raw.split_once('=').ok_or_else(usage)?;
    let param = AxisParam::from_token(name.trim()).map_err(|_| usage())?;
    let body = body.trim();
    if body.contains(':') {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(usage());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage())?;
        Ok(Axis::with_step(param, nums[0], nums[1], nums[2])?)
    } else {
        let values: Vec<f64> = body
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage())?;
        Ok(Axis::from_values(param, values)?)
    }
}

fn run_scan(args: &ScanArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let threshold = require(args.threshold, "threshold")?;
    let grid = match args.preset {
        Some(ScanPreset::KMuR) => scan_grid_k_mu_rate(settings.day_count)?,
        Some(ScanPreset::KMuSigma) => scan_grid_k_mu_sigma(settings.day_count)?,
        Some(ScanPreset::KMuT) => scan_grid_k_mu_ttm(settings.day_count)?,
        None => {
            if args.axis.is_empty() {
                return Err(CliError::Usage(
                    "give --preset or at least one --axis".to_string(),
                ));
            }
            let axes = args
                .axis
                .iter()
                .map(|raw| parse_axis(raw))
                .collect::<CliResult<Vec<_>>>()?;
            let mut fixed = Vec::new();
            let swept: Vec<AxisParam> = axes.iter().map(|a| a.param).collect();
            let candidates = [
                (AxisParam::Strike, settings.strike),
                (AxisParam::Mu, settings.mu),
                (AxisParam::Rate, Some(settings.rate)),
                (AxisParam::Sigma, Some(settings.sigma)),
                (AxisParam::TtmDays, Some(settings.ttm_days)),
            ];
            for (param, value) in candidates {
                if swept.contains(&param) {
                    continue;
                }
                if let Some(v) = value {
                    fixed.push((param, v));
                }
            }
            SweepGrid::new(settings.s0, settings.day_count, axes, fixed)?
        }
    };
    let records = scan_compositions(&grid, Probability::new(threshold)?)?;
    let text = match settings.format {
        Format::Csv => scan_csv(&records),
        Format::Json => to_json_text(&records),
    };
    emit(&settings, &text)?;
    eprintln!(
        "scan: {} of {} grid points exceed p = {}",
        records.len(),
        grid.total_points(),
        threshold
    );
    Ok(())
}

fn run_surface(args: &SurfaceArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let mut spec = reference_surface_spec(settings.day_count)?;
    spec.target_p = args.target_p;
    spec.s0 = settings.s0;
    spec.sigma = settings.sigma;
    spec.rate = settings.rate;
    spec.t_days = settings.ttm_days;
    let artifact = make_surface(&spec)?;
    let text = match settings.format {
        Format::Csv => artifact.machine_csv(),
        Format::Json => to_json_text(&artifact),
    };
    emit(&settings, &text)
}

fn run_convention_search(args: &ConventionSearchArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let report = reproduce_reference_tables(&default_convention_candidates())?;
    let text = match settings.format {
        Format::Csv => {
            // the ranking against the printed values, best first
            let search = eqp::sweep::convention_search(
                &reference_bs_row(),
                &default_convention_candidates(),
                settings.s0,
                settings.sigma,
                settings.rate,
            )?;
            search.csv()
        }
        Format::Json => to_json_text(&report),
    };
    emit(&settings, &text)?;
    eprint!("{}", report.summary());
    Ok(())
}

fn run_mc_check(args: &McCheckArgs) -> CliResult<()> {
    let settings = resolve(&args.common)?;
    let cases = oracle_suite(settings.seed, settings.paths, args.cases)?;
    let text = match settings.format {
        Format::Csv => {
            let mut out = String::from(
                "index,s0,mu,sigma,rate,strike,ttm_years,premium,closed_p,mc_p_mean,mc_p_se,p_gap_se,closed_bs,mc_bs_mean,mc_bs_se,bs_gap_se\n",
            );
            for c in &cases {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    c.index,
                    c.s0,
                    c.mu,
                    c.sigma,
                    c.rate,
                    c.strike,
                    c.ttm_years,
                    c.premium,
                    c.closed_p,
                    c.mc_p_mean,
                    c.mc_p_se,
                    c.p_gap_se,
                    c.closed_bs,
                    c.mc_bs_mean,
                    c.mc_bs_se,
                    c.bs_gap_se
                );
            }
            out
        }
        Format::Json => to_json_text(&cases),
    };
    emit(&settings, &text)?;
    let max_p = cases.iter().map(|c| c.p_gap_se).fold(0.0f64, f64::max);
    let max_bs = cases.iter().map(|c| c.bs_gap_se).fold(0.0f64, f64::max);
    eprintln!(
        "mc-check: {} cases x {} paths, max probability gap {:.2} SE, max price gap {:.2} SE",
        cases.len(),
        settings.paths,
        max_p,
        max_bs
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::PriceBs(args) => run_price_bs(args),
        Command::Prob(args) => run_prob(args),
        Command::PriceEq(args) => run_price_eq(args),
        Command::ImpliedVol(args) => run_implied_vol(args),
        Command::Table(args) => run_table(args),
        Command::Scan(args) => run_scan(args),
        Command::Surface(args) => run_surface(args),
        Command::ConventionSearch(args) => run_convention_search(args),
        Command::McCheck(args) => run_mc_check(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(64)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Bracket { .. } | Error::Convergence { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
