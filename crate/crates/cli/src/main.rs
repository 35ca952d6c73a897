//! `colombeau`: build mollifiers, evaluate generalized functions, estimate
//! orders in `eps`, classify subjects, and emit figure data.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 mollifier construction
//! failure, 4 evaluation failure, 5 I/O failure.

mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use colombeau::asymptotics::{
    classify, fit_order, standard_bases, sup_profile, AsymptoticsError, ClassifyOptions, EpsSchedule, Resolution,
    MIN_GRID_POINTS,
};
use colombeau::exprlang::{parse_dag, FunctionRegistry, ParseError};
use colombeau::genfunc::{evaluate_grid, EvalError, GeneralizedFunction};
use colombeau::mollifier::{construct_aq, make_bump, moments, scale, MollifierError, TestFunction, MAX_CLASS};

use output::{num, write_atomic, Format, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}", render_parse_error(.text, .error))]
    Parse { text: String, error: ParseError },
    #[error("mollifier construction failed: {0}")]
    Construction(#[from] MollifierError),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("cannot write {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Construction(_) => 3,
            CliError::Evaluation(_) => 4,
            CliError::Io { .. } => 5,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Evaluation(e.to_string())
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Mollifier(m) => CliError::Construction(m),
            AsymptoticsError::InvalidParameter(m) | AsymptoticsError::Config(m) => CliError::Usage(m),
            AsymptoticsError::Eval(e) => e.into(),
        }
    }
}

fn render_parse_error(text: &str, e: &ParseError) -> String {
    let col = text[..e.offset.min(text.len())].chars().count();
    format!("parse error {e}\n  {text}\n  {}^", " ".repeat(col))
}

#[derive(Debug, Parser)]
#[command(name = "colombeau", version, about = "Numerical experiments with Colombeau generalized functions")]
struct Cli {
    /// Separator for tabular output.
    #[arg(long, value_enum, global = true, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build phi in A_q from the even bump; write x,phi,deriv1 samples.
    Mollifier {
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        halfwidth: f64,
        #[arg(long, default_value_t = 401)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate an expression under phi_eps on a uniform grid; write y,value.
    Eval {
        #[arg(long)]
        expr: String,
        #[arg(long)]
        q: usize,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
        #[command(flatten)]
        region: Region,
        /// Derivative order in y.
        #[arg(long, default_value_t = 0)]
        deriv: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sup-norm profile over an eps schedule and its fitted order.
    Order {
        #[arg(long)]
        expr: String,
        #[arg(long)]
        q: usize,
        #[command(flatten)]
        schedule: Schedule,
        #[command(flatten)]
        region: Region,
        #[arg(long, default_value_t = 0)]
        deriv: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Moderate/null classification; JSON report at OUT, profile rows at OUT.csv.
    Classify {
        #[arg(long)]
        expr: String,
        #[arg(long = "q-max", default_value_t = 3)]
        q_max: usize,
        #[arg(long = "N-max", default_value_t = 4)]
        big_n_max: usize,
        #[arg(long = "n-max", default_value_t = 1)]
        n_max: usize,
        #[command(flatten)]
        schedule: Schedule,
        #[command(flatten)]
        region: Region,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the data for all figures into OUTDIR.
    Figures {
        #[arg(long)]
        outdir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Region {
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, default_values_t = [-1.0, 1.0])]
    interval: Vec<f64>,
    #[arg(long, default_value_t = 401)]
    grid: usize,
}

#[derive(Debug, Args)]
struct Schedule {
    #[arg(long = "eps-start", default_value_t = 0.2, allow_negative_numbers = true)]
    eps_start: f64,
    #[arg(long = "eps-ratio", default_value_t = 0.5, allow_negative_numbers = true)]
    eps_ratio: f64,
    #[arg(long = "eps-count", default_value_t = 9)]
    eps_count: usize,
}

impl Region {
    fn interval(&self) -> Result<(f64, f64), CliError> {
        let (a, b) = (self.interval[0], self.interval[1]);
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(CliError::Usage(format!("--interval needs finite A < B, got {a} {b}")));
        }
        Ok((a, b))
    }
}

impl Schedule {
    fn build(&self) -> Result<EpsSchedule, CliError> {
        if self.eps_count < 4 {
            return Err(CliError::Usage(format!(
                "--eps-count must be at least 4, got {}",
                self.eps_count
            )));
        }
        if !(self.eps_start > 0.0) || !self.eps_start.is_finite() {
            return Err(CliError::Usage(format!("--eps-start must be positive, got {}", self.eps_start)));
        }
        let s = EpsSchedule::geometric(self.eps_start, self.eps_ratio, self.eps_count)?;
        if s.values().contains(&0.0) {
            return Err(CliError::Usage("eps schedule underflows to zero".into()));
        }
        Ok(s)
    }
}

fn check_q(q: usize) -> Result<(), CliError> {
    if q > MAX_CLASS {
        return Err(CliError::Usage(format!("q must be at most {MAX_CLASS}, got {q}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CliError::Usage(format!("--eps must be positive and finite, got {eps}")));
    }
    Ok(())
}

fn parse_expr(text: &str) -> Result<GeneralizedFunction, CliError> {
    parse_dag(text, &FunctionRegistry::default()).map_err(|error| CliError::Parse {
        text: text.to_string(),
        error,
    })
}

/// `phi in A_q` built from the even bump of the given halfwidth.
pub fn base_phi(q: usize, halfwidth: f64) -> Result<TestFunction, MollifierError> {
    construct_aq(q, &make_bump(halfwidth)?)
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    v[n - 1] = hi;
    v
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format;
    match cli.command {
        Command::Mollifier {
            q,
            halfwidth,
            samples,
            out,
        } => {
            check_q(q)?;
            if !(halfwidth > 0.0) || !halfwidth.is_finite() {
                return Err(CliError::Usage(format!("--halfwidth must be positive, got {halfwidth}")));
            }
            if samples < 2 {
                return Err(CliError::Usage(format!("--samples must be at least 2, got {samples}")));
            }
            let phi = base_phi(q, halfwidth)?;
            let m = moments(&phi, q)?;
            write_atomic(&out, &figures::phi_table(&phi, samples).render(format))?;
            for (k, l) in phi.lambda().iter().enumerate() {
                println!("lambda[{k}] = {}", num(*l));
            }
            for (r, v) in m.iter().enumerate() {
                println!("m[{r}] = {}", num(*v));
            }
        }
        Command::Eval {
            expr,
            q,
            eps,
            region,
            deriv,
            out,
        } => {
            check_q(q)?;
            check_eps(eps)?;
            let (a, b) = region.interval()?;
            if region.grid < 2 {
                return Err(CliError::Usage(format!("--grid must be at least 2, got {}", region.grid)));
            }
            let g = parse_expr(&expr)?;
            let kernel = scale(&base_phi(q, 1.0)?, eps)?;
            let ys = uniform(a, b, region.grid);
            let vals = evaluate_grid(&g, &kernel, &ys, deriv)?;
            let mut t = Table::new(["y", "value"]);
            for (y, v) in ys.iter().zip(&vals) {
                t.push_numbers(&[*y, *v]);
            }
            write_atomic(&out, &t.render(format))?;
        }
        Command::Order {
            expr,
            q,
            schedule,
            region,
            deriv,
            out,
        } => {
            check_q(q)?;
            let res = resolution(&schedule, &region)?;
            let g = parse_expr(&expr)?;
            let profile = sup_profile(&g, &base_phi(q, 1.0)?, &res, deriv)?;
            let est = fit_order(&profile)?;
            let mut t = Table::new(["epsilon", "sup_norm"]);
            for (e, m) in &profile {
                t.push_numbers(&[*e, *m]);
            }
            write_atomic(&out, &t.render(format))?;
            if !est.in_asymptotic_regime {
                eprintln!("warning: fit residual {} suggests eps is not yet asymptotic", est.residual);
            }
            println!("{est}");
        }
        Command::Classify {
            expr,
            q_max,
            big_n_max,
            n_max,
            schedule,
            region,
            out,
        } => {
            if q_max == 0 {
                return Err(CliError::Usage("--q-max must be at least 1".into()));
            }
            check_q(q_max)?;
            let resolution = resolution(&schedule, &region)?;
            let g = parse_expr(&expr)?;
            let opts = ClassifyOptions {
                resolution,
                n_max,
                q_max,
                big_n_max,
                ..ClassifyOptions::default()
            };
            let report = classify(&g, &standard_bases(q_max)?, &opts)?;
            let mut t = Table::new(["epsilon", "sup_norm", "deriv_order", "phi_id", "subject_id"]);
            for r in &report.profile {
                t.push(vec![
                    num(r.epsilon),
                    num(r.sup_norm),
                    r.deriv_order.to_string(),
                    r.phi_id.clone(),
                    r.subject_id.clone(),
                ]);
            }
            let mut json = report.to_json();
            json.push('\n');
            let mut csv_path = out.clone().into_os_string();
            csv_path.push(".csv");
            write_atomic(&PathBuf::from(csv_path), &t.render(format))?;
            write_atomic(&out, &json)?;
            println!("{}", report.verdict);
            for (n, big_n) in report.moderate_n_by_order.iter().enumerate() {
                match big_n {
                    Some(k) => println!("N={k} at n={n}"),
                    None => println!("no N <= {big_n_max} at n={n}"),
                }
            }
        }
        Command::Figures { outdir } => figures::emit(&outdir)?,
    }
    Ok(())
}

fn resolution(schedule: &Schedule, region: &Region) -> Result<Resolution, CliError> {
    let interval = region.interval()?;
    if region.grid < MIN_GRID_POINTS {
        return Err(CliError::Usage(format!(
            "--grid must be at least {MIN_GRID_POINTS}, got {}",
            region.grid
        )));
    }
    Ok(Resolution {
        interval,
        grid_points: region.grid,
        schedule: schedule.build()?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
