//! `zonalchaos` command-line front end.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;

/// Exit status 2 for bad input, 1 for everything else.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
}

impl From<zonalchaos::Error> for CliError {
    fn from(e: zonalchaos::Error) -> Self {
        use zonalchaos::Error::*;
        match e {
            Cache(_) | Io(_) | Json(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "zonalchaos", version, about = "Zonal polynomials, matrix Hermite chaos and random wave experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zonal polynomial tables
    #[command(subcommand)]
    Tables(TablesCmd),
    /// Evaluate zonal, Hermite or Laguerre polynomials
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Chaos coefficients
    #[command(subcommand)]
    Coeff(CoeffCmd),
    /// Partial sums of the chaos variance expansion of det(XX^T)^{1/2}
    VarianceExpansion(Params),
    /// Intrinsic and mixed volumes of ellipsoids
    #[command(subcommand)]
    Geometry(GeometryCmd),
    /// Ornstein-Uhlenbeck type operators and correlated orthogonality
    #[command(subcommand)]
    Mehler(MehlerCmd),
    /// Arithmetic random waves on the three-torus
    #[command(subcommand)]
    Arw(ArwCmd),
    /// Test suites
    #[command(subcommand)]
    Suite(SuiteCmd),
}

#[derive(Subcommand)]
enum TablesCmd {
    /// Build the table and write it to the cache directory
    Build(Params),
    /// Print the rows of one partition
    Show(Params),
}

#[derive(Subcommand)]
enum EvalCmd {
    /// C_kappa at a list of eigenvalues
    Zonal(Params),
    /// H_kappa at a matrix X
    Hermite(Params),
    /// L_kappa of order gamma at a list of eigenvalues
    Laguerre(Params),
}

#[derive(Subcommand)]
enum CoeffCmd {
    /// Closed-form coefficients of det(XX^T)^{1/2}
    Det(Params),
    /// Coefficients of det(XX^T)^{1/2} with row covariance Sigma
    DetSigma(Params),
    /// Monte Carlo projection of a spectral functional
    Mc(Params),
    /// Wishart integral route for a radial functional
    Radial(Params),
}

#[derive(Subcommand)]
enum GeometryCmd {
    /// Intrinsic volume V_l of the ellipsoid with shape matrix Sigma
    Intrinsic(Params),
    /// Mixed volume of the ellipsoid and the unit ball
    Mixed(Params),
    /// Parallel-body volume against the Steiner polynomial
    Steiner(Params),
}

#[derive(Subcommand)]
enum MehlerCmd {
    /// Monte Carlo O_{t;A} H_kappa at X against the eigenvalue prediction
    Apply(Params),
    /// E[H_kappa(X) H_sigma(Y)] for correlated X, Y against the closed form
    Covariance(Params),
}

#[derive(Subcommand)]
enum ArwCmd {
    /// Lattice points on the sphere of radius sqrt(n)
    Freq(Params),
    /// Replicate mean of the total variation against the exact mean
    Mean(Params),
    /// Replicate variance against the leading term
    Variance(Params),
    /// Normality tests for the total variation and the second-chaos statistic
    Clt(Params),
    /// Exact lattice identities of the gradient covariance
    Diagnostics(Params),
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// Runs the acceptance criteria; exits 1 if any fails
    Acceptance(Params),
}

type Handler = fn(&Params) -> Result<output::Output, CliError>;

fn dispatch(command: Command) -> (&'static str, Params, Option<Handler>) {
    use commands::*;
    match command {
        Command::Tables(TablesCmd::Build(p)) => ("tables build", p, Some(tables_build as Handler)),
        Command::Tables(TablesCmd::Show(p)) => ("tables show", p, Some(tables_show)),
        Command::Eval(EvalCmd::Zonal(p)) => ("eval zonal", p, Some(eval_zonal)),
        Command::Eval(EvalCmd::Hermite(p)) => ("eval hermite", p, Some(eval_hermite)),
        Command::Eval(EvalCmd::Laguerre(p)) => ("eval laguerre", p, Some(eval_laguerre)),
        Command::Coeff(CoeffCmd::Det(p)) => ("coeff det", p, Some(coeff_det)),
        Command::Coeff(CoeffCmd::DetSigma(p)) => ("coeff det-sigma", p, Some(coeff_det_sigma)),
        Command::Coeff(CoeffCmd::Mc(p)) => ("coeff mc", p, Some(coeff_mc)),
        Command::Coeff(CoeffCmd::Radial(p)) => ("coeff radial", p, Some(coeff_radial)),
        Command::VarianceExpansion(p) => ("variance-expansion", p, Some(variance_expansion_cmd)),
        Command::Geometry(GeometryCmd::Intrinsic(p)) => ("geometry intrinsic", p, Some(geometry_intrinsic)),
        Command::Geometry(GeometryCmd::Mixed(p)) => ("geometry mixed", p, Some(geometry_mixed)),
        Command::Geometry(GeometryCmd::Steiner(p)) => ("geometry steiner", p, Some(geometry_steiner)),
        Command::Mehler(MehlerCmd::Apply(p)) => ("mehler apply", p, Some(mehler_apply_cmd)),
        Command::Mehler(MehlerCmd::Covariance(p)) => ("mehler covariance", p, Some(mehler_covariance)),
        Command::Arw(ArwCmd::Freq(p)) => ("arw freq", p, Some(arw_freq)),
        Command::Arw(ArwCmd::Mean(p)) => ("arw mean", p, Some(arw_mean)),
        Command::Arw(ArwCmd::Variance(p)) => ("arw variance", p, Some(arw_variance)),
        Command::Arw(ArwCmd::Clt(p)) => ("arw clt", p, Some(arw_clt)),
        Command::Arw(ArwCmd::Diagnostics(p)) => ("arw diagnostics", p, Some(arw_diagnostics)),
        Command::Suite(SuiteCmd::Acceptance(p)) => ("suite acceptance", p, None),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, flags, handler) = dispatch(cli.command);
    let params = config::resolve(flags)?;
    if let Some(w) = params.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let (out, ok) = match handler {
        Some(h) => (h(&params)?, true),
        None => commands::suite_acceptance(&params)?,
    };
    output::emit(name, &params, &out)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
    }
}
