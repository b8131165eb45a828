use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ckn::io::commands::{
    cmd_analyze, cmd_branch, cmd_gn_limit, cmd_reproduce_figures, cmd_symmetric_curve, CrossingOutcome,
};
use ckn::io::config::RunConfig;
use ckn::model::MeasureMode;
use ckn::Error;

#[derive(Parser)]
#[command(
    name = "ckn",
    version,
    about = "Symmetric and non-symmetric critical points of CKN quotients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form symmetric curves for every theta.
    SymmetricCurve(Overrides),
    /// Non-symmetric branch with checkpoints and a manifest.
    Branch(Overrides),
    /// Crossings, envelopes, diagrams and the GN threshold from a branch run.
    Analyze(Overrides),
    /// Euclidean ground state and the limit level.
    GnLimit(Overrides),
    /// All of the above for the standard figure set.
    ReproduceFigures(Overrides),
}

/// Flags override values from the configuration file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated theta values.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long = "L")]
    half_length: Option<f64>,
    #[arg(long)]
    ns: Option<usize>,
    #[arg(long)]
    nphi: Option<usize>,
    #[arg(long)]
    measure_mode: Option<MeasureMode>,
    #[arg(long)]
    mu0_factor: Option<f64>,
    /// Initial perturbation relative to the soliton's L2 norm.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa_stop: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.d {
            c.d = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = self.theta {
            c.theta_list = v;
        }
        if let Some(v) = self.half_length {
            c.half_length = v;
        }
        if let Some(v) = self.ns {
            c.n_s = v;
        }
        if let Some(v) = self.nphi {
            c.n_phi = v;
        }
        if let Some(v) = self.measure_mode {
            c.measure_mode = v;
        }
        if let Some(v) = self.mu0_factor {
            c.mu0_factor = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if self.eta.is_some() {
            c.eta = self.eta;
        }
        if self.kappa_stop.is_some() {
            c.kappa_stop = self.kappa_stop;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::SymmetricCurve(o) => {
            for f in cmd_symmetric_curve(&o.resolve()?)? {
                println!("{}", f.display());
            }
        }
        Command::Branch(o) => {
            let run = cmd_branch(&o.resolve()?)?;
            let s = &run.branch.stats;
            println!(
                "{} points, {} steps, {} eta halvings, kappa0 = {}",
                run.branch.points.len(),
                s.steps,
                s.eta_halvings,
                run.branch.provenance.kappa0
            );
        }
        Command::Analyze(o) => {
            let report = cmd_analyze(&o.resolve()?)?;
            for t in &report.thetas {
                match &t.crossing {
                    CrossingOutcome::Found(c) => println!(
                        "theta {:.4}: Lambda1 = {:.6}, mu1* = {:.6}, mu1 = {:.6}",
                        t.theta, c.lambda1, c.mu1_star, c.mu1
                    ),
                    CrossingOutcome::None => println!("theta {:.4}: no crossing", t.theta),
                    CrossingOutcome::Ambiguous(all) => println!("theta {:.4}: {} crossings", t.theta, all.len()),
                }
            }
            println!(
                "J_inf = {:.6}, Lambda_GN = {:.6}",
                report.gn.j_inf, report.gn.threshold.lambda_gn
            );
        }
        Command::GnLimit(o) => {
            let (gn, _) = cmd_gn_limit(&o.resolve()?)?;
            println!(
                "Theta = {:.6}, J_inf = {:.8}, Lambda_GN = {:.8}",
                gn.big_theta, gn.j_inf, gn.threshold.lambda_gn
            );
        }
        Command::ReproduceFigures(o) => {
            let files = cmd_reproduce_figures(&o.resolve()?)?;
            println!("{} files written", files.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
