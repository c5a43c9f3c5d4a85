use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use certplan::harness::{run_scenario, verify_artifact, RunArtifact};
use certplan::render::{render_svg, FigureKind};
use certplan::scenario::parse_scenario;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "certplan", version, about = "Certified data-driven RRT planning on a grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan, execute and write artifacts for a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Re-verify every certificate stored in a run artifact.
    Verify { artifact: PathBuf },
    /// Render one figure of a run artifact as SVG.
    Render {
        artifact: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Trees,
    Ellipses,
    Paths,
    Executed,
}

impl From<Kind> for FigureKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Trees => Self::Trees,
            Kind::Ellipses => Self::Ellipses,
            Kind::Paths => Self::Paths,
            Kind::Executed => Self::Executed,
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { scenario, output } => {
            let text = fs::read_to_string(&scenario).map_err(|e| format!("{}: {e}", scenario.display()))?;
            let s = parse_scenario(&text)?;
            let art = run_scenario(&s, &output)?;
            let summary = art.summary();
            for a in &summary.agents {
                print!(
                    "{}: {} edges, certified {:.1}% ({:?})",
                    a.name, a.edges, a.certified.stats.percent, a.certified.outcome
                );
                match &a.lqr {
                    Some(l) => println!(", lqr {:.1}% ({:?})", l.stats.percent, l.outcome),
                    None => println!(),
                }
            }
            println!("artifacts written to {}", output.display());
            Ok(if art.aborted() { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Verify { artifact } => {
            let art = RunArtifact::load(&artifact)?;
            let checks = verify_artifact(&art);
            let failed: Vec<_> = checks.iter().filter(|c| !c.report.pass).collect();
            for c in &failed {
                let edge = c.edge.map_or("start".to_string(), |l| format!("edge {l}"));
                println!("FAIL {} {edge}: {:?}", c.agent, c.report);
            }
            println!("{} of {} certificates verified", checks.len() - failed.len(), checks.len());
            Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Render { artifact, kind, output } => {
            let art = RunArtifact::load(&artifact)?;
            let svg = render_svg(&art, kind.into())?;
            match output {
                Some(path) => fs::write(&path, svg).map_err(|e| format!("{}: {e}", path.display()))?,
                None => print!("{svg}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
