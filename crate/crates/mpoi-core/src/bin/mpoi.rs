use clap::Parser;
use mpoi_core::cli::{exit_code, run, Cli, Command};
use mpoi_core::Error;

fn main() {
    let cli = Cli::parse();
    let is_robustness = matches!(cli.command, Command::Robustness { .. });
    match run(cli) {
        Ok(output) => {
            print!("{output}");
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_robustness {
                if let Error::NotDag(_) = e {
                    eprintln!(
                        "note: robustness guarantees require acyclic systems; \
                         see docs/scenario.md (cyclic systems)"
                    );
                }
            }
            std::process::exit(exit_code(&e));
        }
    }
}
