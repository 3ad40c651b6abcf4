use std::process::ExitCode;

use cardiobif_cli::{exit_code, run};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            if code == 0 {
                // clap help/version output
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
