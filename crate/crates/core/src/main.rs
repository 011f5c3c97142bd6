use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match voa_core::cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            e.report();
            ExitCode::from(code as u8)
        }
    }
}
