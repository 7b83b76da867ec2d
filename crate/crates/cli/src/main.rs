use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cwd = match std::env::current_dir() {
        Ok(dir) => dir,
        Err(e) => {
            eprintln!("error: cannot read the current directory: {e}");
            return ExitCode::from(t4p::EXIT_ENV as u8);
        }
    };
    let code = t4p::run_cli(
        std::env::args_os(),
        &cwd,
        &t4p::registry_root(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
