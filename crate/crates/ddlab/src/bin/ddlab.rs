use clap::Parser;

fn main() {
    let args = match ddlab::cli::Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            // help/version go to stdout with exit 0; real parse failures are
            // usage errors
            let code = if e.use_stderr() { ddlab::cli::EXIT_USAGE } else { ddlab::cli::EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(ddlab::cli::run(&args));
}
