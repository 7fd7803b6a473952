use clap::Parser;

fn main() {
    let cli = match doeblin_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                doeblin_cli::exit::USAGE
            } else {
                0
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(doeblin_cli::run(cli));
}
