use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = uca_tool::Cli::parse();
    if let Err(e) = uca_tool::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
