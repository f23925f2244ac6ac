use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TOKENWISE_LOG"))
        .target(env_logger::Target::Stderr)
        .init();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = tokenwise::cli::run(std::env::args_os(), &mut out, &mut std::io::stderr());
    let _ = out.flush();
    std::process::exit(code);
}
