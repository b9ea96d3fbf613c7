use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let ctx = kgground_cli::Context::from_process();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = kgground_cli::run(std::env::args_os(), &ctx, &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
