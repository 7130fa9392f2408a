fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = onearm_cli::main_with_args(&args, &mut std::io::stdout());
    std::process::exit(code);
}
