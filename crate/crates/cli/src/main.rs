fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRUSTWORK_LOG", "info")).init();
    std::process::exit(trustwork_cli::run(std::env::args_os()));
}
