fn main() -> std::process::ExitCode {
    coop_relay::cli::run(std::env::args_os())
}
