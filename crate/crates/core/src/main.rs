fn main() -> std::process::ExitCode {
    medianforge::cli::run(std::env::args_os())
}
