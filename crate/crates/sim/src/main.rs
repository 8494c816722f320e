fn main() {
    std::process::exit(wigig_radar::cli::run_cli(std::env::args_os()));
}
