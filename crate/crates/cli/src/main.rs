fn main() {
    std::process::exit(resil_cli::args::run(std::env::args_os().collect()));
}
