fn main() {
    std::process::exit(ctt_core::cli::run(std::env::args_os()));
}
