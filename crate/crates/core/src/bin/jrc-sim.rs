fn main() {
    std::process::exit(jrc_core::cli::run(std::env::args_os()));
}
