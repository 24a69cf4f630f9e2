fn main() {
    std::process::exit(site_lookahead::cli::main_from(std::env::args_os()));
}
