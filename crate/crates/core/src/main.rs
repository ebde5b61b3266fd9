fn main() {
    std::process::exit(sitelogic::frontend::cli::run(std::env::args_os()));
}
