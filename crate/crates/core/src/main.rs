fn main() {
    std::process::exit(cfgraph::cli::run(std::env::args_os()));
}
