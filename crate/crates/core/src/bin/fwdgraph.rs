fn main() {
    std::process::exit(fwdgraph::cli::run(std::env::args_os()));
}
