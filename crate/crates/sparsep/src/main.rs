fn main() {
    std::process::exit(sparsep::cli::run(std::env::args_os()));
}
