fn main() {
    std::process::exit(qsig::cli::run(std::env::args_os()));
}
