fn main() {
    std::process::exit(zildp::cli::run(std::env::args_os()));
}
