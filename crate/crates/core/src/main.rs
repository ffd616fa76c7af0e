fn main() {
    std::process::exit(fusesep::cli::run(std::env::args_os()));
}
