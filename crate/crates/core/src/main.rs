fn main() {
    std::process::exit(medalrank::cli::run(std::env::args_os()));
}
