fn main() {
    std::process::exit(spectral_nns::cli::run(std::env::args_os()));
}
