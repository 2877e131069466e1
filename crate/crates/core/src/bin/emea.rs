fn main() {
    std::process::exit(emea::cli::dispatch(std::env::args_os()));
}
