fn main() {
    std::process::exit(advlab::cli::dispatch(std::env::args_os()));
}
