fn main() {
    std::process::exit(segvote::cli::dispatch(std::env::args_os()));
}
