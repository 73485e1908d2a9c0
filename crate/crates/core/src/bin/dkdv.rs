fn main() {
    std::process::exit(dkdv_core::cli::dispatch(std::env::args_os()));
}
