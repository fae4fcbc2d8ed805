fn main() {
    std::process::exit(dam_cli::dispatch(std::env::args_os()));
}
