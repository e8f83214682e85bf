fn main() {
    std::process::exit(pixelcode::harness::cli_dispatch(std::env::args_os()));
}
