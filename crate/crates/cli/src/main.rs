fn main() {
    std::process::exit(achronal_cli::main_with_args(std::env::args_os()) as i32);
}
