fn main() {
    let code = osc::cli::run(std::env::args_os());
    std::process::exit(code as i32);
}
