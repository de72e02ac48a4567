fn main() {
    std::process::exit(vexp::execute(std::env::args_os()));
}
