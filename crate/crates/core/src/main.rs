fn main() {
    std::process::exit(reenact::release::cli(std::env::args_os()));
}
