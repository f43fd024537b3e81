fn main() {
    std::process::exit(nml::app::run(std::env::args_os()));
}
