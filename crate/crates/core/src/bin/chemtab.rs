fn main() -> std::process::ExitCode {
    chemtab::cli::main(std::env::args_os())
}
