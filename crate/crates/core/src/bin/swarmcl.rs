fn main() -> std::process::ExitCode {
    swarmcl::cli::main()
}
