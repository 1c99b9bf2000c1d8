fn main() -> std::process::ExitCode {
    sparql_bridge::cli::main()
}
