use clap::Parser;
use prodisp_cli::cli::Cli;

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let out = cli.run()?;
    println!("{}", out.display());
    Ok(())
}
