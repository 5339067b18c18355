//! Command-line front end: graph sampling, structural analysis, SNR
//! prediction and estimation, block-resampling rewiring, and benchmark
//! sweeps. Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;
mod report;
mod svg;

use clap::Parser;

use commands::Cli;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::expand_config_args(argv) {
        Ok(v) => v,
        Err(err) => {
            eprintln!("config error: {err:#}");
            std::process::exit(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(err) => {
            // clap handles help/version; usage errors exit 2
            err.exit();
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            let code = exit_code_for(&err);
            eprintln!("error: {err:#}");
            std::process::exit(code);
        }
    }
}

/// 2 = config error, 3 = data error, 4 = numerical failure.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    use graph_snr::Error as E;
    if let Some(core) = err.downcast_ref::<E>() {
        return match core {
            E::Parse { .. }
            | E::Io(_)
            | E::NodeOutOfRange { .. }
            | E::LabelLengthMismatch { .. }
            | E::FeatureRowMismatch { .. }
            | E::LabelOutOfRange { .. } => 3,
            E::Divergence { .. }
            | E::DegenerateDegree { .. }
            | E::ProbabilityOverflow { .. }
            | E::UnreachableClassPair { .. }
            | E::ZeroNoiseVariance => 4,
            _ => 2,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    2
}
