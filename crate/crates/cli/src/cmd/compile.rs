//! `flowforge compile`: dtm-1 model to P4 pipeline text.

use std::path::PathBuf;

use flowforge_core::nids::compile_to_p4;

use crate::config::Settings;
use crate::CliError;

use super::{load_model_file, write_out, Overrides};

#[derive(Debug, clap::Args)]
pub struct CompileArgs {
    /// dtm-1 model to compile.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Write the P4 text here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run(args: &CompileArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let model = load_model_file(&args.model)?;
    let p4 = compile_to_p4(&model, settings.feature_mask)
        .map_err(|e| CliError::Usage(format!("--feature-mask: {e}")))?;
    write_out(args.out.as_deref(), &p4)
}
