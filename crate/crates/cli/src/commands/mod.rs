//! One function per subcommand. Each fills the session summary and returns
//! the process exit code; errors become exit code 1 in `main`.

mod analysis;
mod check;
mod run;

use std::path::PathBuf;

pub use analysis::{af, oracle, spectrum};
pub use check::check;
pub use run::run;

use crate::config::RunConfig;
use crate::output::Summary;

pub struct Session {
    pub config: RunConfig,
    pub out: PathBuf,
    pub quiet: bool,
    pub summary: Summary,
}
