use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context as _;

pub mod decode;
pub mod evaluate;
pub mod featurize;
pub mod predict;
pub mod select;
pub mod serve;
pub mod simulate;
pub mod stats;
pub mod train;

pub struct Context {
    pub seed: u64,
    pub data_dir: PathBuf,
}

impl Context {
    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.data_dir.join(name)
    }

    /// `explicit` when given, otherwise `name` inside the data directory.
    pub fn path_or(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.path(name))
    }
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Write to stdout; a closed pipe (`| head`) is not an error.
pub fn stdout(contents: &str) -> anyhow::Result<()> {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    match out
        .write_all(contents.as_bytes())
        .and_then(|()| out.flush())
    {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
