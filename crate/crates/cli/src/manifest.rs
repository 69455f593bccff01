use crate::error::{CliError, CliResult};
use crate::ingest::Ingested;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Everything needed to reproduce an output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub input: Option<Ingested>,
    pub library_version: &'static str,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            input: None,
            library_version: env!("CARGO_PKG_VERSION"),
            seed: None,
            outputs: Vec::new(),
        }
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `contents` to `out` (stdout if `None`); with a file, also writes
/// the manifest next to it.
pub fn write_output(
    out: Option<&Path>,
    contents: &str,
    mut manifest: RunManifest,
) -> CliResult<()> {
    match out {
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
        Some(path) => {
            std::fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
            let mpath = manifest_path(path);
            manifest.outputs.push(path.display().to_string());
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            std::fs::write(&mpath, json + "\n").map_err(|e| CliError::io(&mpath, e))?;
            log::info!("wrote {} and {}", path.display(), mpath.display());
            Ok(())
        }
    }
}
