use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rydcount_core::instance::BlockadeGraph;

use crate::error::CliError;

pub const TOOL: &str = "rydcount";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub name: String,
    pub n: usize,
    /// `sha256:` over the compact instance JSON.
    pub digest: String,
    pub graph: serde_json::Value,
}

impl InstanceInfo {
    pub fn new(name: &str, g: &BlockadeGraph) -> Self {
        let json = g.to_json();
        Self {
            name: name.to_string(),
            n: g.n(),
            digest: digest(json.as_bytes()),
            graph: serde_json::from_str(&json).expect("instance json is valid"),
        }
    }

    pub fn graph(&self) -> Result<BlockadeGraph, CliError> {
        let g = BlockadeGraph::from_json(&self.graph.to_string())?;
        if digest(g.to_json().as_bytes()) != self.digest {
            return Err(CliError::Usage(format!(
                "instance \"{}\" does not match its recorded digest",
                self.name
            )));
        }
        Ok(g)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Everything needed to rerun a command and the outputs it produced.
/// Wall-clock timings are kept out so that reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub instances: Vec<InstanceInfo>,
    pub outputs: serde_json::Value,
}

impl ExperimentRecord {
    pub fn new(
        command: &str,
        seed: u64,
        config: serde_json::Value,
        instances: Vec<InstanceInfo>,
        outputs: serde_json::Value,
    ) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            config,
            instances,
            outputs,
        }
    }

    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

/// Writes `contents` to `path` via a temporary file in the same directory
/// and a rename, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(contents.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::Io("stdout".into(), e))?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e| CliError::Io(path.display().to_string(), e);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
