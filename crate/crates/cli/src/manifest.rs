//! Per-stage run manifests. `manifest.json` is fully determined by the
//! config and inputs; wall-clock data goes to `timings.json` beside it.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    /// Input file → SHA-256. Upstream stages appear as their manifests.
    pub inputs: BTreeMap<String, String>,
    /// File name within the stage directory → digest.
    pub artifacts: BTreeMap<String, Artifact>,
}

#[derive(Debug, Serialize)]
struct Timings {
    stage: String,
    started_unix_ms: u128,
    elapsed_ms: u128,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok((format!("{:x}", hasher.finalize()), bytes))
}

impl Manifest {
    /// Hashes every file in `dir` except the manifest and timings.
    pub fn collect(stage: &str, config_hash: &str, inputs: BTreeMap<String, String>, dir: &Path) -> Result<Self> {
        let mut artifacts = BTreeMap::new();
        for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == MANIFEST || name == TIMINGS || !entry.file_type()?.is_file() {
                continue;
            }
            let (sha256, bytes) = sha256_file(&entry.path())?;
            artifacts.insert(name, Artifact { sha256, bytes });
        }
        Ok(Manifest {
            format_version: FORMAT_VERSION,
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            inputs,
            artifacts,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// True when every recorded artifact is still on disk with the same digest.
    pub fn artifacts_intact(&self, dir: &Path) -> bool {
        self.artifacts.iter().all(|(name, a)| {
            sha256_file(&dir.join(name)).is_ok_and(|(sha, bytes)| sha == a.sha256 && bytes == a.bytes)
        })
    }
}

pub fn write_timings(dir: &Path, stage: &str, started: SystemTime, elapsed: Duration) -> Result<()> {
    let timings = Timings {
        stage: stage.to_string(),
        started_unix_ms: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
        elapsed_ms: elapsed.as_millis(),
    };
    std::fs::write(dir.join(TIMINGS), serde_json::to_string_pretty(&timings)? + "\n")?;
    Ok(())
}
