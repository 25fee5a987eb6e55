//! Stage stamps. Each stage records a hash of its configuration and input
//! files next to its outputs; an unchanged hash with all outputs present
//! means the stage can be skipped.

use std::fs;
use std::path::{Path, PathBuf};

use sha1::{Digest, Sha1};

pub struct Stamp {
    path: PathBuf,
    key: String,
}

impl Stamp {
    /// `parts` are the configuration values the stage depends on; `inputs`
    /// are files whose content it reads.
    pub fn new(out: &Path, stage: &str, parts: &[String], inputs: &[PathBuf]) -> std::io::Result<Stamp> {
        let mut h = Sha1::new();
        h.update(stage.as_bytes());
        for p in parts {
            h.update(b"\0");
            h.update(p.as_bytes());
        }
        for i in inputs {
            h.update(b"\0");
            h.update(i.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default());
            h.update(b"\0");
            h.update(fs::read(i)?);
        }
        let key = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(Stamp {
            path: out.join(".stamps").join(stage),
            key,
        })
    }

    /// The summary recorded by the previous run, when nothing changed.
    pub fn fresh(&self, outputs: &[PathBuf]) -> Option<String> {
        let text = fs::read_to_string(&self.path).ok()?;
        let (key, summary) = text.split_once('\n')?;
        (key == self.key && outputs.iter().all(|o| o.exists())).then(|| summary.trim_end().to_string())
    }

    pub fn record(&self, summary: &str) -> std::io::Result<()> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&self.path, format!("{}\n{summary}\n", self.key))
    }

    pub fn clear(&self) {
        let _ = fs::remove_file(&self.path);
    }
}
