use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status of a subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Input = 2,
    Generator = 3,
    Refinement = 4,
    Check = 5,
}

/// A failure that ends the run before a report could be produced.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { status: Status::Input, message: message.into() }
    }
}

impl From<loopfiber::Error> for Failure {
    fn from(e: loopfiber::Error) -> Self {
        let status = match e {
            loopfiber::Error::PhaseStepTooLarge { .. } => Status::Refinement,
            _ => Status::Input,
        };
        Self { status, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::input(e.to_string())
    }
}

pub struct Emitter {
    pub with_meta: bool,
    pub out: Option<PathBuf>,
}

impl Emitter {
    /// Adds `schema_version` and, unless suppressed, a `meta` section, then
    /// writes the report to `--out` (atomically) or stdout.
    pub fn report(&self, command: &str, mut body: Value) -> Result<(), Failure> {
        let obj = body.as_object_mut().expect("reports are JSON objects");
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        obj.insert("command".into(), json!(command));
        if self.with_meta {
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            obj.insert(
                "meta".into(),
                json!({
                    "version": env!("CARGO_PKG_VERSION"),
                    "timestamp": stamp,
                    "threads": threads(),
                }),
            );
        }
        let mut text = serde_json::to_string_pretty(&body).map_err(|e| Failure::input(e.to_string()))?;
        text.push('\n');
        match &self.out {
            Some(path) => write_atomic(path, text.as_bytes())?,
            None => io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn threads() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn threads() -> usize {
    1
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}
