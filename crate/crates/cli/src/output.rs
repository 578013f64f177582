//! Artifact files. Each table starts with a `#` preamble carrying the
//! version, seed, config hash and the full resolved configuration, so any
//! output file can be turned back into the run that made it.

use std::io::{self, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::config::Config;
use crate::CliError;

/// Prefix of the embedded configuration lines.
const CONFIG_PREFIX: &str = "# | ";

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn preamble(cfg: &Config) -> String {
    let mut s = format!(
        "# decaybound {}\n# command = {}\n# seed = {}\n# config-hash = {}\n# config:\n",
        env!("CARGO_PKG_VERSION"),
        cfg.command,
        cfg.seed,
        cfg.hash()
    );
    for line in cfg.to_toml().lines() {
        s.push_str(CONFIG_PREFIX.trim_end());
        if !line.is_empty() {
            s.push(' ');
            s.push_str(line);
        }
        s.push('\n');
    }
    s
}

/// The configuration embedded in an output file's preamble.
pub fn embedded_config(text: &str) -> Option<String> {
    let marker = CONFIG_PREFIX.trim_end();
    let mut out = String::new();
    let mut found = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(marker) {
            found = true;
            out.push_str(rest.strip_prefix(' ').unwrap_or(rest));
            out.push('\n');
        }
    }
    found.then_some(out)
}

/// Collects the files of one run under `dir`.
pub struct Artifacts<'a> {
    dir: &'a Path,
    cfg: &'a Config,
    pub outcome: crate::Outcome,
}

impl<'a> Artifacts<'a> {
    pub fn new(dir: &'a Path, cfg: &'a Config) -> Self {
        Artifacts {
            dir,
            cfg,
            outcome: crate::Outcome::default(),
        }
    }

    /// Preamble, `extra` comment lines, then the body.
    pub fn table(
        &mut self,
        name: &str,
        extra: &[String],
        body: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let mut buf = preamble(self.cfg).into_bytes();
        for line in extra {
            writeln!(buf, "# {line}")?;
        }
        body(&mut buf)?;
        self.save(name, &buf)
    }

    /// The resolved configuration as a standalone, rerunnable file.
    pub fn run_toml(&mut self) -> Result<(), CliError> {
        let text = self.cfg.to_toml();
        self.save("run.toml", text.as_bytes())
    }

    pub fn say(&mut self, msg: String) {
        self.outcome.messages.push(msg);
    }

    fn save(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.outcome.files.push(path);
        Ok(())
    }

    pub fn finish(self) -> crate::Outcome {
        self.outcome
    }
}
