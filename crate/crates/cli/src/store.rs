//! Append-only JSON-lines persistence, one file per session.
//!
//! The first line holds the configuration, each further line one recorded
//! result. Loading replays the results through the engine.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::session::{Session, SessionConfig};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Entry {
    Created {
        id: String,
        config: SessionConfig,
    },
    Result {
        group: Vec<usize>,
        outcome: bool,
        #[serde(rename = "override")]
        overridden: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn append(file: &mut File, entry: &Entry) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.sync_data()
    }

    pub fn create(&self, session: &Session) -> std::io::Result<()> {
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path(session.id()))?;
        Self::append(
            &mut f,
            &Entry::Created {
                id: session.id().to_string(),
                config: session.config().clone(),
            },
        )
    }

    pub fn append_result(
        &self,
        id: &str,
        group: &[usize],
        outcome: bool,
        overridden: bool,
    ) -> std::io::Result<()> {
        let mut f = OpenOptions::new().append(true).open(self.path(id))?;
        Self::append(
            &mut f,
            &Entry::Result {
                group: group.to_vec(),
                outcome,
                overridden,
            },
        )
    }

    pub fn delete(&self, id: &str) -> std::io::Result<()> {
        match fs::remove_file(self.path(id)) {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            r => r,
        }
    }

    /// Rebuilds every stored session, in file-name order. Unreadable files are
    /// skipped with a warning; a torn final line is ignored.
    pub fn load_all(&self) -> std::io::Result<Vec<Session>> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = Vec::new();
        for p in paths {
            match load_one(&p) {
                Ok(s) => sessions.push(s),
                Err(e) => tracing::warn!(path = %p.display(), error = %e, "skipping session file"),
            }
        }
        Ok(sessions)
    }
}

fn load_one(path: &Path) -> anyhow::Result<Session> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut session: Option<Session> = None;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: Entry = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(e) if i + 1 == lines.len() && session.is_some() => {
                tracing::warn!(path = %path.display(), error = %e, "ignoring torn last line");
                break;
            }
            Err(e) => anyhow::bail!("line {}: {e}", i + 1),
        };
        match (entry, session.as_mut()) {
            (Entry::Created { id, config }, None) => session = Some(Session::new(id, config)?),
            (
                Entry::Result {
                    group,
                    outcome,
                    overridden,
                },
                Some(s),
            ) => {
                s.replay(&group, outcome, overridden)?;
            }
            _ => anyhow::bail!("line {}: unexpected entry", i + 1),
        }
    }
    session.ok_or_else(|| anyhow::anyhow!("empty session file"))
}
