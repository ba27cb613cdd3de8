//! Append-only JSON-lines event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Dashboard, HistoryEntry};
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        database_id: String,
        created_at: String,
    },
    EntryAppended {
        session_id: String,
        entry: Box<HistoryEntry>,
    },
    DashboardSaved {
        dashboard: Dashboard,
    },
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

fn io_error(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

impl EventLog {
    /// Opens (creating if needed) the log and returns it with its events.
    ///
    /// A torn final line, left by a crash mid-write, is dropped and truncated
    /// away; a malformed line elsewhere is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<(EventLog, Vec<Event>), ServiceError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        let mut events = Vec::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| io_error(&path, e))?);
            let lines: Vec<String> = reader
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| io_error(&path, e))?;
            let count = lines.len();
            for (i, line) in lines.into_iter().enumerate() {
                if line.trim().is_empty() {
                    valid_len += line.len() as u64 + 1;
                    continue;
                }
                match serde_json::from_str::<Event>(&line) {
                    Ok(ev) => {
                        events.push(ev);
                        valid_len += line.len() as u64 + 1;
                    }
                    Err(_) if i + 1 == count => break,
                    Err(e) => {
                        return Err(ServiceError::Storage(format!(
                            "{} line {}: {e}",
                            path.display(),
                            i + 1
                        )))
                    }
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_error(&path, e))?;
        let len = file.metadata().map_err(|e| io_error(&path, e))?.len();
        if valid_len < len {
            file.set_len(valid_len).map_err(|e| io_error(&path, e))?;
        } else if valid_len > len {
            file.write_all(b"\n").map_err(|e| io_error(&path, e))?;
        }
        Ok((EventLog { path, file }, events))
    }

    /// Writes one event and flushes it to disk before returning.
    pub fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line =
            serde_json::to_string(event).map_err(|e| ServiceError::Storage(e.to_string()))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| io_error(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
