//! Projects on disk, one directory per project:
//!
//! ```text
//! <data_dir>/projects/<project_id>/project.json   name, settings, dataset format
//! <data_dir>/projects/<project_id>/dataset        uploaded bytes, verbatim
//! <data_dir>/projects/<project_id>/state.tar      engine state
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_bytes, Dataset, SourceFormat};
use crate::engine::{load_state, save_state, AsyncProject, ProjectState, Settings};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub project_id: String,
    pub name: String,
    pub settings: Settings,
    pub dataset_format: Option<SourceFormat>,
}

/// Mutable part of a project. Lock order: registry, then slot, then engine.
pub struct Slot {
    pub meta: ProjectMeta,
    pub dataset: Option<Arc<Dataset>>,
    pub engine: Option<AsyncProject>,
}

pub struct Project {
    pub dir: PathBuf,
    slot: Mutex<Slot>,
}

impl Project {
    pub fn lock(&self) -> MutexGuard<'_, Slot> {
        self.slot.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Writes through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> String {
    format!("{}: {e}", path.display())
}

pub struct Store {
    root: PathBuf,
    projects: Mutex<BTreeMap<String, Arc<Project>>>,
}

impl Store {
    /// Opens the data directory and resumes every project found in it.
    pub fn open(data_dir: &Path) -> Result<Self, String> {
        let root = data_dir.join("projects");
        fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        let mut projects = BTreeMap::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(&root)
            .map_err(|e| io_error(&root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("project.json").is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let project = resume(&dir)?;
            let id = project.lock().meta.project_id.clone();
            projects.insert(id, Arc::new(project));
        }
        Ok(Store {
            root,
            projects: Mutex::new(projects),
        })
    }

    fn registry(&self) -> MutexGuard<'_, BTreeMap<String, Arc<Project>>> {
        self.projects.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn get(&self, id: &str) -> Option<Arc<Project>> {
        self.registry().get(id).cloned()
    }

    pub fn list(&self) -> Vec<Arc<Project>> {
        self.registry().values().cloned().collect()
    }

    pub fn create(&self, name: String, settings: Settings) -> Result<Arc<Project>, String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.root.join(&id);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let meta = ProjectMeta {
            project_id: id.clone(),
            name,
            settings,
            dataset_format: None,
        };
        save_meta(&dir, &meta)?;
        let project = Arc::new(Project {
            dir,
            slot: Mutex::new(Slot {
                meta,
                dataset: None,
                engine: None,
            }),
        });
        self.registry().insert(id, Arc::clone(&project));
        Ok(project)
    }
}

pub fn save_meta(dir: &Path, meta: &ProjectMeta) -> Result<(), String> {
    let path = dir.join("project.json");
    let mut bytes = serde_json::to_vec_pretty(meta).expect("metadata serializes");
    bytes.push(b'\n');
    write_atomic(&path, &bytes).map_err(|e| io_error(&path, e))
}

pub fn save_dataset(dir: &Path, bytes: &[u8]) -> Result<(), String> {
    let path = dir.join("dataset");
    write_atomic(&path, bytes).map_err(|e| io_error(&path, e))
}

/// Wraps a state in the asynchronous driver, persisting after every change.
pub fn drive(dir: &Path, state: ProjectState) -> AsyncProject {
    let path = dir.join("state.tar");
    AsyncProject::with_hook(state, move |s| {
        if let Err(e) = write_atomic(&path, &save_state(s)) {
            eprintln!("screenloop: cannot persist {}: {e}", path.display());
        }
    })
}

fn resume(dir: &Path) -> Result<Project, String> {
    let meta_path = dir.join("project.json");
    let meta: ProjectMeta = serde_json::from_slice(&fs::read(&meta_path).map_err(|e| io_error(&meta_path, e))?)
        .map_err(|e| io_error(&meta_path, e))?;
    let mut dataset = None;
    let mut engine = None;
    if let Some(format) = meta.dataset_format {
        let path = dir.join("dataset");
        let bytes = fs::read(&path).map_err(|e| io_error(&path, e))?;
        let ds = Arc::new(parse_bytes(&bytes, Some(format)).map_err(|e| io_error(&path, e))?);
        let state_path = dir.join("state.tar");
        if state_path.is_file() {
            let bytes = fs::read(&state_path).map_err(|e| io_error(&state_path, e))?;
            let state = load_state(&bytes, Arc::clone(&ds)).map_err(|e| io_error(&state_path, e))?;
            engine = Some(drive(dir, state));
        }
        dataset = Some(ds);
    }
    Ok(Project {
        dir: dir.to_path_buf(),
        slot: Mutex::new(Slot { meta, dataset, engine }),
    })
}
