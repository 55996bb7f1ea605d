//! Uniform read access to an application bundle, whether it is an extracted
//! directory or an `asar` archive held in memory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::asar::{self, compare_paths, ArchiveIndex, AsarError, EntryKind, NotFoundReason};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Asar(#[from] AsarError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read-only view over the files of a bundle. Paths are slash separated and
/// relative to the bundle root; `""` is the root itself.
pub trait BundleSource: Sync {
    /// Contents of a regular file, or `None` when there is no such file.
    fn read(&self, path: &str) -> Result<Option<Vec<u8>>, BundleError>;
    /// Names of the immediate subdirectories of `path`, sorted.
    fn subdirs(&self, path: &str) -> Result<Vec<String>, BundleError>;
    /// Every regular file in the bundle, in listing order.
    fn files(&self) -> Result<Vec<String>, BundleError>;
}

pub(crate) fn join(base: &str, rel: &str) -> String {
    if base.is_empty() {
        rel.to_owned()
    } else {
        format!("{base}/{rel}")
    }
}

#[derive(Debug, Clone)]
pub struct DirBundle {
    root: PathBuf,
}

impl DirBundle {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirBundle { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let mut p = self.root.clone();
        p.extend(path.split('/').filter(|s| !s.is_empty()));
        p
    }

    fn collect(&self, rel: &str, out: &mut Vec<String>) -> Result<(), BundleError> {
        let dir = self.resolve(rel);
        for item in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let item = item.map_err(io_err(&dir))?;
            let Ok(name) = item.file_name().into_string() else {
                log::warn!("skipping non-UTF-8 name in {}", dir.display());
                continue;
            };
            let child = join(rel, &name);
            let ft = item.file_type().map_err(io_err(&dir))?;
            if ft.is_dir() {
                self.collect(&child, out)?;
            } else if ft.is_file() {
                out.push(child);
            } else {
                log::warn!("skipping non-regular file {child}");
            }
        }
        Ok(())
    }
}

impl BundleSource for DirBundle {
    fn read(&self, path: &str) -> Result<Option<Vec<u8>>, BundleError> {
        let p = self.resolve(path);
        match fs::symlink_metadata(&p) {
            Ok(m) if m.is_file() => fs::read(&p).map(Some).map_err(io_err(&p)),
            Ok(_) => Ok(None),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&p)(e)),
        }
    }

    fn subdirs(&self, path: &str) -> Result<Vec<String>, BundleError> {
        let dir = self.resolve(path);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&dir)(e)),
        };
        let mut names = Vec::new();
        for item in entries {
            let item = item.map_err(io_err(&dir))?;
            if item.file_type().map_err(io_err(&dir))?.is_dir() {
                if let Ok(name) = item.file_name().into_string() {
                    names.push(name);
                }
            }
        }
        names.sort_unstable();
        Ok(names)
    }

    fn files(&self) -> Result<Vec<String>, BundleError> {
        let mut out = Vec::new();
        self.collect("", &mut out)?;
        out.sort_unstable_by(|a, b| compare_paths(a, b));
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ArchiveBundle {
    bytes: Vec<u8>,
    index: ArchiveIndex,
}

impl ArchiveBundle {
    pub fn new(bytes: Vec<u8>) -> Result<Self, AsarError> {
        let index = asar::parse_header(&bytes)?;
        Ok(ArchiveBundle { bytes, index })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn index(&self) -> &ArchiveIndex {
        &self.index
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

impl BundleSource for ArchiveBundle {
    fn read(&self, path: &str) -> Result<Option<Vec<u8>>, BundleError> {
        match self.index.read(&self.bytes, path) {
            Ok(b) => Ok(Some(b.to_vec())),
            Err(AsarError::NotFound {
                reason: NotFoundReason::Missing | NotFoundReason::NotAFile,
                ..
            }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn subdirs(&self, path: &str) -> Result<Vec<String>, BundleError> {
        let prefix = if path.is_empty() {
            String::new()
        } else {
            format!("{path}/")
        };
        let mut names: Vec<String> = self
            .index
            .entries
            .iter()
            .filter(|e| e.kind == EntryKind::Directory)
            .filter_map(|e| e.path.strip_prefix(prefix.as_str()))
            .filter(|rest| !rest.contains('/'))
            .map(str::to_owned)
            .collect();
        names.sort_unstable();
        Ok(names)
    }

    fn files(&self) -> Result<Vec<String>, BundleError> {
        Ok(self
            .index
            .files()
            .filter(|e| !e.unpacked)
            .map(|e| e.path.clone())
            .collect())
    }
}

/// A bundle opened from disk: a directory is read in place, a regular file
/// is treated as an `asar` archive.
#[derive(Debug, Clone)]
pub enum Bundle {
    Dir(DirBundle),
    Archive(ArchiveBundle),
}

impl Bundle {
    pub fn open(path: &Path) -> Result<Self, BundleError> {
        let meta = fs::metadata(path).map_err(io_err(path))?;
        if meta.is_dir() {
            Ok(Bundle::Dir(DirBundle::new(path)))
        } else {
            let bytes = fs::read(path).map_err(io_err(path))?;
            Ok(Bundle::Archive(ArchiveBundle::new(bytes)?))
        }
    }

    fn inner(&self) -> &dyn BundleSource {
        match self {
            Bundle::Dir(d) => d,
            Bundle::Archive(a) => a,
        }
    }
}

impl BundleSource for Bundle {
    fn read(&self, path: &str) -> Result<Option<Vec<u8>>, BundleError> {
        self.inner().read(path)
    }

    fn subdirs(&self, path: &str) -> Result<Vec<String>, BundleError> {
        self.inner().subdirs(path)
    }

    fn files(&self) -> Result<Vec<String>, BundleError> {
        self.inner().files()
    }
}
