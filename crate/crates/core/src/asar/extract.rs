use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{io_err, parse_header, AsarError, EntryKind, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ExtractReport {
    pub files_written: u64,
    pub bytes_written: u64,
}

/// Write every packed file of `archive` below `dest_dir`.
///
/// The whole header is validated before the first write. Existing symbolic
/// links inside `dest_dir` are never followed.
pub fn extract(archive: &[u8], dest_dir: &Path) -> Result<ExtractReport> {
    let index = parse_header(archive)?;
    fs::create_dir_all(dest_dir).map_err(io_err(dest_dir))?;

    let mut report = ExtractReport::default();
    for entry in &index.entries {
        let target = confined_path(dest_dir, &entry.path)?;
        match entry.kind {
            EntryKind::Directory => match fs::symlink_metadata(&target) {
                Ok(m) if m.is_dir() => {}
                Ok(_) => return Err(AsarError::UnsafePath(entry.path.clone())),
                Err(e) if e.kind() == io::ErrorKind::NotFound => fs::create_dir(&target).map_err(io_err(&target))?,
                Err(e) => return Err(io_err(&target)(e)),
            },
            EntryKind::File if entry.unpacked => {
                log::warn!("{}: stored unpacked, not extracted", entry.path);
            }
            EntryKind::File => {
                let bytes = index.read(archive, &entry.path)?;
                if let Ok(m) = fs::symlink_metadata(&target) {
                    if !m.is_file() {
                        return Err(AsarError::UnsafePath(entry.path.clone()));
                    }
                }
                fs::write(&target, bytes).map_err(io_err(&target))?;
                if entry.executable {
                    set_executable(&target)?;
                }
                report.files_written += 1;
                report.bytes_written += bytes.len() as u64;
            }
        }
    }
    Ok(report)
}

/// Join a validated entry path onto `root`, refusing any intermediate
/// component that already exists as something other than a real directory.
fn confined_path(root: &Path, rel: &str) -> Result<PathBuf> {
    let mut path = root.to_path_buf();
    let segments: Vec<&str> = rel.split('/').collect();
    for (i, seg) in segments.iter().enumerate() {
        if !super::check_segment(seg) {
            return Err(AsarError::UnsafePath(rel.to_owned()));
        }
        path.push(seg);
        if i + 1 < segments.len() {
            match fs::symlink_metadata(&path) {
                Ok(m) if m.is_dir() => {}
                Ok(_) => return Err(AsarError::UnsafePath(rel.to_owned())),
                Err(_) => {}
            }
        }
    }
    Ok(path)
}

#[cfg(unix)]
fn set_executable(path: &Path) -> Result<()> {
    use std::os::unix::fs::PermissionsExt;
    let mut perms = fs::metadata(path).map_err(io_err(path))?.permissions();
    perms.set_mode(perms.mode() | 0o111);
    fs::set_permissions(path, perms).map_err(io_err(path))
}

#[cfg(not(unix))]
fn set_executable(_path: &Path) -> Result<()> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asar::testutil::raw_archive;

    fn count_nodes(dir: &Path) -> usize {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                1 + if e.file_type().unwrap().is_dir() {
                    count_nodes(&e.path())
                } else {
                    0
                }
            })
            .sum()
    }

    #[test]
    fn traversal_refused_before_writing() {
        let outer = tempfile::tempdir().unwrap();
        let dest = outer.path().join("dest");
        let a = raw_archive(
            r#"{"files":{"a":{"size":1,"offset":"0"},"..":{"files":{"evil":{"size":1,"offset":"1"}}}}}"#,
            b"xy",
        );
        assert!(matches!(extract(&a, &dest), Err(AsarError::UnsafePath(_))));
        assert!(!dest.exists());
        assert_eq!(count_nodes(outer.path()), 0);
    }

    #[cfg(unix)]
    #[test]
    fn preexisting_symlink_not_followed() {
        let outer = tempfile::tempdir().unwrap();
        let dest = outer.path().join("dest");
        let elsewhere = outer.path().join("elsewhere");
        fs::create_dir_all(&dest).unwrap();
        fs::create_dir_all(&elsewhere).unwrap();
        std::os::unix::fs::symlink(&elsewhere, dest.join("sub")).unwrap();
        let a = raw_archive(r#"{"files":{"sub":{"files":{"f":{"size":1,"offset":"0"}}}}}"#, b"x");
        assert!(matches!(extract(&a, &dest), Err(AsarError::UnsafePath(_))));
        assert_eq!(count_nodes(&elsewhere), 0);
    }

    #[test]
    fn writes_files() {
        let dest = tempfile::tempdir().unwrap();
        let a = raw_archive(r#"{"files":{"a.txt":{"size":1,"offset":"0"}}}"#, b"x");
        let report = extract(&a, dest.path()).unwrap();
        assert_eq!(
            report,
            ExtractReport {
                files_written: 1,
                bytes_written: 1
            }
        );
        assert_eq!(fs::read(dest.path().join("a.txt")).unwrap(), b"x");
    }
}
