use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{resolve_entry_point, root_manifest, IntegrityError};
use crate::asar::{self, AsarError};
use crate::bundle::{ArchiveBundle, DirBundle};
use crate::package::PackageManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionStep {
    Extract,
    ReadMain,
    DropModule,
    PrependRequire,
    Repack,
    Cleanup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InjectionRecord {
    pub app_name: String,
    pub entry_point: String,
    pub payload_name: String,
    /// Size of the modified archive minus size of the original.
    pub bytes_added: i64,
    pub steps: Vec<InjectionStep>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IntegrityError + '_ {
    move |source| IntegrityError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Test harness: plant `payload_dir` as `node_modules/<payload_name>` in a
/// fixture archive and make the entry file require it first thing. The
/// input bytes are not touched; the modified archive is returned.
///
/// Refuses bundles whose root manifest lacks `"x-audit-fixture": true`.
pub fn inject_fixture(
    archive: &[u8],
    payload_dir: &Path,
    payload_name: &str,
) -> Result<(Vec<u8>, InjectionRecord), IntegrityError> {
    let bundle = ArchiveBundle::new(archive.to_vec())?;
    let manifest = root_manifest(&bundle)?;
    if !manifest.fixture_marker {
        return Err(IntegrityError::NotAFixture);
    }
    let payload_manifest_path = payload_dir.join("package.json");
    let payload_manifest = fs::read(&payload_manifest_path).map_err(io_err(&payload_manifest_path))?;
    let payload_manifest = PackageManifest::parse(&payload_manifest, "")
        .map_err(|e| IntegrityError::InvalidPayload(format!("package.json: {e}")))?;
    if payload_manifest.name != payload_name {
        return Err(IntegrityError::PayloadMismatch {
            expected: payload_name.to_owned(),
            found: payload_manifest.name,
        });
    }

    let mut steps = Vec::new();
    let work = tempfile::tempdir().map_err(io_err(Path::new("<tempdir>")))?;
    let root = work.path().join("app");
    asar::extract(archive, &root)?;
    steps.push(InjectionStep::Extract);

    let entry_point = resolve_entry_point(&DirBundle::new(&root), &manifest)?;
    let entry_path = root.join(&entry_point);
    let original = fs::read(&entry_path).map_err(io_err(&entry_path))?;
    steps.push(InjectionStep::ReadMain);

    let require_line = format!("require('{payload_name}');\n");
    let module_dir = root.join("node_modules").join(payload_name);
    if original.starts_with(require_line.as_bytes()) || module_dir.exists() {
        return Err(IntegrityError::AlreadyInjected(payload_name.to_owned()));
    }
    copy_tree(payload_dir, &module_dir)?;
    steps.push(InjectionStep::DropModule);

    let mut patched = require_line.into_bytes();
    patched.extend_from_slice(&original);
    fs::write(&entry_path, patched).map_err(io_err(&entry_path))?;
    steps.push(InjectionStep::PrependRequire);

    let repacked = asar::pack(&root, true)?;
    steps.push(InjectionStep::Repack);

    work.close().map_err(io_err(Path::new("<tempdir>")))?;
    steps.push(InjectionStep::Cleanup);

    let record = InjectionRecord {
        app_name: manifest.name,
        entry_point,
        payload_name: payload_name.to_owned(),
        bytes_added: repacked.len() as i64 - archive.len() as i64,
        steps,
    };
    Ok((repacked, record))
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), IntegrityError> {
    fs::create_dir_all(to).map_err(io_err(to))?;
    for item in fs::read_dir(from).map_err(io_err(from))? {
        let item = item.map_err(io_err(from))?;
        let src = item.path();
        let dst = to.join(item.file_name());
        let ft = fs::symlink_metadata(&src).map_err(io_err(&src))?.file_type();
        if ft.is_symlink() {
            return Err(AsarError::SymlinkRefused(src).into());
        } else if ft.is_dir() {
            copy_tree(&src, &dst)?;
        } else {
            fs::copy(&src, &dst).map_err(io_err(&src))?;
        }
    }
    Ok(())
}
