use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use super::releases::{emit_releases, parse_releases, ReleaseEntry, ReleasesFile};
use super::{io_err, UpdateError};
use crate::bundle::{BundleSource, DirBundle};
use crate::package::{parse_version, SemVer};

/// Where application files live inside a package.
pub const PAYLOAD_DIR: &str = "lib/net45/";
/// Detached manifest published next to a package as `<file>` + this suffix.
pub const SIGNATURE_SUFFIX: &str = ".manifest.json";

const NUSPEC_NS: &str = "http://schemas.microsoft.com/packaging/2010/07/nuspec.xsd";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackageMetadata {
    pub id: String,
    pub version: SemVer,
    pub title: String,
    pub authors: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename = "package")]
struct Nuspec {
    #[serde(rename = "@xmlns", default)]
    xmlns: String,
    metadata: NuspecMetadata,
}

#[derive(Serialize, Deserialize)]
struct NuspecMetadata {
    id: String,
    version: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    authors: String,
    #[serde(default)]
    description: String,
}

#[derive(Debug, Clone)]
pub struct UpdatePackage {
    /// `<id>-<version>-full.nupkg`
    pub filename: String,
    pub metadata: PackageMetadata,
    pub bytes: Vec<u8>,
}

impl UpdatePackage {
    pub fn release_entry(&self) -> ReleaseEntry {
        ReleaseEntry::for_package(&self.filename, &self.bytes)
    }

    pub fn signature_manifest(&self) -> Vec<u8> {
        signature_manifest(&self.filename, &self.bytes)
    }
}

/// Zip the tree at `app_dir` into a full package. The output depends only on
/// the file names, contents, executable bits and `metadata`: entries are
/// sorted and every timestamp is 1980-01-01.
pub fn build_full_package(app_dir: &Path, metadata: &PackageMetadata) -> Result<UpdatePackage, UpdateError> {
    if !app_dir.is_dir() {
        return Err(io_err(app_dir)(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "application directory does not exist",
        )));
    }
    let source = DirBundle::new(app_dir);
    let mut entries: BTreeMap<String, (Vec<u8>, bool)> = BTreeMap::new();
    for rel in source.files().map_err(|e| UpdateError::InvalidPackage(e.to_string()))? {
        let bytes = source
            .read(&rel)
            .map_err(|e| UpdateError::InvalidPackage(e.to_string()))?
            .unwrap_or_default();
        let exec = is_executable(&app_dir.join(&rel));
        entries.insert(format!("{PAYLOAD_DIR}{rel}"), (bytes, exec));
    }
    let nuspec = Nuspec {
        xmlns: NUSPEC_NS.to_owned(),
        metadata: NuspecMetadata {
            id: metadata.id.clone(),
            version: metadata.version.to_string(),
            title: metadata.title.clone(),
            authors: metadata.authors.clone(),
            description: metadata.title.clone(),
        },
    };
    let xml = quick_xml::se::to_string(&nuspec).map_err(|e| UpdateError::InvalidPackage(e.to_string()))?;
    entries.insert(
        format!("{}.nuspec", metadata.id),
        (
            format!("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n{xml}\n").into_bytes(),
            false,
        ),
    );

    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let base = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(DateTime::default());
    for (name, (bytes, exec)) in &entries {
        let opts = base.unix_permissions(if *exec { 0o755 } else { 0o644 });
        zip.start_file(name.as_str(), opts).map_err(zip_err)?;
        zip.write_all(bytes).map_err(|e| UpdateError::Zip(e.to_string()))?;
    }
    let bytes = zip.finish().map_err(zip_err)?.into_inner();
    Ok(UpdatePackage {
        filename: format!("{}-{}-full.nupkg", metadata.id, metadata.version),
        metadata: metadata.clone(),
        bytes,
    })
}

#[cfg(unix)]
fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    fs::metadata(path).is_ok_and(|m| m.permissions().mode() & 0o111 != 0)
}

#[cfg(not(unix))]
fn is_executable(_: &Path) -> bool {
    false
}

fn zip_err(e: zip::result::ZipError) -> UpdateError {
    UpdateError::Zip(e.to_string())
}

#[derive(Debug, Clone)]
pub struct OpenedPackage {
    pub metadata: PackageMetadata,
    /// Payload files relative to the payload folder.
    pub payload: BTreeMap<String, Vec<u8>>,
    pub executable: BTreeSet<String>,
}

/// Read a package back. Entries that would escape the payload folder are
/// rejected.
pub fn open_package(bytes: &[u8]) -> Result<OpenedPackage, UpdateError> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(zip_err)?;
    let mut nuspec = None;
    let mut payload = BTreeMap::new();
    let mut executable = BTreeSet::new();
    for i in 0..zip.len() {
        let mut f = zip.by_index(i).map_err(zip_err)?;
        if f.is_dir() {
            continue;
        }
        let name = f.name().to_owned();
        if f.enclosed_name().is_none() {
            return Err(UpdateError::InvalidPackage(format!(
                "entry {name:?} escapes the package"
            )));
        }
        let mut data = Vec::new();
        f.read_to_end(&mut data).map_err(|e| UpdateError::Zip(e.to_string()))?;
        if let Some(rel) = name.strip_prefix(PAYLOAD_DIR) {
            if f.unix_mode().is_some_and(|m| m & 0o111 != 0) {
                executable.insert(rel.to_owned());
            }
            payload.insert(rel.to_owned(), data);
        } else if name.ends_with(".nuspec") && !name.contains('/') {
            nuspec = Some(data);
        }
    }
    let nuspec = nuspec.ok_or_else(|| UpdateError::InvalidPackage("no .nuspec document".into()))?;
    let text = std::str::from_utf8(&nuspec).map_err(|_| UpdateError::InvalidPackage("nuspec is not UTF-8".into()))?;
    let doc: Nuspec = quick_xml::de::from_str(text).map_err(|e| UpdateError::InvalidPackage(format!("nuspec: {e}")))?;
    let version = parse_version(&doc.metadata.version)
        .map_err(|e| UpdateError::InvalidPackage(format!("nuspec version: {e}")))?;
    Ok(OpenedPackage {
        metadata: PackageMetadata {
            id: doc.metadata.id,
            version,
            title: doc.metadata.title,
            authors: doc.metadata.authors,
        },
        payload,
        executable,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SignatureManifest {
    filename: String,
    sha256: String,
    size: u64,
}

/// The detached manifest that stands in for a code signature.
pub fn signature_manifest(filename: &str, bytes: &[u8]) -> Vec<u8> {
    let m = SignatureManifest {
        filename: filename.to_owned(),
        sha256: hex::encode(Sha256::digest(bytes)),
        size: bytes.len() as u64,
    };
    let mut out = serde_json::to_vec_pretty(&m).expect("manifest serializes");
    out.push(b'\n');
    out
}

/// Whether `manifest` vouches for exactly these package bytes.
pub fn check_signature_manifest(manifest: &[u8], filename: &str, bytes: &[u8]) -> bool {
    serde_json::from_slice::<SignatureManifest>(manifest).is_ok_and(|m| {
        m.filename == filename && m.size == bytes.len() as u64 && m.sha256 == hex::encode(Sha256::digest(bytes))
    })
}

/// Write `pkg` into a platform directory and append it to that directory's
/// RELEASES file, optionally with its signature manifest.
pub fn publish_package(platform_dir: &Path, pkg: &UpdatePackage, signed: bool) -> Result<PathBuf, UpdateError> {
    fs::create_dir_all(platform_dir).map_err(io_err(platform_dir))?;
    let path = platform_dir.join(&pkg.filename);
    fs::write(&path, &pkg.bytes).map_err(io_err(&path))?;
    if signed {
        let m = platform_dir.join(format!("{}{SIGNATURE_SUFFIX}", pkg.filename));
        fs::write(&m, pkg.signature_manifest()).map_err(io_err(&m))?;
    }
    let releases = platform_dir.join("RELEASES");
    let mut file = match fs::read_to_string(&releases) {
        Ok(text) => parse_releases(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => ReleasesFile::default(),
        Err(e) => return Err(io_err(&releases)(e)),
    };
    file.entries.retain(|e| e.filename != pkg.filename);
    file.entries.push(pkg.release_entry());
    fs::write(&releases, emit_releases(&file)).map_err(io_err(&releases))?;
    Ok(path)
}
