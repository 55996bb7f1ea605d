//! Package manifests, semantic versions, npm ranges and the installed
//! module tree of a bundle.

mod manifest;
mod range;
mod semver;
mod tree;

pub use manifest::{
    normalize_repository, normalize_repository_text, ManifestError, PackageManifest, RepoCoordinates, FIXTURE_MARKER,
};
pub use range::{is_pinned, parse_range, range_satisfies, Comparator, InvalidRange, Op, VersionRange};
pub use semver::{parse_version, Identifier, InvalidVersion, SemVer};
pub use tree::{
    tree_stats, walk_source, walk_tree, DependencyEdge, DependencyTree, ModuleClass, ModuleInstance, Request,
    TreeError, TreeStats, WalkOptions,
};
