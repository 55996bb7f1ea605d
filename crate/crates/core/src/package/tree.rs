use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use super::manifest::{ManifestError, PackageManifest};
use crate::asar::compare_paths;
use crate::bundle::{join, BundleError, BundleSource, DirBundle};

const NODE_MODULES: &str = "node_modules";

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("bundle has no root package.json")]
    MissingRootManifest,
    #[error("root package.json: {0}")]
    InvalidRootManifest(#[source] ManifestError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

/// Primary modules are installed directly below the application; tertiary
/// modules are nested inside another module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleClass {
    Primary,
    Tertiary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Request {
    /// Install path of the requesting module, `""` for the application.
    pub parent: String,
    pub range: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleInstance {
    pub manifest: PackageManifest,
    pub install_path: String,
    pub depth: u32,
    pub class: ModuleClass,
    pub requested_by: Vec<Request>,
    /// Installed but requested by no manifest.
    pub orphan: bool,
}

impl ModuleInstance {
    pub fn name(&self) -> &str {
        &self.manifest.name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DependencyEdge {
    pub parent: String,
    pub child: String,
    pub range: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependencyTree {
    pub root_manifest: PackageManifest,
    /// Sorted by install path.
    pub modules: Vec<ModuleInstance>,
    pub edges: Vec<DependencyEdge>,
    pub warnings: Vec<String>,
}

impl DependencyTree {
    pub fn module(&self, install_path: &str) -> Option<&ModuleInstance> {
        self.modules
            .binary_search_by(|m| compare_paths(&m.install_path, install_path))
            .ok()
            .map(|i| &self.modules[i])
    }

    /// Shortest chain of install paths leading from the application to
    /// `install_path`, ending with `install_path` itself. Empty for modules
    /// no manifest reaches.
    pub fn chain_to(&self, install_path: &str) -> Vec<String> {
        let mut prev: HashMap<&str, &str> = HashMap::new();
        let mut queue = VecDeque::from([""]);
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.edges {
            children.entry(e.parent.as_str()).or_default().push(e.child.as_str());
        }
        while let Some(node) = queue.pop_front() {
            if node == install_path {
                let mut chain = vec![node.to_owned()];
                let mut cur = node;
                while let Some(p) = prev.get(cur) {
                    if p.is_empty() {
                        break;
                    }
                    chain.push((*p).to_owned());
                    cur = p;
                }
                chain.reverse();
                return chain;
            }
            for child in children.get(node).into_iter().flatten() {
                if !prev.contains_key(child) && !child.is_empty() {
                    prev.insert(child, node);
                    queue.push_back(child);
                }
            }
        }
        Vec::new()
    }

    /// Names of every module reachable from the application through edges.
    pub fn reachable_names(&self) -> Vec<String> {
        let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut queue = VecDeque::from([""]);
        while let Some(node) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.parent == node) {
                if seen.insert(e.child.as_str(), ()).is_none() {
                    if let Some(m) = self.module(&e.child) {
                        names.push(m.name().to_owned());
                    }
                    queue.push_back(e.child.as_str());
                }
            }
        }
        names.sort_unstable();
        names.dedup();
        names
    }
}

/// Which manifest sections take part in edge resolution. Only
/// `dependencies` are followed by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WalkOptions {
    pub include_dev: bool,
    pub include_optional: bool,
    pub include_peer: bool,
}

pub fn walk_tree(bundle_dir: &Path) -> Result<DependencyTree, TreeError> {
    walk_source(&DirBundle::new(bundle_dir), WalkOptions::default())
}

/// Discover every installed module below `node_modules` (at any nesting
/// depth, including `@scope/name` directories) and resolve each manifest's
/// dependencies the way Node does: nearest enclosing `node_modules` first.
pub fn walk_source(source: &dyn BundleSource, opts: WalkOptions) -> Result<DependencyTree, TreeError> {
    let root_bytes = source.read("package.json")?.ok_or(TreeError::MissingRootManifest)?;
    let root_manifest = PackageManifest::parse(&root_bytes, "app").map_err(TreeError::InvalidRootManifest)?;

    let mut warnings = Vec::new();
    let mut modules = Vec::new();
    discover(source, "", 1, &mut modules, &mut warnings)?;
    modules.sort_by(|a: &ModuleInstance, b| compare_paths(&a.install_path, &b.install_path));

    let by_path: HashMap<String, usize> = modules
        .iter()
        .enumerate()
        .map(|(i, m)| (m.install_path.clone(), i))
        .collect();

    let mut requesters: Vec<(String, PackageManifest)> = vec![(String::new(), root_manifest.clone())];
    requesters.extend(modules.iter().map(|m| (m.install_path.clone(), m.manifest.clone())));

    let mut edges = Vec::new();
    for (parent, manifest) in &requesters {
        let mut sections: Vec<(&BTreeMap<String, String>, bool)> = vec![(&manifest.dependencies, true)];
        if opts.include_dev && parent.is_empty() {
            sections.push((&manifest.dev_dependencies, true));
        }
        if opts.include_optional {
            sections.push((&manifest.optional_dependencies, false));
        }
        if opts.include_peer {
            sections.push((&manifest.peer_dependencies, false));
        }
        for (deps, required) in sections {
            for (name, range) in deps {
                match resolve(&by_path, parent, name) {
                    Some(i) => {
                        let child = &mut modules[i];
                        child.requested_by.push(Request {
                            parent: parent.clone(),
                            range: range.clone(),
                        });
                        edges.push(DependencyEdge {
                            parent: parent.clone(),
                            child: child.install_path.clone(),
                            range: range.clone(),
                        });
                    }
                    None if required => {
                        let who = if parent.is_empty() {
                            "application"
                        } else {
                            parent.as_str()
                        };
                        warnings.push(format!("{who}: dependency {name}@{range} is not installed"));
                    }
                    None => {}
                }
            }
        }
    }
    for m in &mut modules {
        m.orphan = m.requested_by.is_empty();
        if m.manifest.version.is_none() {
            warnings.push(format!(
                "{}: version {:?} is not a valid semantic version",
                m.install_path, m.manifest.version_text
            ));
        }
    }

    Ok(DependencyTree {
        root_manifest,
        modules,
        edges,
        warnings,
    })
}

fn discover(
    source: &dyn BundleSource,
    owner: &str,
    depth: u32,
    out: &mut Vec<ModuleInstance>,
    warnings: &mut Vec<String>,
) -> Result<(), BundleError> {
    let nm = join(owner, NODE_MODULES);
    for name in source.subdirs(&nm)? {
        if name.starts_with('.') {
            continue;
        }
        if name.starts_with('@') {
            let scope_dir = join(&nm, &name);
            for sub in source.subdirs(&scope_dir)? {
                visit(
                    source,
                    &join(&scope_dir, &sub),
                    &format!("{name}/{sub}"),
                    depth,
                    out,
                    warnings,
                )?;
            }
        } else {
            visit(source, &join(&nm, &name), &name, depth, out, warnings)?;
        }
    }
    Ok(())
}

fn visit(
    source: &dyn BundleSource,
    path: &str,
    dir_name: &str,
    depth: u32,
    out: &mut Vec<ModuleInstance>,
    warnings: &mut Vec<String>,
) -> Result<(), BundleError> {
    let manifest_path = join(path, "package.json");
    match source.read(&manifest_path)? {
        None => warnings.push(format!("{path}: no package.json, skipped")),
        Some(bytes) => match PackageManifest::parse(&bytes, dir_name) {
            Err(e) => warnings.push(format!("{manifest_path}: {e}")),
            Ok(manifest) => out.push(ModuleInstance {
                manifest,
                install_path: path.to_owned(),
                depth,
                class: if depth == 1 {
                    ModuleClass::Primary
                } else {
                    ModuleClass::Tertiary
                },
                requested_by: Vec::new(),
                orphan: false,
            }),
        },
    }
    discover(source, path, depth + 1, out, warnings)
}

/// Node's lookup: try `<dir>/node_modules/<name>`, then repeat from the
/// enclosing module directory until the application root.
fn resolve(by_path: &HashMap<String, usize>, requester: &str, name: &str) -> Option<usize> {
    let mut base = requester;
    loop {
        let candidate = join(&join(base, NODE_MODULES), name);
        if let Some(&i) = by_path.get(&candidate) {
            return Some(i);
        }
        if base.is_empty() {
            return None;
        }
        base = enclosing_module(base);
    }
}

/// `node_modules/a/node_modules/@s/b` -> `node_modules/a`.
fn enclosing_module(path: &str) -> &str {
    let mut cut = 0;
    let mut pos = 0;
    for seg in path.split('/') {
        if seg == NODE_MODULES {
            cut = pos;
        }
        pos += seg.len() + 1;
    }
    path[..cut].trim_end_matches('/')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeStats {
    pub direct_includes: usize,
    pub total_dependencies: usize,
    /// `total / direct`; absent when there are no direct includes.
    #[serde(serialize_with = "serialize_ratio")]
    pub ratio: Option<Ratio<u64>>,
}

fn serialize_ratio<S: serde::Serializer>(r: &Option<Ratio<u64>>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.collect_str(r),
        None => s.serialize_none(),
    }
}

pub fn tree_stats(tree: &DependencyTree) -> TreeStats {
    let direct = tree.modules.iter().filter(|m| m.depth == 1).count();
    let total = tree.modules.len();
    TreeStats {
        direct_includes: direct,
        total_dependencies: total,
        ratio: (direct > 0).then(|| Ratio::new(total as u64, direct as u64)),
    }
}
