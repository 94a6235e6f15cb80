use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use walkdir::WalkDir;

use super::{CodebaseModel, ScanDiagnostic};
use crate::error::CodeError;

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Globs matched against repository-relative paths. Empty means "all
    /// files with a known grammar".
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub parallelism: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            include: vec!["**/*.c".into(), "**/*.h".into()],
            exclude: Vec::new(),
            parallelism: 4,
        }
    }
}

fn glob_set(patterns: &[String]) -> Result<GlobSet, CodeError> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        b.add(Glob::new(p).map_err(|e| CodeError::Glob(format!("{p}: {e}")))?);
    }
    b.build().map_err(|e| CodeError::Glob(e.to_string()))
}

/// Walks `root`, reads every matched file and builds the model. Unreadable
/// files become diagnostics; an empty match set is an error.
pub fn scan_repository(root: &Path, opts: &ScanOptions) -> Result<CodebaseModel, CodeError> {
    let meta = std::fs::metadata(root).map_err(|e| CodeError::Root {
        path: root.display().to_string(),
        source: e,
    })?;
    if !meta.is_dir() {
        return Err(CodeError::Root {
            path: root.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        });
    }
    let include = glob_set(&opts.include)?;
    let exclude = glob_set(&opts.exclude)?;

    let mut files = Vec::new();
    let mut diagnostics = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e
                    .path()
                    .map(|p| relative(root, p))
                    .unwrap_or_else(|| root.display().to_string());
                diagnostics.push(ScanDiagnostic {
                    path,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative(root, entry.path());
        if (!opts.include.is_empty() && !include.is_match(&rel)) || exclude.is_match(&rel) {
            continue;
        }
        match std::fs::read(entry.path()) {
            Ok(bytes) => files.push((rel, bytes)),
            Err(e) => diagnostics.push(ScanDiagnostic {
                path: rel,
                message: format!("unreadable: {e}"),
            }),
        }
    }
    let label = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| root.display().to_string());
    CodebaseModel::build(root.to_path_buf(), label, files, diagnostics, opts.parallelism)
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            scan_repository(dir.path(), &ScanOptions::default()),
            Err(CodeError::EmptyModel)
        ));
    }

    #[test]
    fn excludes_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("src/test")).unwrap();
        std::fs::write(dir.path().join("src/z.c"), "int z(void) { return 0; }").unwrap();
        std::fs::write(dir.path().join("src/a.c"), "int a(void) { return 0; }").unwrap();
        std::fs::write(dir.path().join("src/test/t.c"), "int t(void) { return 0; }").unwrap();
        let opts = ScanOptions {
            exclude: vec!["**/test/**".into()],
            ..Default::default()
        };
        let m = scan_repository(dir.path(), &opts).unwrap();
        let paths: Vec<_> = m.units().iter().map(|u| u.path.as_str()).collect();
        assert_eq!(paths, vec!["src/a.c", "src/z.c"]);
    }

    #[test]
    fn missing_root_is_an_error() {
        assert!(matches!(
            scan_repository(Path::new("/definitely/not/here"), &ScanOptions::default()),
            Err(CodeError::Root { .. })
        ));
    }
}
