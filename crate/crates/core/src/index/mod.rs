//! Hierarchical semantic index: natural-language summaries of every
//! function, file, directory and the repository root, built bottom-up and
//! reused wherever a node's Merkle hash is unchanged.

mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use store::{load_index, persist_index, INDEX_VERSION};

use crate::code::{content_digest, CodebaseModel, FunctionRecord};
use crate::error::{CodeError, IndexError};
use crate::llm::{ChatRequest, LlmClient, UsageStats};
use crate::prompts::PromptSet;

pub const REPO_NODE_ID: &str = "repo";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Function,
    File,
    Directory,
    Repo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexNode {
    pub node_id: String,
    pub kind: NodeKind,
    /// Display label: function name, file or directory base name.
    pub name: String,
    /// Repository-relative path ("" for the repository root).
    pub path: String,
    pub summary: String,
    /// Set when the model failed to summarize; `summary` then holds a
    /// fallback derived from names.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub summary_missing: bool,
    pub children: Vec<String>,
    pub content_hash: String,
    pub model_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticIndex {
    pub root: String,
    /// Base name of the repository directory the index was built from.
    pub root_label: String,
    pub created_at: u64,
    pub updated_at: u64,
    pub nodes: BTreeMap<String, IndexNode>,
    /// Accumulated usage of every build and update.
    pub usage: UsageStats,
}

impl SemanticIndex {
    pub fn node(&self, id: &str) -> Option<&IndexNode> {
        self.nodes.get(id)
    }

    pub fn root_node(&self) -> &IndexNode {
        &self.nodes[&self.root]
    }

    pub fn children(&self, id: &str) -> impl Iterator<Item = &IndexNode> {
        self.nodes
            .get(id)
            .into_iter()
            .flat_map(|n| n.children.iter().filter_map(|c| self.nodes.get(c)))
    }

    pub fn missing_summaries(&self) -> Vec<&str> {
        self.nodes
            .values()
            .filter(|n| n.summary_missing)
            .map(|n| n.node_id.as_str())
            .collect()
    }

    /// Structural equality: everything except timestamps and usage.
    pub fn same_structure(&self, other: &SemanticIndex) -> bool {
        self.root == other.root && self.root_label == other.root_label && self.nodes == other.nodes
    }

    /// Checks the kind lattice, single-parent tree shape and Merkle hashes.
    pub fn check_integrity(&self) -> Result<(), IndexError> {
        let bad = |m: String| Err(IndexError::Integrity(m));
        let Some(root) = self.nodes.get(&self.root) else {
            return bad(format!("root node {:?} missing", self.root));
        };
        if root.kind != NodeKind::Repo {
            return bad("root node is not the repository node".into());
        }
        if self.nodes.values().filter(|n| n.kind == NodeKind::Repo).count() != 1 {
            return bad("expected exactly one repository node".into());
        }
        let mut parents: HashMap<&str, usize> = HashMap::new();
        for node in self.nodes.values() {
            for c in &node.children {
                let Some(child) = self.nodes.get(c) else {
                    return bad(format!("{} lists missing child {c}", node.node_id));
                };
                let ok = match node.kind {
                    NodeKind::Function => false,
                    NodeKind::File => child.kind == NodeKind::Function,
                    NodeKind::Directory | NodeKind::Repo => {
                        matches!(child.kind, NodeKind::File | NodeKind::Directory)
                    }
                };
                if !ok {
                    return bad(format!(
                        "{:?} {} cannot contain {:?} {c}",
                        node.kind, node.node_id, child.kind
                    ));
                }
                *parents.entry(c.as_str()).or_default() += 1;
            }
        }
        for node in self.nodes.values() {
            let expected = usize::from(node.node_id != self.root);
            let got = parents.get(node.node_id.as_str()).copied().unwrap_or(0);
            if got != expected {
                return bad(format!("{} has {got} parents", node.node_id));
            }
        }
        // Single parent everywhere plus full reachability from the root
        // rules out cycles.
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                return bad(format!("cycle through {id}"));
            }
            stack.extend(self.nodes[id].children.iter().map(String::as_str));
        }
        if seen.len() != self.nodes.len() {
            return bad("nodes unreachable from the root".into());
        }
        for node in self.nodes.values() {
            if node.kind == NodeKind::Function || node.kind == NodeKind::File {
                continue;
            }
            let child_hashes: Vec<(&str, &str)> = node
                .children
                .iter()
                .map(|c| (c.as_str(), self.nodes[c].content_hash.as_str()))
                .collect();
            if directory_hash(node.kind, &child_hashes) != node.content_hash {
                return bad(format!("Merkle hash mismatch at {}", node.node_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IndexOptions {
    pub model_tag: String,
    pub function_words: usize,
    pub file_words: usize,
    pub directory_words: usize,
    /// Function bodies longer than this are cut head+tail.
    pub max_function_chars: usize,
    pub prompts: PromptSet,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            model_tag: "claude-3-5-sonnet-20241022".into(),
            function_words: 80,
            file_words: 120,
            directory_words: 150,
            max_function_chars: 24_000,
            prompts: PromptSet::default(),
        }
    }
}

/// What a build or update did.
#[derive(Debug, Clone)]
pub struct IndexOutcome {
    pub index: SemanticIndex,
    pub llm_calls: usize,
    /// Nodes summarized by the model in this pass, in summarization order.
    pub resummarized: Vec<String>,
    pub reused: usize,
    pub removed: Vec<String>,
    pub usage: UsageStats,
}

/// Full build: every node is summarized.
pub fn build_index(model: &CodebaseModel, client: &LlmClient, opts: &IndexOptions) -> Result<IndexOutcome, IndexError> {
    run(model, None, client, opts)
}

/// Incremental update: nodes whose content hash is unchanged keep their
/// summaries without a model call.
pub fn update_index(
    index: &SemanticIndex,
    model: &CodebaseModel,
    client: &LlmClient,
    opts: &IndexOptions,
) -> Result<IndexOutcome, IndexError> {
    if index.root_label != model.root_label() {
        return Err(IndexError::RootMismatch {
            index: index.root_label.clone(),
            model: model.root_label().to_string(),
        });
    }
    run(model, Some(index), client, opts)
}

pub fn function_node_id(path: &str, name: &str, ordinal: usize) -> String {
    if ordinal <= 1 {
        format!("fn:{path}::{name}")
    } else {
        format!("fn:{path}::{name}#{ordinal}")
    }
}

pub fn file_node_id(path: &str) -> String {
    format!("file:{path}")
}

pub fn directory_node_id(path: &str) -> String {
    format!("dir:{path}")
}

/// Resolves a function node back to its record in `model`.
pub fn function_for_node<'m>(model: &'m CodebaseModel, node: &IndexNode) -> Option<&'m FunctionRecord> {
    if node.kind != NodeKind::Function {
        return None;
    }
    function_ordinals(model, &node.path)
        .into_iter()
        .find(|(id, _)| *id == node.node_id)
        .map(|(_, f)| f)
}

/// Function node ids of a file in source order. Duplicate names within a
/// file get `#2`, `#3`, ... so ids stay stable when unrelated code moves.
fn function_ordinals<'m>(model: &'m CodebaseModel, path: &str) -> Vec<(String, &'m FunctionRecord)> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    model
        .functions_in(path)
        .map(|f| {
            let n = seen.entry(f.name.as_str()).or_default();
            *n += 1;
            (function_node_id(path, &f.name, *n), f)
        })
        .collect()
}

fn file_hash(child_hashes: &[&str], non_function_bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(b"file\0");
    for c in child_hashes {
        h.update(c.as_bytes());
        h.update(b"\n");
    }
    h.update(b"\0");
    h.update(non_function_bytes);
    hex::encode(h.finalize())
}

fn directory_hash(kind: NodeKind, children: &[(&str, &str)]) -> String {
    let mut h = Sha256::new();
    h.update(if kind == NodeKind::Repo {
        b"repo\0" as &[u8]
    } else {
        b"dir\0"
    });
    for (id, hash) in children {
        h.update(id.as_bytes());
        h.update(b"\0");
        h.update(hash.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn non_function_bytes(model: &CodebaseModel, path: &str) -> Vec<u8> {
    let bytes = model.file_bytes(path).unwrap_or_default();
    let mut out = Vec::with_capacity(bytes.len());
    let mut pos = 0;
    for f in model.functions_in(path) {
        if f.body_span.start >= pos {
            out.extend_from_slice(&bytes[pos..f.body_span.start]);
            pos = f.body_span.end;
        }
    }
    out.extend_from_slice(&bytes[pos.min(bytes.len())..]);
    out
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn parent_dir(path: &str) -> &str {
    path.rsplit_once('/').map(|(d, _)| d).unwrap_or("")
}

fn base_name(path: &str) -> &str {
    path.rsplit_once('/').map(|(_, b)| b).unwrap_or(path)
}

/// Limits `text` to `max` words.
pub fn cap_words(text: &str, max: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max {
        words.join(" ")
    } else {
        words[..max].join(" ")
    }
}

/// Keeps the head and tail of an oversized function with an elision marker.
pub fn truncate_middle(text: &str, max_chars: usize) -> String {
    let total = text.chars().count();
    if total <= max_chars {
        return text.to_string();
    }
    let keep = max_chars / 2;
    let head: String = text.chars().take(keep).collect();
    let tail: String = text.chars().skip(total - keep).collect();
    format!("{head}\n/* ... {} characters elided ... */\n{tail}", total - 2 * keep)
}

/// Deterministic summary for files without functions (headers, tables):
/// the declared names and the leading comment.
fn extractive_file_summary(model: &CodebaseModel, path: &str, max_words: usize) -> String {
    let mut parts = Vec::new();
    let bytes = model.file_bytes(path).unwrap_or_default();
    let text = String::from_utf8_lossy(bytes);
    let trimmed = text.trim_start();
    if let Some(rest) = trimmed.strip_prefix("/*") {
        if let Some(end) = rest.find("*/") {
            let comment: String = rest[..end]
                .lines()
                .map(|l| l.trim().trim_start_matches('*').trim())
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            if !comment.is_empty() {
                parts.push(comment);
            }
        }
    }
    let mut names: Vec<String> = model
        .definitions_in(path)
        .map(|d| format!("{} {}", d.kind.as_str(), d.name))
        .collect();
    names.dedup();
    if names.is_empty() {
        parts.push(format!("File {path} defines no functions, types or macros."));
    } else {
        parts.push(format!("Declares {}.", names.join(", ")));
    }
    cap_words(&parts.join(" "), max_words)
}

struct Planned {
    node: IndexNode,
    /// Present when the model is asked to summarize this node.
    job: Option<Job>,
}

enum Job {
    Function { code: String },
    File,
    Directory,
    Repo,
}

fn run(
    model: &CodebaseModel,
    previous: Option<&SemanticIndex>,
    client: &LlmClient,
    opts: &IndexOptions,
) -> Result<IndexOutcome, IndexError> {
    if model.functions().is_empty() && model.definitions().is_empty() && model.units().is_empty() {
        return Err(CodeError::EmptyModel.into());
    }
    let mark = client.call_count();
    let mut nodes: BTreeMap<String, IndexNode> = BTreeMap::new();
    let mut resummarized = Vec::new();
    let mut reused = 0usize;
    let parallelism = client.effective_parallelism();

    let reuse = |node: &mut IndexNode| -> bool {
        let Some(prev) = previous.and_then(|p| p.nodes.get(&node.node_id)) else {
            return false;
        };
        if prev.kind == node.kind && prev.content_hash == node.content_hash && !prev.summary_missing {
            node.summary = prev.summary.clone();
            node.model_tag = prev.model_tag.clone();
            true
        } else {
            false
        }
    };

    // Level 0: functions.
    let mut planned = Vec::new();
    for unit in model.units() {
        for (id, f) in function_ordinals(model, &unit.path) {
            let mut node = IndexNode {
                node_id: id,
                kind: NodeKind::Function,
                name: f.name.clone(),
                path: unit.path.clone(),
                summary: String::new(),
                summary_missing: false,
                children: Vec::new(),
                content_hash: content_digest(f.body_text.as_bytes()),
                model_tag: opts.model_tag.clone(),
            };
            let job = if reuse(&mut node) {
                None
            } else {
                Some(Job::Function {
                    code: truncate_middle(&f.body_text, opts.max_function_chars),
                })
            };
            planned.push(Planned { node, job });
        }
    }
    summarize_level(
        planned,
        &nodes,
        client,
        opts,
        parallelism,
        &mut resummarized,
        &mut reused,
    )
    .into_iter()
    .for_each(|n| {
        nodes.insert(n.node_id.clone(), n);
    });

    // Level 1: files.
    let mut planned = Vec::new();
    for unit in model.units() {
        let children: Vec<String> = function_ordinals(model, &unit.path)
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        let child_hashes: Vec<&str> = children.iter().map(|c| nodes[c].content_hash.as_str()).collect();
        let hash = file_hash(&child_hashes, &non_function_bytes(model, &unit.path));
        let mut node = IndexNode {
            node_id: file_node_id(&unit.path),
            kind: NodeKind::File,
            name: base_name(&unit.path).to_string(),
            path: unit.path.clone(),
            summary: String::new(),
            summary_missing: false,
            children,
            content_hash: hash,
            model_tag: opts.model_tag.clone(),
        };
        let job = if node.children.is_empty() {
            node.summary = extractive_file_summary(model, &unit.path, opts.file_words);
            node.model_tag = "extractive".into();
            None
        } else if reuse(&mut node) {
            None
        } else {
            Some(Job::File)
        };
        planned.push(Planned { node, job });
    }
    summarize_level(
        planned,
        &nodes,
        client,
        opts,
        parallelism,
        &mut resummarized,
        &mut reused,
    )
    .into_iter()
    .for_each(|n| {
        nodes.insert(n.node_id.clone(), n);
    });

    // Directories, deepest first, then the repository root.
    let mut dir_children: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    dir_children.entry(String::new()).or_default();
    for unit in model.units() {
        let mut child = file_node_id(&unit.path);
        let mut dir = parent_dir(&unit.path).to_string();
        loop {
            dir_children.entry(dir.clone()).or_default().insert(child);
            if dir.is_empty() {
                break;
            }
            child = directory_node_id(&dir);
            dir = parent_dir(&dir).to_string();
        }
    }
    let mut by_depth: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for dir in dir_children.keys() {
        let depth = if dir.is_empty() {
            0
        } else {
            dir.matches('/').count() + 1
        };
        by_depth.entry(depth).or_default().push(dir.clone());
    }
    for (_, dirs) in by_depth.into_iter().rev() {
        let mut planned = Vec::new();
        for dir in dirs {
            let children: Vec<String> = dir_children[&dir].iter().cloned().collect();
            let kind = if dir.is_empty() {
                NodeKind::Repo
            } else {
                NodeKind::Directory
            };
            let child_hashes: Vec<(&str, &str)> = children
                .iter()
                .map(|c| (c.as_str(), nodes[c].content_hash.as_str()))
                .collect();
            let hash = directory_hash(kind, &child_hashes);
            let mut node = IndexNode {
                node_id: if dir.is_empty() {
                    REPO_NODE_ID.to_string()
                } else {
                    directory_node_id(&dir)
                },
                kind,
                name: if dir.is_empty() {
                    model.root_label().to_string()
                } else {
                    base_name(&dir).to_string()
                },
                path: dir.clone(),
                summary: String::new(),
                summary_missing: false,
                children,
                content_hash: hash,
                model_tag: opts.model_tag.clone(),
            };
            let job = if reuse(&mut node) {
                None
            } else if kind == NodeKind::Repo {
                Some(Job::Repo)
            } else {
                Some(Job::Directory)
            };
            planned.push(Planned { node, job });
        }
        summarize_level(
            planned,
            &nodes,
            client,
            opts,
            parallelism,
            &mut resummarized,
            &mut reused,
        )
        .into_iter()
        .for_each(|n| {
            nodes.insert(n.node_id.clone(), n);
        });
    }

    let removed: Vec<String> = previous
        .map(|p| p.nodes.keys().filter(|k| !nodes.contains_key(*k)).cloned().collect())
        .unwrap_or_default();
    let usage = client.meter_since(mark);
    let now = now_secs();
    let changed = previous.is_none_or(|p| !resummarized.is_empty() || !removed.is_empty() || p.nodes != nodes);
    let index = SemanticIndex {
        root: REPO_NODE_ID.to_string(),
        root_label: model.root_label().to_string(),
        created_at: previous.map(|p| p.created_at).unwrap_or(now),
        updated_at: match previous {
            Some(p) if !changed => p.updated_at,
            _ => now,
        },
        nodes,
        usage: previous
            .map(|p| p.usage.merged(&usage, client.rates()))
            .unwrap_or(usage),
    };
    index.check_integrity()?;
    Ok(IndexOutcome {
        index,
        llm_calls: client.call_count() - mark,
        resummarized,
        reused,
        removed,
        usage,
    })
}

fn summarize_level(
    planned: Vec<Planned>,
    done: &BTreeMap<String, IndexNode>,
    client: &LlmClient,
    opts: &IndexOptions,
    parallelism: usize,
    resummarized: &mut Vec<String>,
    reused: &mut usize,
) -> Vec<IndexNode> {
    let results = crate::par::map_ordered(&planned, parallelism, |p| {
        p.job.as_ref().map(|job| summarize(&p.node, job, done, client, opts))
    });
    planned
        .into_iter()
        .zip(results)
        .map(|(p, result)| {
            let mut node = p.node;
            match result {
                None => {
                    if node.kind != NodeKind::File || !node.children.is_empty() {
                        *reused += 1;
                    }
                }
                Some(Ok(summary)) => {
                    node.summary = summary;
                    resummarized.push(node.node_id.clone());
                }
                Some(Err(e)) => {
                    tracing::warn!(node = %node.node_id, error = %e, "summary missing");
                    node.summary = format!("[summary unavailable] {:?} {}", node.kind, node.name).to_lowercase();
                    node.summary_missing = true;
                    resummarized.push(node.node_id.clone());
                }
            }
            node
        })
        .collect()
}

fn child_listing(node: &IndexNode, done: &BTreeMap<String, IndexNode>) -> String {
    node.children
        .iter()
        .filter_map(|c| done.get(c))
        .map(|c| {
            let kind = match c.kind {
                NodeKind::Function => "function",
                NodeKind::File => "file",
                NodeKind::Directory => "directory",
                NodeKind::Repo => "repository",
            };
            let summary = if c.summary_missing {
                "unsummarized"
            } else {
                c.summary.as_str()
            };
            format!("- {kind} {}: {summary}", c.name)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn summarize(
    node: &IndexNode,
    job: &Job,
    done: &BTreeMap<String, IndexNode>,
    client: &LlmClient,
    opts: &IndexOptions,
) -> Result<String, crate::error::LlmError> {
    let (template, purpose, words) = match job {
        Job::Function { .. } => ("index_function", "index.function", opts.function_words),
        Job::File => ("index_file", "index.file", opts.file_words),
        Job::Directory => ("index_directory", "index.directory", opts.directory_words),
        Job::Repo => ("index_repo", "index.repo", opts.directory_words),
    };
    let words_s = words.to_string();
    let children = child_listing(node, done);
    let code = match job {
        Job::Function { code } => code.as_str(),
        _ => "",
    };
    let location = if node.path.is_empty() {
        node.name.as_str()
    } else {
        node.path.as_str()
    };
    let rendered = opts.prompts.get(template).render(&[
        ("max_words", &words_s),
        ("path", location),
        ("name", &node.name),
        ("code", code),
        ("children", &children),
    ]);
    let request = ChatRequest::new(purpose, &opts.model_tag, rendered.system, rendered.user)
        .with_max_output_tokens((words as u32) * 3);
    let response = client.complete(&request)?;
    let summary = cap_words(response.content.trim(), words);
    if summary.is_empty() {
        return Err(crate::error::LlmError::Protocol("empty summary".into()));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockRule, MockScript, ScriptedBackend};
    use std::sync::Arc;

    fn client() -> LlmClient {
        LlmClient::new(Arc::new(ScriptedBackend::new(MockScript {
            rules: vec![MockRule::any("summary text")],
        })))
    }

    fn model(extra: &str) -> CodebaseModel {
        CodebaseModel::from_sources(
            "proj",
            vec![
                (
                    "src/a.c".to_string(),
                    format!("int a(void) {{ return 1; }}\nint b(int x) {{ return x{extra}; }}\n"),
                ),
                ("src/b.c".to_string(), "int c(void) { return 3; }\n".to_string()),
                (
                    "inc/defs.h".to_string(),
                    "/* Shared limits. */\n#define MAXN 4\n".to_string(),
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn build_counts_and_structure() {
        let m = model("");
        let c = client();
        let out = build_index(&m, &c, &IndexOptions::default()).unwrap();
        // 3 functions + 2 files with functions + 2 directories + repo.
        assert_eq!(out.llm_calls, 3 + 2 + 2 + 1);
        let idx = &out.index;
        assert_eq!(idx.nodes.len(), 3 + 3 + 2 + 1);
        let header = idx.node("file:inc/defs.h").unwrap();
        assert_eq!(header.summary, "Shared limits. Declares macro MAXN.");
        assert!(idx.check_integrity().is_ok());
    }

    #[test]
    fn update_reuses_unchanged_and_follows_root_path() {
        let c = client();
        let built = build_index(&model(""), &c, &IndexOptions::default()).unwrap().index;
        let same = update_index(&built, &model(""), &c, &IndexOptions::default()).unwrap();
        assert_eq!(same.llm_calls, 0);
        assert!(same.index.same_structure(&built));
        assert_eq!(same.index.updated_at, built.updated_at);

        let edited = update_index(&built, &model(" + 1"), &c, &IndexOptions::default()).unwrap();
        assert_eq!(
            edited.resummarized,
            vec!["fn:src/a.c::b", "file:src/a.c", "dir:src", "repo"]
        );
    }

    #[test]
    fn root_mismatch_is_rejected() {
        let c = client();
        let built = build_index(&model(""), &c, &IndexOptions::default()).unwrap().index;
        let other = CodebaseModel::from_sources("elsewhere", vec![("a.c", "int a(void){return 0;}")]).unwrap();
        assert!(matches!(
            update_index(&built, &other, &c, &IndexOptions::default()),
            Err(IndexError::RootMismatch { .. })
        ));
    }

    #[test]
    fn failures_mark_nodes_and_build_continues() {
        let c = LlmClient::new(Arc::new(
            ScriptedBackend::new(MockScript {
                rules: vec![
                    MockRule::for_purpose("index.file", "file ok"),
                    MockRule::for_purpose("index.", "other ok"),
                ],
            })
            .with_responder(|r| {
                if r.prompt_text().contains("int c(void)") {
                    Some(String::new())
                } else {
                    None
                }
            }),
        ));
        let out = build_index(&model(""), &c, &IndexOptions::default()).unwrap();
        assert_eq!(out.index.missing_summaries(), vec!["fn:src/b.c::c"]);
        assert!(!out.index.node("fn:src/b.c::c").unwrap().summary.is_empty());
        // A later update retries only the missing node; its file hash is unchanged.
        let c2 = client();
        let again = update_index(&out.index, &model(""), &c2, &IndexOptions::default()).unwrap();
        assert_eq!(again.resummarized, vec!["fn:src/b.c::c"]);
    }

    #[test]
    fn caps_and_truncation() {
        assert_eq!(cap_words("a  b\nc d", 3), "a b c");
        let long = "x".repeat(100);
        let t = truncate_middle(&long, 20);
        assert!(t.starts_with("xxxxxxxxxx\n/* ... 80 characters elided ... */\nxxxxxxxxxx"));
        assert_eq!(truncate_middle("short", 20), "short");
    }
}
