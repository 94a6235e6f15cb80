//! Top-down localization over the repository hierarchy.

use std::collections::{BTreeMap, VecDeque};

use super::context::AgentContext;
use super::protocol::parse_localization;
use super::AgentConfig;
use crate::code::{CodebaseModel, FunctionId, FunctionRecord};
use crate::error::LlmError;
use crate::index::{directory_node_id, file_node_id, function_for_node, function_node_id, NodeKind, SemanticIndex};
use crate::llm::{ChatRequest, LlmClient};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavNode {
    pub id: String,
    pub kind: NodeKind,
    /// Name shown to the model; unique among siblings.
    pub label: String,
    pub path: String,
    pub description: Option<String>,
    pub children: Vec<String>,
    pub function: Option<FunctionId>,
}

/// The hierarchy the agent descends: either the semantic index (with
/// summaries) or a bare tree built from the code model (names and
/// signatures only).
#[derive(Debug, Clone)]
pub struct NavTree {
    root: String,
    root_label: String,
    nodes: BTreeMap<String, NavNode>,
    pub uses_summaries: bool,
}

fn base_name(path: &str) -> &str {
    path.rsplit_once('/').map(|(_, b)| b).unwrap_or(path)
}

fn function_label(node_id: &str, name: &str) -> String {
    match node_id.rsplit_once('#') {
        Some((_, ord)) if ord.chars().all(|c| c.is_ascii_digit()) => format!("{name}#{ord}"),
        _ => name.to_string(),
    }
}

fn ordinals(model: &CodebaseModel, path: &str) -> Vec<(String, FunctionId, String, String)> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    model
        .functions_in(path)
        .map(|f| {
            let n = seen.entry(f.name.as_str()).or_default();
            *n += 1;
            let id = function_node_id(path, &f.name, *n);
            (id, f.id.clone(), f.name.clone(), f.signature.clone())
        })
        .collect()
}

impl NavTree {
    pub fn from_index(index: &SemanticIndex, model: &CodebaseModel) -> Self {
        let mut nodes = BTreeMap::new();
        for n in index.nodes.values() {
            let label = match n.kind {
                NodeKind::Function => function_label(&n.node_id, &n.name),
                NodeKind::File => base_name(&n.path).to_string(),
                NodeKind::Directory => format!("{}/", base_name(&n.path)),
                NodeKind::Repo => index.root_label.clone(),
            };
            nodes.insert(
                n.node_id.clone(),
                NavNode {
                    id: n.node_id.clone(),
                    kind: n.kind,
                    label,
                    path: n.path.clone(),
                    description: Some(n.summary.clone()),
                    children: n.children.clone(),
                    function: function_for_node(model, n).map(|f| f.id.clone()),
                },
            );
        }
        NavTree {
            root: index.root.clone(),
            root_label: index.root_label.clone(),
            nodes,
            uses_summaries: true,
        }
    }

    pub fn from_model(model: &CodebaseModel) -> Self {
        let mut nodes: BTreeMap<String, NavNode> = BTreeMap::new();
        let root = crate::index::REPO_NODE_ID.to_string();
        nodes.insert(
            root.clone(),
            NavNode {
                id: root.clone(),
                kind: NodeKind::Repo,
                label: model.root_label().to_string(),
                path: String::new(),
                description: None,
                children: Vec::new(),
                function: None,
            },
        );
        for unit in model.units() {
            let funs = ordinals(model, &unit.path);
            let file_id = file_node_id(&unit.path);
            let names: Vec<&str> = funs.iter().map(|(_, _, n, _)| n.as_str()).collect();
            let mut children = Vec::new();
            for (id, fid, name, signature) in &funs {
                children.push(id.clone());
                nodes.insert(
                    id.clone(),
                    NavNode {
                        id: id.clone(),
                        kind: NodeKind::Function,
                        label: function_label(id, name),
                        path: unit.path.clone(),
                        description: Some(signature.clone()),
                        children: Vec::new(),
                        function: Some(fid.clone()),
                    },
                );
            }
            nodes.insert(
                file_id.clone(),
                NavNode {
                    id: file_id.clone(),
                    kind: NodeKind::File,
                    label: base_name(&unit.path).to_string(),
                    path: unit.path.clone(),
                    description: (!names.is_empty()).then(|| format!("functions: {}", names.join(", "))),
                    children,
                    function: None,
                },
            );
            // Attach the file to its directory chain.
            let mut child = file_id;
            let mut path = unit.path.as_str();
            loop {
                let parent_path = path.rsplit_once('/').map(|(d, _)| d);
                let parent_id = match parent_path {
                    Some(d) => directory_node_id(d),
                    None => root.clone(),
                };
                let existed = nodes.contains_key(&parent_id);
                let parent = nodes.entry(parent_id.clone()).or_insert_with(|| NavNode {
                    id: parent_id.clone(),
                    kind: NodeKind::Directory,
                    label: format!("{}/", base_name(parent_path.unwrap_or_default())),
                    path: parent_path.unwrap_or_default().to_string(),
                    description: None,
                    children: Vec::new(),
                    function: None,
                });
                if !parent.children.contains(&child) {
                    parent.children.push(child);
                }
                match parent_path {
                    Some(d) if !existed => {
                        child = parent_id;
                        path = d;
                    }
                    _ => break,
                }
            }
        }
        let kinds: BTreeMap<String, (bool, String)> = nodes
            .iter()
            .map(|(k, v)| (k.clone(), (v.kind != NodeKind::Directory, v.path.clone())))
            .collect();
        for node in nodes.values_mut() {
            if node.kind != NodeKind::File {
                node.children.sort_by(|a, b| kinds[a].cmp(&kinds[b]));
            }
        }
        let labels: BTreeMap<String, String> = nodes.iter().map(|(k, v)| (k.clone(), v.label.clone())).collect();
        for node in nodes.values_mut() {
            if node.kind == NodeKind::Directory {
                let names: Vec<&str> = node.children.iter().map(|c| labels[c].as_str()).collect();
                node.description = Some(format!("contains: {}", names.join(", ")));
            }
        }
        NavTree {
            root,
            root_label: model.root_label().to_string(),
            nodes,
            uses_summaries: false,
        }
    }

    pub fn node(&self, id: &str) -> Option<&NavNode> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> &NavNode {
        &self.nodes[&self.root]
    }

    /// Short description of a function, used when its code is elided.
    pub fn function_summary(&self, id: &FunctionId) -> Option<&str> {
        self.nodes
            .values()
            .find(|n| n.function.as_ref() == Some(id))
            .and_then(|n| n.description.as_deref())
    }

    fn children(&self, node: &NavNode) -> Vec<&NavNode> {
        node.children.iter().filter_map(|c| self.nodes.get(c)).collect()
    }
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Function => "function",
        NodeKind::File => "file",
        NodeKind::Directory => "directory",
        NodeKind::Repo => "repository",
    }
}

fn resolve_label<'t>(children: &[&'t NavNode], label: &str) -> Option<&'t NavNode> {
    let label = label.trim();
    children
        .iter()
        .find(|c| c.label == label)
        .or_else(|| {
            children
                .iter()
                .find(|c| c.label.trim_end_matches('/') == label.trim_end_matches('/'))
        })
        .or_else(|| {
            children
                .iter()
                .find(|c| !c.path.is_empty() && c.path == label.trim_end_matches('/'))
        })
        .copied()
}

/// Descends from the root, asking the model at each visited node which
/// children are relevant. Returns the selected functions in selection
/// order; an empty result means nothing relevant was found.
pub fn localize<'m>(
    ctx: &mut AgentContext,
    tree: &NavTree,
    model: &'m CodebaseModel,
    client: &LlmClient,
    config: &AgentConfig,
) -> Result<Vec<&'m FunctionRecord>, LlmError> {
    let template = config.prompts.get("agent_localize");
    let mut selected: Vec<&'m FunctionRecord> = Vec::new();
    let mut queue: VecDeque<&NavNode> = VecDeque::from([tree.root()]);
    while let Some(node) = queue.pop_front() {
        let children = tree.children(node);
        if children.is_empty() {
            continue;
        }
        if ctx.tokens_exhausted() {
            ctx.note("token budget exhausted during localization".into());
            break;
        }
        let at_file = node.kind == NodeKind::File;
        let max_select = if at_file {
            config.fanout.functions
        } else {
            config.fanout.directories + config.fanout.files
        };
        let candidates = children
            .iter()
            .map(|c| match &c.description {
                Some(d) if !d.is_empty() => format!("- {} [{}]: {}", c.label, kind_name(c.kind), d),
                _ => format!("- {} [{}]", c.label, kind_name(c.kind)),
            })
            .collect::<Vec<_>>()
            .join("\n");
        let location = if node.kind == NodeKind::Repo {
            tree.root_label.clone()
        } else {
            node.path.clone()
        };
        let max_select_text = max_select.to_string();
        let p = &ctx.property;
        let rendered = template.render(&[
            ("max_select", &max_select_text),
            ("property_id", &p.property_id),
            ("section", &p.section_ref),
            ("property", &p.statement),
            ("excerpt", &p.source_excerpt),
            ("level", kind_name(node.kind)),
            ("location", &location),
            ("candidates", &candidates),
        ]);
        let request = ChatRequest::new("agent.localize", &config.model_tag, rendered.system, rendered.user)
            .with_max_output_tokens(config.max_output_tokens)
            .with_stream(ctx.property.property_id.clone());
        let Some(reply) = ctx.ask(client, request, 0, parse_localization)? else {
            ctx.note(format!(
                "unusable localization reply at {}; nothing selected there",
                node.id
            ));
            continue;
        };
        let (mut dirs, mut files, mut funs) = (0usize, 0usize, 0usize);
        for label in &reply.selected {
            let Some(child) = resolve_label(&children, label) else {
                ctx.note(format!("ignored unknown selection {label:?} at {}", node.id));
                continue;
            };
            match child.kind {
                NodeKind::Directory if dirs < config.fanout.directories => {
                    dirs += 1;
                    queue.push_back(child);
                }
                NodeKind::File if files < config.fanout.files => {
                    files += 1;
                    queue.push_back(child);
                }
                NodeKind::Function if funs < config.fanout.functions => {
                    funs += 1;
                    match child.function.as_ref().and_then(|id| model.function(id)) {
                        Some(f) if !selected.iter().any(|s| s.id == f.id) => selected.push(f),
                        Some(_) => {}
                        None => ctx.note(format!("index node {} has no matching function in the code", child.id)),
                    }
                }
                _ => ctx.note(format!(
                    "fanout cap reached; dropped selection {label:?} at {}",
                    node.id
                )),
            }
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_tree_shape_and_labels() {
        let m = CodebaseModel::from_sources(
            "proj",
            vec![
                (
                    "src/net/io.c",
                    "int rd(int f) { return f; }\nint rd2(void) { return 0; }\n",
                ),
                ("src/main.c", "int main(void) { return 0; }\n"),
                (
                    "top.c",
                    "static int x(void) { return 1; }\n#if A\nint x(void) { return 2; }\n#endif\n",
                ),
            ],
        )
        .unwrap();
        let t = NavTree::from_model(&m);
        let root = t.root();
        assert_eq!(root.children, vec!["dir:src".to_string(), "file:top.c".to_string()]);
        let src = t.node("dir:src").unwrap();
        assert_eq!(
            src.children,
            vec!["dir:src/net".to_string(), "file:src/main.c".to_string()]
        );
        assert_eq!(src.description.as_deref(), Some("contains: net/, main.c"));
        let top = t.node("file:top.c").unwrap();
        let labels: Vec<&str> = top.children.iter().map(|c| t.node(c).unwrap().label.as_str()).collect();
        assert_eq!(labels, vec!["x", "x#2"]);
        assert_eq!(
            t.node("fn:src/net/io.c::rd").unwrap().description.as_deref(),
            Some("int rd(int f)")
        );
        assert!(!t.uses_summaries);
    }
}
