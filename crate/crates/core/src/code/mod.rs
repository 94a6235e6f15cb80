//! Subject code model: files, functions, type/macro definitions and the
//! name+arity call graph of a C repository.

mod callgraph;
pub mod grammar;
mod scan;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use callgraph::CallGraph;
pub use scan::{scan_repository, ScanOptions};

use crate::error::CodeError;

/// Half-open byte range into a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Lowercase hex SHA-256 of raw bytes.
pub fn content_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    /// Repository-relative path with `/` separators.
    pub path: String,
    pub language: String,
    pub content_hash: String,
    pub byte_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FunctionId(pub String);

impl FunctionId {
    fn new(path: &str, name: &str, start: usize) -> Self {
        FunctionId(format!("{path}#{name}@{start}"))
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub id: FunctionId,
    pub path: String,
    pub name: String,
    /// Fixed parameter count; `...` is not counted.
    pub arity: usize,
    pub variadic: bool,
    pub signature: String,
    /// Whole definition including the signature.
    pub body_span: Span,
    pub body_text: String,
    pub is_static: bool,
    /// Index of the first call site in `CodebaseModel::calls` and count.
    #[serde(skip)]
    call_range: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefinitionKind {
    Struct,
    Union,
    Enum,
    Typedef,
    Macro,
}

impl DefinitionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DefinitionKind::Struct => "struct",
            DefinitionKind::Union => "union",
            DefinitionKind::Enum => "enum",
            DefinitionKind::Typedef => "typedef",
            DefinitionKind::Macro => "macro",
        }
    }
}

/// A type or macro definition (`TypeRecord` / `MacroRecord`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionRecord {
    pub id: String,
    pub name: String,
    pub kind: DefinitionKind,
    pub definition_text: String,
    pub span: Span,
    pub path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallSiteId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub id: CallSiteId,
    pub caller_id: FunctionId,
    pub callee_name: String,
    pub arg_count: usize,
    pub span: Span,
    /// Calls through function pointers or other non-identifier expressions.
    pub indirect: bool,
}

/// Any entity returned by a lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity<'m> {
    Function(&'m FunctionRecord),
    Definition(&'m DefinitionRecord),
}

impl<'m> Entity<'m> {
    pub fn id(&self) -> &'m str {
        match self {
            Entity::Function(f) => &f.id.0,
            Entity::Definition(d) => &d.id,
        }
    }

    pub fn name(&self) -> &'m str {
        match self {
            Entity::Function(f) => &f.name,
            Entity::Definition(d) => &d.name,
        }
    }

    pub fn path(&self) -> &'m str {
        match self {
            Entity::Function(f) => &f.path,
            Entity::Definition(d) => &d.path,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Entity::Function(f) => f.body_span,
            Entity::Definition(d) => d.span,
        }
    }

    pub fn text(&self) -> &'m str {
        match self {
            Entity::Function(f) => &f.body_text,
            Entity::Definition(d) => &d.definition_text,
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            Entity::Function(_) => "function",
            Entity::Definition(d) => d.kind.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EntityRef {
    Function(usize),
    Definition(usize),
}

/// Result of resolving a call site to its candidate definitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalleeResolution<'m> {
    /// One or more same-name, arity-compatible definitions. Ambiguity is
    /// preserved.
    Defined(Vec<&'m FunctionRecord>),
    /// Library call, macro, or indirect call: nothing in the repository.
    External,
}

impl<'m> CalleeResolution<'m> {
    pub fn functions(&self) -> &[&'m FunctionRecord] {
        match self {
            CalleeResolution::Defined(v) => v,
            CalleeResolution::External => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanDiagnostic {
    pub path: String,
    pub message: String,
}

/// Immutable, shareable model of one scanned repository.
#[derive(Debug, Clone)]
pub struct CodebaseModel {
    root: PathBuf,
    root_label: String,
    units: Vec<SourceUnit>,
    contents: Vec<Vec<u8>>,
    line_starts: Vec<Vec<usize>>,
    functions: Vec<FunctionRecord>,
    definitions: Vec<DefinitionRecord>,
    calls: Vec<CallSite>,
    graph: CallGraph,
    names: HashMap<String, Vec<EntityRef>>,
    fn_by_id: HashMap<FunctionId, usize>,
    unit_by_path: HashMap<String, usize>,
    diagnostics: Vec<ScanDiagnostic>,
}

impl CodebaseModel {
    /// Builds a model from in-memory files. Paths are repository-relative.
    /// Files without a registered grammar are ignored.
    pub fn from_sources<P, B>(root_label: &str, files: Vec<(P, B)>) -> Result<Self, CodeError>
    where
        P: Into<String>,
        B: Into<Vec<u8>>,
    {
        let files: Vec<(String, Vec<u8>)> = files.into_iter().map(|(p, b)| (p.into(), b.into())).collect();
        Self::build(PathBuf::from(root_label), root_label.to_string(), files, Vec::new(), 1)
    }

    pub(crate) fn build(
        root: PathBuf,
        root_label: String,
        mut files: Vec<(String, Vec<u8>)>,
        diagnostics: Vec<ScanDiagnostic>,
        parallelism: usize,
    ) -> Result<Self, CodeError> {
        files.retain(|(p, _)| extension_grammar(p).is_some());
        files.sort_by(|a, b| a.0.cmp(&b.0));
        files.dedup_by(|a, b| a.0 == b.0);
        if files.is_empty() {
            return Err(CodeError::EmptyModel);
        }

        let parsed = parse_all(&files, parallelism);

        let mut model = CodebaseModel {
            root,
            root_label,
            units: Vec::with_capacity(files.len()),
            contents: Vec::with_capacity(files.len()),
            line_starts: Vec::with_capacity(files.len()),
            functions: Vec::new(),
            definitions: Vec::new(),
            calls: Vec::new(),
            graph: CallGraph::default(),
            names: HashMap::new(),
            fn_by_id: HashMap::new(),
            unit_by_path: HashMap::new(),
            diagnostics,
        };

        for ((path, bytes), (language, parsed)) in files.into_iter().zip(parsed) {
            if parsed.had_errors {
                model.diagnostics.push(ScanDiagnostic {
                    path: path.clone(),
                    message: "syntax errors recovered during parsing".into(),
                });
            }
            for raw in parsed.functions {
                let id = FunctionId::new(&path, &raw.name, raw.span.start);
                let first_call = model.calls.len();
                for call in &raw.calls {
                    model.calls.push(CallSite {
                        id: CallSiteId(model.calls.len()),
                        caller_id: id.clone(),
                        callee_name: call.callee.clone(),
                        arg_count: call.arg_count,
                        span: call.span,
                        indirect: call.indirect,
                    });
                }
                model.functions.push(FunctionRecord {
                    id,
                    path: path.clone(),
                    name: raw.name,
                    arity: raw.arity,
                    variadic: raw.variadic,
                    signature: slice_lossy(&bytes, raw.signature_span),
                    body_span: raw.span,
                    body_text: slice_lossy(&bytes, raw.span),
                    is_static: raw.is_static,
                    call_range: (first_call, raw.calls.len()),
                });
            }
            for raw in parsed.definitions {
                model.definitions.push(DefinitionRecord {
                    id: format!("{path}#{}:{}@{}", raw.kind.as_str(), raw.name, raw.span.start),
                    name: raw.name,
                    kind: raw.kind,
                    definition_text: slice_lossy(&bytes, raw.span),
                    span: raw.span,
                    path: path.clone(),
                });
            }
            model.unit_by_path.insert(path.clone(), model.units.len());
            model.units.push(SourceUnit {
                path,
                language: language.to_string(),
                content_hash: content_digest(&bytes),
                byte_length: bytes.len(),
            });
            model.line_starts.push(line_starts(&bytes));
            model.contents.push(bytes);
        }

        for (i, f) in model.functions.iter().enumerate() {
            model.fn_by_id.insert(f.id.clone(), i);
            model
                .names
                .entry(f.name.clone())
                .or_default()
                .push(EntityRef::Function(i));
        }
        for (i, d) in model.definitions.iter().enumerate() {
            model
                .names
                .entry(d.name.clone())
                .or_default()
                .push(EntityRef::Definition(i));
        }
        model.graph = CallGraph::build(&model.functions, &model.calls);
        Ok(model)
    }

    pub fn root(&self) -> &std::path::Path {
        &self.root
    }

    /// Name of the scanned root directory.
    pub fn root_label(&self) -> &str {
        &self.root_label
    }

    pub fn units(&self) -> &[SourceUnit] {
        &self.units
    }

    pub fn functions(&self) -> &[FunctionRecord] {
        &self.functions
    }

    pub fn definitions(&self) -> &[DefinitionRecord] {
        &self.definitions
    }

    pub fn calls(&self) -> &[CallSite] {
        &self.calls
    }

    pub fn call_graph(&self) -> &CallGraph {
        &self.graph
    }

    pub fn diagnostics(&self) -> &[ScanDiagnostic] {
        &self.diagnostics
    }

    pub fn file_bytes(&self, path: &str) -> Option<&[u8]> {
        self.unit_by_path.get(path).map(|&i| self.contents[i].as_slice())
    }

    pub fn unit(&self, path: &str) -> Option<&SourceUnit> {
        self.unit_by_path.get(path).map(|&i| &self.units[i])
    }

    pub fn function(&self, id: &FunctionId) -> Option<&FunctionRecord> {
        self.fn_by_id.get(id).map(|&i| &self.functions[i])
    }

    pub fn call(&self, id: CallSiteId) -> Option<&CallSite> {
        self.calls.get(id.0)
    }

    /// Functions defined in `path`, ordered by start byte.
    pub fn functions_in(&self, path: &str) -> impl Iterator<Item = &FunctionRecord> {
        let path = path.to_string();
        self.functions.iter().filter(move |f| f.path == path)
    }

    pub fn definitions_in(&self, path: &str) -> impl Iterator<Item = &DefinitionRecord> {
        let path = path.to_string();
        self.definitions.iter().filter(move |d| d.path == path)
    }

    /// Call sites inside a function body, in source order.
    pub fn calls_from(&self, id: &FunctionId) -> &[CallSite] {
        match self.fn_by_id.get(id) {
            Some(&i) => {
                let (start, len) = self.functions[i].call_range;
                &self.calls[start..start + len]
            }
            None => &[],
        }
    }

    /// Every function, type and macro whose name matches exactly.
    pub fn lookup_definition(&self, name: &str) -> Vec<Entity<'_>> {
        self.names
            .get(name)
            .map(|refs| refs.iter().map(|r| self.entity(*r)).collect())
            .unwrap_or_default()
    }

    /// Type and macro definitions only.
    pub fn lookup_type_or_macro(&self, name: &str) -> Vec<&DefinitionRecord> {
        self.names
            .get(name)
            .map(|refs| {
                refs.iter()
                    .filter_map(|r| match r {
                        EntityRef::Definition(i) => Some(&self.definitions[*i]),
                        EntityRef::Function(_) => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn functions_named(&self, name: &str) -> Vec<&FunctionRecord> {
        self.names
            .get(name)
            .map(|refs| {
                refs.iter()
                    .filter_map(|r| match r {
                        EntityRef::Function(i) => Some(&self.functions[*i]),
                        EntityRef::Definition(_) => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn resolve_callees(&self, call: CallSiteId) -> Result<CalleeResolution<'_>, CodeError> {
        if call.0 >= self.calls.len() {
            return Err(CodeError::UnknownCallSite(call.0));
        }
        let targets = self.graph.callees(call);
        if targets.is_empty() {
            Ok(CalleeResolution::External)
        } else {
            Ok(CalleeResolution::Defined(
                targets.iter().map(|&i| &self.functions[i]).collect(),
            ))
        }
    }

    /// All (caller, call site) pairs whose site may target `fun`.
    pub fn resolve_callers(&self, fun: &FunctionId) -> Result<Vec<(&FunctionRecord, &CallSite)>, CodeError> {
        let &idx = self
            .fn_by_id
            .get(fun)
            .ok_or_else(|| CodeError::UnknownFunction(fun.0.clone()))?;
        Ok(self
            .graph
            .callers(idx)
            .iter()
            .map(|&site| {
                let call = &self.calls[site.0];
                let caller = &self.functions[self.fn_by_id[&call.caller_id]];
                (caller, call)
            })
            .collect())
    }

    /// 1-based line of a byte offset in `path`.
    pub fn line_of(&self, path: &str, byte: usize) -> Option<usize> {
        let &i = self.unit_by_path.get(path)?;
        let starts = &self.line_starts[i];
        Some(match starts.binary_search(&byte) {
            Ok(l) => l + 1,
            Err(l) => l,
        })
    }

    /// Byte offset of the first character of a 1-based line.
    pub fn line_start(&self, path: &str, line: usize) -> Option<usize> {
        let &i = self.unit_by_path.get(path)?;
        line.checked_sub(1).and_then(|l| self.line_starts[i].get(l).copied())
    }

    /// Call sites whose expression starts on the given 1-based line.
    pub fn calls_at_line(&self, path: &str, line: usize) -> Vec<&CallSite> {
        self.calls
            .iter()
            .filter(|c| {
                self.function(&c.caller_id).map(|f| f.path.as_str()) == Some(path)
                    && self.line_of(path, c.span.start) == Some(line)
            })
            .collect()
    }

    /// Total number of lines across all files.
    pub fn line_count(&self) -> usize {
        self.contents
            .iter()
            .map(|c| c.iter().filter(|&&b| b == b'\n').count() + usize::from(!c.ends_with(b"\n") && !c.is_empty()))
            .sum()
    }

    fn entity(&self, r: EntityRef) -> Entity<'_> {
        match r {
            EntityRef::Function(i) => Entity::Function(&self.functions[i]),
            EntityRef::Definition(i) => Entity::Definition(&self.definitions[i]),
        }
    }

    /// Looks up any entity by its id string.
    pub fn entity_by_id(&self, id: &str) -> Option<Entity<'_>> {
        if let Some(&i) = self.fn_by_id.get(&FunctionId(id.to_string())) {
            return Some(Entity::Function(&self.functions[i]));
        }
        self.definitions.iter().find(|d| d.id == id).map(Entity::Definition)
    }
}

fn extension_grammar(path: &str) -> Option<&'static dyn grammar::Grammar> {
    let ext = path.rsplit_once('.').map(|(_, e)| e)?;
    if ext.contains('/') {
        return None;
    }
    grammar::grammar_for_extension(ext)
}

fn parse_all(files: &[(String, Vec<u8>)], parallelism: usize) -> Vec<(&'static str, grammar::ParsedSource)> {
    let parse_one = |(path, bytes): &(String, Vec<u8>)| {
        let g = extension_grammar(path).expect("filtered to known extensions");
        (g.language(), g.parse(bytes))
    };
    crate::par::map_ordered(files, parallelism, parse_one)
}

fn slice_lossy(bytes: &[u8], span: Span) -> String {
    String::from_utf8_lossy(&bytes[span.start..span.end]).into_owned()
}

fn line_starts(bytes: &[u8]) -> Vec<usize> {
    std::iter::once(0)
        .chain(
            bytes
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == b'\n')
                .map(|(i, _)| i + 1),
        )
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CodebaseModel {
        CodebaseModel::from_sources(
            "demo",
            vec![
                (
                    "a.c",
                    "#include <stdio.h>\nstatic int init(int x) { return x; }\nint go(void) { printf(\"hi\"); return init(1) + go(); }\n",
                ),
                ("b.c", "static int init(int y) { return y * 2; }\nint other(int a, int b) { return init(a); }\n"),
                ("b.h", "#define LIMIT 4\nstruct babel_route { int metric; };\n"),
                ("notes.txt", "ignored"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn lookup_returns_byte_exact_definitions() {
        let m = model();
        let found = m.lookup_definition("babel_route");
        assert_eq!(found.len(), 1);
        let e = found[0];
        let bytes = m.file_bytes(e.path()).unwrap();
        assert_eq!(e.text().as_bytes(), &bytes[e.span().start..e.span().end]);
        assert!(m.lookup_definition("NO_SUCH_NAME").is_empty());
        assert_eq!(m.units().len(), 3);
    }

    #[test]
    fn ambiguous_static_callees_are_all_returned() {
        let m = model();
        let site = m
            .calls()
            .iter()
            .find(|c| c.callee_name == "init" && c.caller_id.0.starts_with("a.c"))
            .unwrap();
        let r = m.resolve_callees(site.id).unwrap();
        let paths: Vec<_> = r.functions().iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, vec!["a.c", "b.c"]);
    }

    #[test]
    fn printf_is_external_and_recursion_is_a_self_edge() {
        let m = model();
        let printf = m.calls().iter().find(|c| c.callee_name == "printf").unwrap();
        assert_eq!(m.resolve_callees(printf.id).unwrap(), CalleeResolution::External);
        let go = m.functions_named("go")[0];
        let callers = m.resolve_callers(&go.id).unwrap();
        assert_eq!(callers.len(), 1);
        assert_eq!(callers[0].0.id, go.id);
    }

    #[test]
    fn unknown_function_is_a_hard_error() {
        let m = model();
        assert!(matches!(
            m.resolve_callers(&FunctionId("nope".into())),
            Err(CodeError::UnknownFunction(_))
        ));
    }

    #[test]
    fn lines_are_one_based() {
        let m = model();
        assert_eq!(m.line_of("a.c", 0), Some(1));
        let go = m.functions_named("go")[0];
        assert_eq!(m.line_of("a.c", go.body_span.start), Some(3));
        assert_eq!(m.calls_at_line("a.c", 3).len(), 3);
        assert_eq!(m.line_start("a.c", 2), Some(19));
    }

    #[test]
    fn empty_input_is_an_error() {
        let files: Vec<(String, Vec<u8>)> = vec![("README".into(), b"x".to_vec())];
        assert!(matches!(
            CodebaseModel::from_sources("x", files),
            Err(CodeError::EmptyModel)
        ));
    }
}
