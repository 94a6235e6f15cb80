//! The three retrieval tools, answered from the code model.

use super::protocol::ToolInvocation;
use crate::code::{CalleeResolution, CodebaseModel, Entity, FunctionRecord};

/// Result of one tool call. `entities` is empty when nothing matched;
/// `message` then explains why, for the model to read.
#[derive(Debug, Clone)]
pub struct ToolObservation<'m> {
    pub entities: Vec<Entity<'m>>,
    pub message: Option<String>,
    /// The request itself was unusable (unknown caller, wrong line, ...).
    pub is_error: bool,
}

impl<'m> ToolObservation<'m> {
    fn found(entities: Vec<Entity<'m>>) -> Self {
        ToolObservation {
            entities,
            message: None,
            is_error: false,
        }
    }

    fn not_found(message: String) -> Self {
        ToolObservation {
            entities: Vec::new(),
            message: Some(format!("not found: {message}")),
            is_error: false,
        }
    }

    fn error(message: String) -> Self {
        ToolObservation {
            entities: Vec::new(),
            message: Some(format!("error: {message}")),
            is_error: true,
        }
    }
}

fn path_matches(actual: &str, wanted: &str) -> bool {
    let wanted = wanted.trim_start_matches("./");
    actual == wanted || actual.ends_with(&format!("/{wanted}"))
}

/// Runs a tool. `is_gathered` tells which entity ids are already in the
/// agent's context; a caller name that is ambiguous is resolved to the
/// gathered definition when there is one.
pub fn execute_tool<'m>(
    invocation: &ToolInvocation,
    model: &'m CodebaseModel,
    is_gathered: &dyn Fn(&str) -> bool,
) -> ToolObservation<'m> {
    match invocation {
        ToolInvocation::Query { name } => {
            let defs = model.lookup_type_or_macro(name);
            if !defs.is_empty() {
                return ToolObservation::found(defs.into_iter().map(Entity::Definition).collect());
            }
            let funs = model.functions_named(name);
            if !funs.is_empty() {
                return ToolObservation::found(funs.into_iter().map(Entity::Function).collect());
            }
            ToolObservation::not_found(format!("no definition named {name} in the repository"))
        }
        ToolInvocation::QueryCallee { caller, callee, line } => query_callee(model, caller, callee, *line, is_gathered),
        ToolInvocation::QueryCaller { function, path } => {
            let targets: Vec<&FunctionRecord> = model
                .functions_named(function)
                .into_iter()
                .filter(|f| path.as_deref().is_none_or(|p| path_matches(&f.path, p)))
                .collect();
            if targets.is_empty() {
                return ToolObservation::error(match path {
                    Some(p) => format!("no function {function} defined in {p}"),
                    None => format!("no function named {function} in the repository"),
                });
            }
            let mut out: Vec<Entity<'m>> = Vec::new();
            for t in targets {
                let callers = model.resolve_callers(&t.id).unwrap_or_default();
                for (caller, _) in callers {
                    if !out.iter().any(|e| e.id() == caller.id.0) {
                        out.push(Entity::Function(caller));
                    }
                }
            }
            if out.is_empty() {
                ToolObservation::not_found(format!("no callers of {function} in the repository"))
            } else {
                ToolObservation::found(out)
            }
        }
    }
}

fn query_callee<'m>(
    model: &'m CodebaseModel,
    caller: &str,
    callee: &str,
    line: Option<usize>,
    is_gathered: &dyn Fn(&str) -> bool,
) -> ToolObservation<'m> {
    let mut callers = model.functions_named(caller);
    if callers.is_empty() {
        return ToolObservation::error(format!("no function named {caller} in the repository"));
    }
    if callers.iter().any(|f| is_gathered(&f.id.0)) {
        callers.retain(|f| is_gathered(&f.id.0));
    }
    let mut sites = Vec::new();
    let mut other_lines = Vec::new();
    for f in &callers {
        for call in model.calls_from(&f.id) {
            if call.callee_name != callee {
                continue;
            }
            let call_line = model.line_of(&f.path, call.span.start).unwrap_or(0);
            if line.is_none_or(|l| l == call_line) {
                sites.push(call);
            } else {
                other_lines.push(call_line);
            }
        }
    }
    if sites.is_empty() {
        return ToolObservation::error(match (line, other_lines.is_empty()) {
            (Some(l), false) => format!(
                "{caller} does not call {callee} at line {l}; it does at line(s) {}",
                other_lines.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
            ),
            _ => format!("{caller} does not call {callee}"),
        });
    }
    let mut out: Vec<Entity<'m>> = Vec::new();
    for site in sites {
        if let Ok(CalleeResolution::Defined(funs)) = model.resolve_callees(site.id) {
            for f in funs {
                if !out.iter().any(|e| e.id() == f.id.0) {
                    out.push(Entity::Function(f));
                }
            }
        }
    }
    if out.is_empty() {
        // Function-like macros look like calls.
        let macros = model.lookup_type_or_macro(callee);
        if !macros.is_empty() {
            return ToolObservation::found(macros.into_iter().map(Entity::Definition).collect());
        }
        return ToolObservation::not_found(format!(
            "{callee} is not defined in the repository (library call or call through a pointer)"
        ));
    }
    ToolObservation::found(out)
}
