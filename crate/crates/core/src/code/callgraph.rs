use std::collections::HashMap;

use super::{CallSite, CallSiteId, FunctionRecord};

/// Name+arity call graph. Forward edges map each call site to every
/// candidate definition; the reverse index is its exact transpose.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    forward: Vec<Vec<usize>>,
    reverse: Vec<Vec<CallSiteId>>,
}

/// Whether a definition can be the target of a call with `arg_count`
/// arguments. Variadic definitions accept any count at or above their fixed
/// arity.
pub fn arity_compatible(fun: &FunctionRecord, arg_count: usize) -> bool {
    if fun.variadic {
        arg_count >= fun.arity
    } else {
        arg_count == fun.arity
    }
}

impl CallGraph {
    pub(crate) fn build(functions: &[FunctionRecord], calls: &[CallSite]) -> Self {
        let mut by_name: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, f) in functions.iter().enumerate() {
            by_name.entry(f.name.as_str()).or_default().push(i);
        }
        let mut forward = Vec::with_capacity(calls.len());
        let mut reverse = vec![Vec::new(); functions.len()];
        for call in calls {
            let targets: Vec<usize> = if call.indirect {
                Vec::new()
            } else {
                by_name
                    .get(call.callee_name.as_str())
                    .map(|cands| {
                        cands
                            .iter()
                            .copied()
                            .filter(|&i| arity_compatible(&functions[i], call.arg_count))
                            .collect()
                    })
                    .unwrap_or_default()
            };
            for &t in &targets {
                reverse[t].push(call.id);
            }
            forward.push(targets);
        }
        CallGraph { forward, reverse }
    }

    /// Indices (into the model's function list) of candidate callees.
    pub fn callees(&self, call: CallSiteId) -> &[usize] {
        self.forward.get(call.0).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Call sites that may target the function at `function_index`.
    pub fn callers(&self, function_index: usize) -> &[CallSiteId] {
        self.reverse.get(function_index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_count(&self) -> usize {
        self.forward.iter().map(Vec::len).sum()
    }

    /// All (call site, callee index) edges in call-site order.
    pub fn edges(&self) -> impl Iterator<Item = (CallSiteId, usize)> + '_ {
        self.forward
            .iter()
            .enumerate()
            .flat_map(|(site, ts)| ts.iter().map(move |&t| (CallSiteId(site), t)))
    }
}
