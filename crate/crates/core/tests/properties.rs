mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rfc_audit::code::{CodebaseModel, Span};
use rfc_audit::index::{build_index, load_index, persist_index, update_index, IndexOptions, SemanticIndex};
use rfc_audit::report::{group_reports, ImplicatedLocation, InconsistencyReport, Novelty, TriageStatus};

use common::constant_client;

const DIRS: [&str; 3] = ["", "net/", "net/core/"];

#[derive(Debug, Clone)]
struct GenFn {
    name: usize,
    arity: usize,
    variadic: bool,
    /// (callee name, argument count)
    calls: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct GenFile {
    dir: usize,
    fns: Vec<GenFn>,
}

fn gen_fn() -> impl Strategy<Value = GenFn> {
    (
        0usize..8,
        0usize..3,
        prop::bool::weighted(0.2),
        prop::collection::vec((0usize..10, 0usize..4), 0..5),
    )
        .prop_map(|(name, arity, variadic, calls)| GenFn {
            name,
            arity,
            variadic,
            calls,
        })
}

fn gen_repo() -> impl Strategy<Value = Vec<GenFile>> {
    prop::collection::vec(
        (0usize..DIRS.len(), prop::collection::vec(gen_fn(), 1..5)).prop_map(|(dir, mut fns)| {
            // Names are unique within a file.
            let mut seen = BTreeSet::new();
            fns.retain(|f| seen.insert(f.name));
            GenFile { dir, fns }
        }),
        1..5,
    )
}

fn render(repo: &[GenFile], salt: Option<(usize, usize)>) -> Vec<(String, String)> {
    repo.iter()
        .enumerate()
        .map(|(i, file)| {
            let mut src = String::from("#include <stdarg.h>\n");
            for (j, f) in file.fns.iter().enumerate() {
                let mut params: Vec<String> = (0..f.arity).map(|k| format!("int a{k}")).collect();
                if f.variadic {
                    if params.is_empty() {
                        params.push("int n".into());
                    }
                    params.push("...".into());
                }
                let params = if params.is_empty() {
                    "void".to_string()
                } else {
                    params.join(", ")
                };
                src.push_str(&format!("static int f{}({params})\n{{\n", f.name));
                if salt == Some((i, j)) {
                    src.push_str("    int edited = 1;\n");
                }
                for (callee, argc) in &f.calls {
                    let args: Vec<String> = (0..*argc).map(|k| k.to_string()).collect();
                    src.push_str(&format!("    f{callee}({});\n", args.join(", ")));
                }
                src.push_str("    return 0;\n}\n\n");
            }
            (format!("{}m{i}.c", DIRS[file.dir]), src)
        })
        .collect()
}

fn model_of(files: Vec<(String, String)>) -> CodebaseModel {
    CodebaseModel::from_sources("gen", files).expect("generated sources parse")
}

fn location(id: usize) -> ImplicatedLocation {
    ImplicatedLocation {
        entity_id: format!("src/x.c#f{id}@{id}"),
        function: format!("f{id}"),
        path: "src/x.c".into(),
        span: Span::new(id, id + 1),
        lines: (1, 1),
        snippet: String::new(),
    }
}

fn report(i: usize, ids: &BTreeSet<usize>) -> InconsistencyReport {
    InconsistencyReport {
        report_id: format!("R{i:03}"),
        property_id: format!("P:{i}"),
        rfc_section: "1".into(),
        statement: String::new(),
        excerpt: String::new(),
        explanation: String::new(),
        implicated: ids.iter().map(|&k| location(k)).collect(),
        transcript: String::new(),
        validated: true,
        confidence_note: String::new(),
        status: TriageStatus::Unreviewed,
        novelty: Novelty::Unknown,
    }
}

fn changed(a: &SemanticIndex, b: &SemanticIndex) -> BTreeSet<String> {
    b.nodes
        .values()
        .filter(|n| a.nodes.get(&n.node_id).is_none_or(|o| o.content_hash != n.content_hash))
        .map(|n| n.node_id.clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn callers_are_the_transpose_of_callees(repo in gen_repo()) {
        let m = model_of(render(&repo, None));
        let mut forward = BTreeSet::new();
        for c in m.calls() {
            for f in m.resolve_callees(c.id).unwrap().functions() {
                prop_assert_eq!(&f.name, &c.callee_name);
                let arity_ok = if f.variadic { c.arg_count >= f.arity } else { c.arg_count == f.arity };
                prop_assert!(arity_ok);
                forward.insert((c.id.0, f.id.0.clone()));
            }
        }
        let mut reverse = BTreeSet::new();
        for f in m.functions() {
            for (caller, site) in m.resolve_callers(&f.id).unwrap() {
                prop_assert_eq!(&caller.id, &site.caller_id);
                reverse.insert((site.id.0, f.id.0.clone()));
            }
        }
        prop_assert_eq!(forward, reverse);
    }

    #[test]
    fn one_edit_changes_exactly_the_root_path(repo in gen_repo(), pick in any::<prop::sample::Index>()) {
        let targets: Vec<(usize, usize)> = repo
            .iter()
            .enumerate()
            .flat_map(|(i, f)| (0..f.fns.len()).map(move |j| (i, j)))
            .collect();
        let (i, j) = targets[pick.index(targets.len())];
        let before = model_of(render(&repo, None));
        let after = model_of(render(&repo, Some((i, j))));
        let opts = IndexOptions::default();
        let base = build_index(&before, &constant_client("S."), &opts).unwrap().index;
        let client = constant_client("S2.");
        let out = update_index(&base, &after, &client, &opts).unwrap();

        let path = format!("{}m{i}.c", DIRS[repo[i].dir]);
        let mut expected = BTreeSet::from([
            format!("fn:{path}::f{}", repo[i].fns[j].name),
            format!("file:{path}"),
            "repo".to_string(),
        ]);
        let mut dir = String::new();
        for part in DIRS[repo[i].dir].split('/').filter(|p| !p.is_empty()) {
            dir = if dir.is_empty() { part.to_string() } else { format!("{dir}/{part}") };
            expected.insert(format!("dir:{dir}"));
        }
        prop_assert_eq!(changed(&base, &out.index), expected.clone());
        prop_assert_eq!(out.resummarized.iter().cloned().collect::<BTreeSet<_>>(), expected.clone());
        prop_assert_eq!(client.call_count(), expected.len());
    }

    #[test]
    fn index_survives_persist_and_load(repo in gen_repo()) {
        let m = model_of(render(&repo, None));
        let index = build_index(&m, &constant_client("Summary."), &IndexOptions::default()).unwrap().index;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        persist_index(&index, &path).unwrap();
        prop_assert_eq!(load_index(&path).unwrap(), index);
    }

    #[test]
    fn groups_partition_reports_by_shared_functions(
        sets in prop::collection::vec(prop::collection::btree_set(0usize..12, 1..4), 0..12)
    ) {
        let reports: Vec<InconsistencyReport> = sets.iter().enumerate().map(|(i, s)| report(i, s)).collect();
        let groups = group_reports(&reports);
        let mut owner = BTreeMap::new();
        for (g, group) in groups.iter().enumerate() {
            for m in &group.members {
                prop_assert!(owner.insert(m.clone(), g).is_none(), "{} in two groups", m);
            }
        }
        prop_assert_eq!(owner.len(), reports.len());
        for a in &reports {
            for b in &reports {
                if !a.function_set().is_disjoint(&b.function_set()) {
                    prop_assert_eq!(owner[&a.report_id], owner[&b.report_id]);
                }
            }
        }
        // Groups never share a location, so nothing could merge them.
        for (x, gx) in groups.iter().enumerate() {
            for gy in &groups[x + 1..] {
                let lx: BTreeSet<&String> = gx.locations.iter().collect();
                prop_assert!(gy.locations.iter().all(|l| !lx.contains(l)));
            }
        }
    }
}
