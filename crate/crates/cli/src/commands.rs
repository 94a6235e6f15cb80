use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rfc_audit::agent::{self, AgentConfig, Fanout, NavTree, PropertyStatus};
use rfc_audit::code::{scan_repository, CodebaseModel, ScanOptions};
use rfc_audit::index::{build_index, load_index, persist_index, update_index, IndexOptions};
use rfc_audit::llm::{
    Backend, Cassette, LiveBackend, LiveConfig, LlmClient, MockScript, Rates, RecordBackend, ReplayBackend,
    RetryPolicy, ScriptedBackend,
};
use rfc_audit::prompts::PromptSet;
use rfc_audit::report::{group_reports, render, Format, Triage};
use rfc_audit::rfc::{extract_all, parse_rfc, ExtractOptions, PropertiesFile};
use rfc_audit::{CodeError, IndexError};
use serde_json::json;

use crate::config::{parse_tool, Config, Layer};
use crate::{AuditArgs, Cli, Command, ConfigCommand, IndexArgs, PropertiesArgs, RepoArgs, ReportArgs, ToolCommand};

/// How a command ended. Maps onto the exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Debug, Default)]
struct Done {
    diagnostics: Vec<String>,
    details: serde_json::Value,
}

struct Session {
    config: Config,
    status_path: Option<PathBuf>,
}

pub fn run(cli: Cli) -> u8 {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let command_name = match &cli.command {
        Command::Index(_) => "index",
        Command::Properties(_) => "properties",
        Command::Audit(_) => "audit",
        Command::Report(_) => "report",
        Command::Tools { .. } => "tools",
        Command::Config { .. } => "config",
    };
    let mut status_path = cli.global.status.clone().or_else(|| default_status_path(&cli.command));
    let result = configure(&cli).and_then(|config| {
        let mut session = Session {
            config,
            status_path: status_path.clone(),
        };
        let r = dispatch(&cli.command, &mut session);
        status_path = session.status_path;
        r
    });
    let (code, outcome, message, diagnostics, details) = match result {
        Ok(done) if done.diagnostics.is_empty() => (0u8, "ok", String::new(), done.diagnostics, done.details),
        Ok(done) => {
            for d in &done.diagnostics {
                eprintln!("warning: {d}");
            }
            (1, "diagnostics", String::new(), done.diagnostics, done.details)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("hint: run `rfc-audit {command_name} --help` for usage");
            (2, "usage-error", m, Vec::new(), serde_json::Value::Null)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            (3, "error", m, Vec::new(), serde_json::Value::Null)
        }
    };
    if let Some(path) = status_path {
        let status = json!({
            "command": command_name,
            "outcome": outcome,
            "exit_code": code,
            "message": message,
            "diagnostics": diagnostics,
            "details": details,
            "started_unix": started_unix,
            "elapsed_ms": started.elapsed().as_millis() as u64,
        });
        let text = serde_json::to_string_pretty(&status).expect("status serializes") + "\n";
        if let Err(e) = rfc_audit::write_atomic(&path, text.as_bytes()) {
            eprintln!("error: cannot write status file {}: {e}", path.display());
        }
    }
    code
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".status.json");
    PathBuf::from(s)
}

fn default_status_path(command: &Command) -> Option<PathBuf> {
    match command {
        Command::Index(a) => a.out.as_deref().map(sidecar),
        Command::Properties(a) => Some(sidecar(&a.out)),
        Command::Audit(a) => Some(run_dir(&a.out).join("status.json")),
        Command::Report(a) => a.out.as_deref().map(sidecar),
        _ => None,
    }
}

fn run_dir(out: &Path) -> PathBuf {
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn repo_layer(layer: &mut Layer, repo: &RepoArgs) {
    layer.set_path("repo", repo.repo.as_deref());
    if !repo.include.is_empty() {
        layer.set("include", repo.include.clone());
    }
    if !repo.exclude.is_empty() {
        layer.set("exclude", repo.exclude.clone());
    }
}

fn configure(cli: &Cli) -> Result<Config, Failure> {
    let g = &cli.global;
    let config_path = g
        .config
        .clone()
        .or_else(|| std::env::var_os("RFC_AUDIT_CONFIG").map(PathBuf::from));
    let file_text = match &config_path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| usage(format!("config file {}: {e}", p.display())))?),
        None => None,
    };
    let mut flags = Layer::default();
    flags.set_opt("llm.backend", g.backend.clone());
    flags.set_path("llm.cassette", g.cassette.as_deref());
    flags.set_path("llm.mock_script", g.mock_script.as_deref());
    flags.set_opt("llm.parallelism", g.parallelism.map(|p| p as i64));
    flags.set_opt("llm.detection_model", g.model.clone());
    match &cli.command {
        Command::Index(a) => repo_layer(&mut flags, &a.repo),
        Command::Audit(a) => {
            repo_layer(&mut flags, &a.repo);
            flags.set_path("index_path", a.index.as_deref());
            if a.no_semantic_index {
                flags.set("agent.no_semantic_index", true);
            }
            if a.no_retrieval {
                flags.set("agent.no_retrieval", true);
            }
            if a.no_validation {
                flags.set("agent.no_validation", true);
            }
            if !a.disable_tool.is_empty() {
                flags.set("agent.disabled_tools", a.disable_tool.clone());
            }
            flags.set_opt("agent.max_retrieval", a.max_retrieval.map(|n| n as i64));
        }
        Command::Tools { tool } => match tool {
            ToolCommand::Def { repo, .. } | ToolCommand::Callers { repo, .. } | ToolCommand::Callees { repo, .. } => {
                repo_layer(&mut flags, repo)
            }
        },
        Command::Config {
            action: ConfigCommand::Show { repo },
        } => repo_layer(&mut flags, repo),
        _ => {}
    }
    let env = Layer::from_env(|k| std::env::var(k).ok()).map_err(usage)?;
    Config::layered(file_text.as_deref(), &flags, &env).map_err(usage)
}

fn dispatch(command: &Command, s: &mut Session) -> Result<Done, Failure> {
    match command {
        Command::Index(a) => index(a, s),
        Command::Properties(a) => properties(a, s),
        Command::Audit(a) => audit(a, s),
        Command::Report(a) => report(a),
        Command::Tools { tool } => tools(tool, s),
        Command::Config {
            action: ConfigCommand::Show { .. },
        } => {
            print!("{}", s.config.to_toml());
            Ok(Done::default())
        }
    }
}

fn prompts(config: &Config) -> Result<PromptSet, Failure> {
    match &config.prompts_dir {
        Some(dir) => PromptSet::with_overrides(dir).map_err(usage),
        None => Ok(PromptSet::default()),
    }
}

fn build_client(config: &Config) -> Result<LlmClient, Failure> {
    let llm = &config.llm;
    let live = || {
        LiveBackend::from_env(LiveConfig {
            api_base: llm.api_base.clone(),
            timeout: Duration::from_secs(llm.timeout_secs),
        })
        .map_err(usage)
    };
    let mock = || -> Result<ScriptedBackend, Failure> {
        let path = llm
            .mock_script
            .as_deref()
            .ok_or_else(|| usage("mock backend needs --mock-script"))?;
        Ok(ScriptedBackend::new(MockScript::load(path).map_err(usage)?))
    };
    let backend: Arc<dyn Backend> = match llm.backend.as_str() {
        "live" => Arc::new(live()?),
        "mock" => Arc::new(mock()?),
        "replay" => {
            let path = llm
                .cassette
                .as_deref()
                .ok_or_else(|| usage("replay needs --cassette"))?;
            Arc::new(ReplayBackend::new(Cassette::load(path).map_err(usage)?))
        }
        "record" => {
            let path = llm.cassette.clone().ok_or_else(|| usage("record needs --cassette"))?;
            let inner: Box<dyn Backend> = if llm.record_from == "mock" {
                Box::new(mock()?)
            } else {
                Box::new(live()?)
            };
            Arc::new(RecordBackend::new(inner, path))
        }
        other => return Err(usage(format!("unknown backend {other}"))),
    };
    Ok(LlmClient::new(backend)
        .with_parallelism(llm.parallelism)
        .with_retry(RetryPolicy {
            max_retries: llm.max_retries,
            base_delay: Duration::from_millis(llm.retry_base_ms),
        })
        .with_rates(Rates {
            input_per_million: llm.input_usd_per_million,
            output_per_million: llm.output_usd_per_million,
        }))
}

fn scan(config: &Config) -> Result<CodebaseModel, Failure> {
    let repo = config.repo.as_deref().ok_or_else(|| usage("missing --repo"))?;
    let opts = ScanOptions {
        include: config.include.clone(),
        exclude: config.exclude.clone(),
        parallelism: config.llm.parallelism,
    };
    scan_repository(repo, &opts).map_err(|e| match e {
        CodeError::Root { .. } | CodeError::Glob(_) | CodeError::EmptyModel => usage(e),
        other => runtime(other),
    })
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn index(a: &IndexArgs, s: &mut Session) -> Result<Done, Failure> {
    let config = &s.config;
    let out = a
        .out
        .clone()
        .or_else(|| config.index_path.clone())
        .ok_or_else(|| usage("missing --out"))?;
    if s.status_path.is_none() {
        s.status_path = Some(sidecar(&out));
    }
    let model = scan(config)?;
    let client = build_client(config)?;
    let opts = IndexOptions {
        model_tag: config.llm.index_model.clone(),
        prompts: prompts(config)?,
        ..IndexOptions::default()
    };
    let outcome = if out.exists() && !a.rebuild {
        let previous = load_index(&out).map_err(|e| match e {
            IndexError::Version { .. } => runtime(format!("{e}; rerun with --rebuild")),
            other => runtime(other),
        })?;
        update_index(&previous, &model, &client, &opts).map_err(|e| match e {
            IndexError::RootMismatch { .. } => usage(format!("{e}; use --rebuild or a different --out")),
            other => runtime(other),
        })?
    } else {
        build_index(&model, &client, &opts).map_err(runtime)?
    };
    client.finish().map_err(runtime)?;
    persist_index(&outcome.index, &out).map_err(runtime)?;
    let mut diagnostics: Vec<String> = model
        .diagnostics()
        .iter()
        .map(|d| format!("skipped {}: {}", d.path, d.message))
        .collect();
    for id in outcome.index.missing_summaries() {
        diagnostics.push(format!("no summary for {id}"));
    }
    eprintln!(
        "indexed {} functions in {} files: {} model calls, {} reused, {} removed",
        model.functions().len(),
        model.units().len(),
        outcome.llm_calls,
        outcome.reused,
        outcome.removed.len()
    );
    Ok(Done {
        diagnostics,
        details: json!({
            "index": out,
            "functions": model.functions().len(),
            "files": model.units().len(),
            "nodes": outcome.index.nodes.len(),
            "llm_calls": outcome.llm_calls,
            "resummarized": outcome.resummarized,
            "reused": outcome.reused,
            "removed": outcome.removed,
            "usage": outcome.usage,
        }),
    })
}

fn properties(a: &PropertiesArgs, s: &mut Session) -> Result<Done, Failure> {
    let config = &s.config;
    let bytes = read_input(&a.rfc)?;
    let text = String::from_utf8_lossy(&bytes);
    let doc = parse_rfc(&text);
    let client = build_client(config)?;
    let opts = ExtractOptions {
        model_tag: config.llm.extraction_model.clone(),
        keyword_filter: !a.no_keyword_filter,
        prompts: prompts(config)?,
        ..ExtractOptions::default()
    };
    let file = extract_all(&doc, &client, &opts);
    client.finish().map_err(runtime)?;
    rfc_audit::write_atomic(&a.out, file.to_json().as_bytes())
        .map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    let mut diagnostics: Vec<String> = file.document.warnings.clone();
    diagnostics.extend(file.diagnostics.iter().cloned());
    for sec in file.unprocessed() {
        diagnostics.push(format!(
            "section {} unprocessed: {}",
            sec.number,
            sec.reason.as_deref().unwrap_or("unknown reason")
        ));
    }
    eprintln!(
        "{}: {} sections, {} properties",
        file.document.rfc_id,
        file.sections.len(),
        file.properties.len()
    );
    Ok(Done {
        diagnostics,
        details: json!({
            "rfc_id": file.document.rfc_id,
            "sections": file.sections.len(),
            "properties": file.properties.len(),
            "usage": file.usage,
        }),
    })
}

fn agent_config(config: &Config) -> Result<AgentConfig, Failure> {
    let a = &config.agent;
    let mut disabled = std::collections::BTreeSet::new();
    for t in &a.disabled_tools {
        disabled.insert(parse_tool(t).ok_or_else(|| usage(format!("unknown tool {t}")))?);
    }
    Ok(AgentConfig {
        model_tag: config.llm.detection_model.clone(),
        max_retrieval: a.max_retrieval,
        max_gathered: a.max_gathered,
        token_budget: a.token_budget,
        context_token_budget: a.context_token_budget,
        fanout: Fanout {
            directories: a.fanout_directories,
            files: a.fanout_files,
            functions: a.fanout_functions,
        },
        ablation: agent::Ablation {
            no_semantic_index: a.no_semantic_index,
            no_retrieval: a.no_retrieval,
            no_validation: a.no_validation,
            disabled_tools: disabled,
        },
        prompts: prompts(config)?,
        ..AgentConfig::default()
    })
}

fn audit(a: &AuditArgs, s: &mut Session) -> Result<Done, Failure> {
    let config = &s.config;
    let props = PropertiesFile::from_json_bytes(&read_input(&a.props)?).map_err(runtime)?;
    let model = scan(config)?;
    let agent_config = agent_config(config)?;
    let (tree, index_usage) = if agent_config.ablation.no_semantic_index {
        (NavTree::from_model(&model), None)
    } else {
        let path = config.index_path.as_deref().ok_or_else(|| usage("missing --index"))?;
        read_input(path)?;
        let index = load_index(path).map_err(runtime)?;
        if index.root_label != model.root_label() {
            return Err(usage(format!(
                "index {} was built for {:?}, not {:?}",
                path.display(),
                index.root_label,
                model.root_label()
            )));
        }
        (NavTree::from_index(&index, &model), Some(index.usage))
    };
    let selected: Vec<_> = props
        .properties
        .iter()
        .filter(|p| a.only.is_empty() || a.only.contains(&p.property_id))
        .cloned()
        .collect();
    if let Some(missing) = a
        .only
        .iter()
        .find(|id| !props.properties.iter().any(|p| &p.property_id == *id))
    {
        return Err(usage(format!("unknown property {missing}")));
    }
    let client = build_client(config)?;
    let (mut run, outcomes) =
        agent::run_audit(&props.document.rfc_id, &selected, &tree, &model, &client, &agent_config);
    client.finish().map_err(runtime)?;
    run.set_upstream_usage(index_usage, Some(props.usage));
    agent::write_run_dir(&run_dir(&a.out), &a.out, &run, &outcomes).map_err(runtime)?;
    eprintln!(
        "{} properties: {} conformant, {} violation, {} inconclusive, {} failed; {} reports",
        run.properties.len(),
        run.count(PropertyStatus::Conformant),
        run.count(PropertyStatus::Violation),
        run.count(PropertyStatus::Inconclusive),
        run.count(PropertyStatus::Failed),
        run.reports.len()
    );
    Ok(Done {
        diagnostics: run.warnings.clone(),
        details: json!({
            "run": a.out,
            "properties": run.properties.len(),
            "conformant": run.count(PropertyStatus::Conformant),
            "violation": run.count(PropertyStatus::Violation),
            "inconclusive": run.count(PropertyStatus::Inconclusive),
            "failed": run.count(PropertyStatus::Failed),
            "reports": run.reports.len(),
            "tool_executions": run.tool_executions(),
            "usage": run.usage,
        }),
    })
}

fn report(a: &ReportArgs) -> Result<Done, Failure> {
    let format: Format = a.format.parse().map_err(usage)?;
    let mut run = agent::AuditRun::from_json_bytes(&read_input(&a.run)?).map_err(runtime)?;
    if let Some(t) = &a.triage {
        let triage = Triage::from_json_bytes(&read_input(t)?).map_err(usage)?;
        triage.apply(&mut run.reports).map_err(usage)?;
    }
    let groups = group_reports(&run.reports);
    let text = render(&run, &groups, format);
    match &a.out {
        Some(path) => {
            rfc_audit::write_atomic(path, text.as_bytes()).map_err(|e| runtime(format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(Done {
        diagnostics: Vec::new(),
        details: json!({ "reports": run.reports.len(), "groups": groups.len() }),
    })
}

fn tools(tool: &ToolCommand, s: &mut Session) -> Result<Done, Failure> {
    use rfc_audit::agent::{execute_tool, ToolInvocation};
    let model = scan(&s.config)?;
    let invocation = match tool {
        ToolCommand::Def { name, .. } => ToolInvocation::Query { name: name.clone() },
        ToolCommand::Callers { function, path, .. } => ToolInvocation::QueryCaller {
            function: function.clone(),
            path: path.clone(),
        },
        ToolCommand::Callees {
            caller, callee, line, ..
        } => ToolInvocation::QueryCallee {
            caller: caller.clone(),
            callee: callee.clone(),
            line: *line,
        },
    };
    let obs = execute_tool(&invocation, &model, &|_| false);
    for e in &obs.entities {
        let span = e.span();
        let first = model.line_of(e.path(), span.start).unwrap_or(0);
        let last = model.line_of(e.path(), span.end.saturating_sub(1)).unwrap_or(first);
        println!("== {} {} {}:{}-{}", e.kind_label(), e.name(), e.path(), first, last);
        println!("{}", e.text());
    }
    if let Some(m) = &obs.message {
        println!("{m}");
    }
    Ok(Done {
        diagnostics: if obs.is_error {
            vec![obs
                .message
                .as_deref()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string()]
        } else {
            Vec::new()
        },
        details: json!({ "results": obs.entities.len() }),
    })
}
