//! Layered configuration: defaults, then the TOML file, then command-line
//! flags, then environment variables. Later layers win.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub repo: Option<PathBuf>,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub index_path: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub llm: LlmConfig,
    pub agent: AgentSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// live, record, replay or mock.
    pub backend: String,
    /// Backend wrapped by `record`: live or mock.
    pub record_from: String,
    pub cassette: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    pub index_model: String,
    pub extraction_model: String,
    pub detection_model: String,
    pub parallelism: usize,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub timeout_secs: u64,
    pub api_base: String,
    pub input_usd_per_million: f64,
    pub output_usd_per_million: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    pub max_retrieval: usize,
    pub max_gathered: usize,
    pub token_budget: u64,
    pub context_token_budget: u64,
    pub fanout_directories: usize,
    pub fanout_files: usize,
    pub fanout_functions: usize,
    pub no_semantic_index: bool,
    pub no_retrieval: bool,
    pub no_validation: bool,
    /// query, callee or caller.
    pub disabled_tools: Vec<String>,
}

const DEFAULT_MODEL: &str = "claude-3-5-sonnet-20241022";

impl Default for Config {
    fn default() -> Self {
        Config {
            repo: None,
            include: vec!["**/*.c".into(), "**/*.h".into()],
            exclude: Vec::new(),
            index_path: None,
            prompts_dir: None,
            llm: LlmConfig::default(),
            agent: AgentSettings::default(),
        }
    }
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            backend: "live".into(),
            record_from: "live".into(),
            cassette: None,
            mock_script: None,
            index_model: DEFAULT_MODEL.into(),
            extraction_model: DEFAULT_MODEL.into(),
            detection_model: DEFAULT_MODEL.into(),
            parallelism: 4,
            max_retries: 3,
            retry_base_ms: 500,
            timeout_secs: 300,
            api_base: "https://api.anthropic.com".into(),
            input_usd_per_million: 3.0,
            output_usd_per_million: 15.0,
        }
    }
}

impl Default for AgentSettings {
    fn default() -> Self {
        AgentSettings {
            max_retrieval: 6,
            max_gathered: 25,
            token_budget: 400_000,
            context_token_budget: 60_000,
            fanout_directories: 4,
            fanout_files: 6,
            fanout_functions: 8,
            no_semantic_index: false,
            no_retrieval: false,
            no_validation: false,
            disabled_tools: Vec::new(),
        }
    }
}

/// Environment variables and the dotted config key each one sets.
pub const ENV_KEYS: &[(&str, &str)] = &[
    ("RFC_AUDIT_BACKEND", "llm.backend"),
    ("RFC_AUDIT_CASSETTE", "llm.cassette"),
    ("RFC_AUDIT_MOCK_SCRIPT", "llm.mock_script"),
    ("RFC_AUDIT_MODEL", "llm.detection_model"),
    ("RFC_AUDIT_INDEX_MODEL", "llm.index_model"),
    ("RFC_AUDIT_EXTRACTION_MODEL", "llm.extraction_model"),
    ("RFC_AUDIT_PARALLELISM", "llm.parallelism"),
    ("RFC_AUDIT_API_BASE", "llm.api_base"),
];

/// One layer of overrides, keyed by dotted path.
#[derive(Debug, Clone, Default)]
pub struct Layer {
    entries: Vec<(String, Value)>,
}

impl Layer {
    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn set_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn set_path(&mut self, key: &str, value: Option<&Path>) {
        if let Some(p) = value {
            self.set(key, p.display().to_string());
        }
    }

    fn to_table(&self) -> Table {
        let mut table = Table::new();
        for (key, value) in &self.entries {
            let mut parts: Vec<&str> = key.split('.').collect();
            let last = parts.pop().expect("non-empty key");
            let mut t = &mut table;
            for p in parts {
                t = t
                    .entry(p.to_string())
                    .or_insert_with(|| Value::Table(Table::new()))
                    .as_table_mut()
                    .expect("config key prefix is a table");
            }
            t.insert(last.to_string(), value.clone());
        }
        table
    }

    /// Reads the known environment variables through `get`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut layer = Layer::default();
        for (var, key) in ENV_KEYS {
            if let Some(raw) = get(var) {
                let value = if *key == "llm.parallelism" {
                    Value::Integer(
                        raw.parse::<i64>()
                            .map_err(|_| format!("{var} must be an integer, got {raw:?}"))?,
                    )
                } else {
                    Value::String(raw)
                };
                layer.set(key, value);
            }
        }
        Ok(layer)
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl Config {
    /// defaults ⊕ file ⊕ flags ⊕ env.
    pub fn layered(file: Option<&str>, flags: &Layer, env: &Layer) -> Result<Config, String> {
        let mut table = Table::try_from(Config::default()).map_err(|e| e.to_string())?;
        if let Some(text) = file {
            let parsed: Table = text.parse().map_err(|e: toml::de::Error| format!("config file: {e}"))?;
            // Validate the file on its own so errors name file keys.
            Config::deserialize(Value::Table(parsed.clone())).map_err(|e| format!("config file: {e}"))?;
            merge(&mut table, parsed);
        }
        merge(&mut table, flags.to_table());
        merge(&mut table, env.to_table());
        let config = Config::deserialize(Value::Table(table)).map_err(|e| format!("configuration: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.llm.backend.as_str() {
            "live" | "record" | "replay" | "mock" => {}
            other => {
                return Err(format!(
                    "unknown backend {other:?} (expected live, record, replay or mock)"
                ))
            }
        }
        match self.llm.record_from.as_str() {
            "live" | "mock" => {}
            other => return Err(format!("unknown record_from {other:?} (expected live or mock)")),
        }
        if matches!(self.llm.backend.as_str(), "record" | "replay") && self.llm.cassette.is_none() {
            return Err(format!("backend {} needs a cassette path", self.llm.backend));
        }
        let mock_needed =
            self.llm.backend == "mock" || (self.llm.backend == "record" && self.llm.record_from == "mock");
        if mock_needed && self.llm.mock_script.is_none() {
            return Err("the mock backend needs a mock_script path".into());
        }
        if self.llm.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        for t in &self.agent.disabled_tools {
            if parse_tool(t).is_none() {
                return Err(format!("unknown tool {t:?} (expected query, callee or caller)"));
            }
        }
        if self.llm.input_usd_per_million < 0.0 || self.llm.output_usd_per_million < 0.0 {
            return Err("token rates must not be negative".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_tool(name: &str) -> Option<rfc_audit::agent::ToolKind> {
    use rfc_audit::agent::ToolKind;
    match name {
        "query" => Some(ToolKind::Query),
        "callee" | "query_callee" => Some(ToolKind::QueryCallee),
        "caller" | "query_caller" => Some(ToolKind::QueryCaller),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_layers_win() {
        let file = "[llm]\nbackend = \"mock\"\nmock_script = \"m.json\"\nparallelism = 2\n[agent]\nmax_retrieval = 3\n";
        let mut flags = Layer::default();
        flags.set("agent.max_retrieval", 5i64);
        flags.set("llm.parallelism", 3i64);
        let env = Layer::from_env(|k| (k == "RFC_AUDIT_PARALLELISM").then(|| "7".to_string())).unwrap();
        let c = Config::layered(Some(file), &flags, &env).unwrap();
        assert_eq!(c.llm.backend, "mock");
        assert_eq!(c.agent.max_retrieval, 5);
        assert_eq!(c.llm.parallelism, 7);
        assert_eq!(c.agent.max_gathered, 25);
    }

    #[test]
    fn rejects_bad_values() {
        let none = Layer::default();
        assert!(Config::layered(Some("[llm]\nbackend = \"magic\"\n"), &none, &none).is_err());
        assert!(Config::layered(Some("unknown_key = 1\n"), &none, &none).is_err());
        assert!(Config::layered(Some("[llm]\nbackend = \"replay\"\n"), &none, &none).is_err());
        assert!(Layer::from_env(|_| Some("x".into())).is_err());
    }

    #[test]
    fn show_round_trips() {
        let c = Config::default();
        let none = Layer::default();
        assert_eq!(Config::layered(Some(&c.to_toml()), &none, &none).unwrap(), c);
    }
}
