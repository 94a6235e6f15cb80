//! Editable prompt templates.
//!
//! Each template is a text asset with a `[system]` part and a `[user]` part;
//! `{{name}}` placeholders are substituted at render time. The shipped set is
//! compiled in; a directory of same-named `.txt` files overrides it.

use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    system: String,
    user: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub system: String,
    pub user: String,
}

impl Template {
    pub fn parse(name: &str, text: &str) -> Result<Self, String> {
        let text = text.replace("\r\n", "\n");
        let rest = text
            .strip_prefix("[system]\n")
            .ok_or_else(|| format!("template {name}: must start with a [system] line"))?;
        let (system, user) = rest
            .split_once("\n[user]\n")
            .ok_or_else(|| format!("template {name}: missing [user] line"))?;
        Ok(Template {
            name: name.to_string(),
            system: system.trim_end().to_string(),
            user: user.trim_end().to_string(),
        })
    }

    pub fn render(&self, vars: &[(&str, &str)]) -> Rendered {
        Rendered {
            system: substitute(&self.system, vars),
            user: substitute(&self.user, vars),
        }
    }

    /// Placeholder names used by the template.
    pub fn placeholders(&self) -> Vec<String> {
        let mut out = Vec::new();
        for part in [&self.system, &self.user] {
            let mut rest = part.as_str();
            while let Some(i) = rest.find("{{") {
                rest = &rest[i + 2..];
                if let Some(j) = rest.find("}}") {
                    let name = rest[..j].to_string();
                    if !out.contains(&name) {
                        out.push(name);
                    }
                    rest = &rest[j + 2..];
                }
            }
        }
        out
    }
}

/// Single pass: substituted values are never rescanned, so text that
/// happens to contain `{{...}}` (code, RFC prose) is inserted verbatim.
fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(i) = rest.find("{{") {
        out.push_str(&rest[..i]);
        let after = &rest[i + 2..];
        match after.find("}}") {
            Some(j) => {
                let key = &after[..j];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[j + 2..];
            }
            None => {
                out.push_str(&rest[i..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

const SHIPPED: &[(&str, &str)] = &[
    ("index_function", include_str!("../prompts/index_function.txt")),
    ("index_file", include_str!("../prompts/index_file.txt")),
    ("index_directory", include_str!("../prompts/index_directory.txt")),
    ("index_repo", include_str!("../prompts/index_repo.txt")),
    ("rfc_extract", include_str!("../prompts/rfc_extract.txt")),
    ("agent_localize", include_str!("../prompts/agent_localize.txt")),
    ("agent_detect", include_str!("../prompts/agent_detect.txt")),
    ("agent_retrieve", include_str!("../prompts/agent_retrieve.txt")),
    ("agent_validate", include_str!("../prompts/agent_validate.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, Template>,
}

impl Default for PromptSet {
    fn default() -> Self {
        let templates = SHIPPED
            .iter()
            .map(|(n, t)| {
                (
                    n.to_string(),
                    Template::parse(n, t).expect("shipped template is well-formed"),
                )
            })
            .collect();
        PromptSet { templates }
    }
}

impl PromptSet {
    /// Shipped templates, overridden by any `<name>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, String> {
        let mut set = PromptSet::default();
        for (name, _) in SHIPPED {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                set.templates.insert(name.to_string(), Template::parse(name, &text)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> &Template {
        self.templates
            .get(name)
            .unwrap_or_else(|| panic!("unknown prompt template {name}"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_parse_and_declare_placeholders() {
        let set = PromptSet::default();
        assert_eq!(set.names().count(), 9);
        let detect = set.get("agent_detect");
        for p in ["tools", "property", "excerpt", "context", "history"] {
            assert!(detect.placeholders().iter().any(|x| x == p), "{p}");
        }
    }

    #[test]
    fn substitution_does_not_rescan_values() {
        let t = Template::parse("t", "[system]\nsys {{a}}\n[user]\n{{a}} and {{b}} and {{missing}}").unwrap();
        let r = t.render(&[("a", "{{b}}"), ("b", "B")]);
        assert_eq!(r.system, "sys {{b}}");
        assert_eq!(r.user, "{{b}} and B and {{missing}}");
    }

    #[test]
    fn malformed_template_is_rejected() {
        assert!(Template::parse("x", "no sections").is_err());
        assert!(Template::parse("x", "[system]\nonly system").is_err());
    }
}
