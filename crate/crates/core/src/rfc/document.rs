//! Plain-text RFC segmentation.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfcSection {
    /// Dotted number without trailing dot, e.g. `3.8.2.1` or `A.1`.
    pub number: String,
    pub heading: String,
    /// The heading line exactly as it appeared.
    pub heading_line: String,
    /// Text between this heading and the next one.
    pub body: String,
    pub children: Vec<RfcSection>,
}

impl RfcSection {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Number components, e.g. `["3", "8", "2"]`.
    pub fn components(&self) -> Vec<&str> {
        self.number.split('.').collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfcDocument {
    pub rfc_id: String,
    pub title: String,
    pub raw_text: String,
    /// Unnumbered text before the first heading (title block, status,
    /// abstract, table of contents).
    pub front_matter: String,
    pub sections: Vec<RfcSection>,
    pub warnings: Vec<String>,
}

impl RfcDocument {
    /// Sections in document order (pre-order) with their ancestor chain.
    pub fn walk(&self) -> Vec<(Vec<&RfcSection>, &RfcSection)> {
        fn go<'a>(
            s: &'a RfcSection,
            path: &mut Vec<&'a RfcSection>,
            out: &mut Vec<(Vec<&'a RfcSection>, &'a RfcSection)>,
        ) {
            out.push((path.clone(), s));
            path.push(s);
            for c in &s.children {
                go(c, path, out);
            }
            path.pop();
        }
        let mut out = Vec::new();
        let mut path = Vec::new();
        for s in &self.sections {
            go(s, &mut path, &mut out);
        }
        out
    }

    pub fn section(&self, number: &str) -> Option<&RfcSection> {
        self.walk().into_iter().map(|(_, s)| s).find(|s| s.number == number)
    }

    pub fn section_count(&self) -> usize {
        self.walk().len()
    }

    /// Heading lines and bodies concatenated in document order.
    pub fn reconstructed_body(&self) -> String {
        let mut out = String::new();
        for (_, s) in self.walk() {
            out.push_str(&s.heading_line);
            out.push('\n');
            out.push_str(&s.body);
        }
        out
    }

    /// The document with page furniture removed, from the first heading on.
    pub fn normalized_body(&self) -> String {
        let clean = strip_page_furniture(&self.raw_text);
        let lines: Vec<&str> = clean.lines().collect();
        let first = self
            .sections
            .first()
            .and_then(|s| lines.iter().position(|l| *l == s.heading_line));
        match first {
            Some(i) => lines[i..].join("\n"),
            None => clean,
        }
    }
}

/// Collapses all whitespace runs to single spaces.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn footer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[Page \d+\]\s*$").expect("valid regex"))
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(RFC \d+|Internet-Draft)\s{2,}\S").expect("valid regex"))
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:Appendix\s+)?((?:\d+|[A-Z])(?:\.\d+)*)\.?\s+(\S.*?)\s*$").expect("valid regex"))
}

fn toc_leader_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\.\s?){3,}\s*\d+\s*$").expect("valid regex"))
}

/// Removes form feeds, `[Page N]` footers and the running header that
/// follows each page break, along with blank lines hugging the break.
pub fn strip_page_furniture(text: &str) -> String {
    let text = text.replace("\r\n", "\n");
    let mut out: Vec<&str> = Vec::new();
    let mut after_break = false;
    for raw in text.split('\n') {
        let line = raw.trim_end_matches('\u{c}');
        let had_ff = raw.contains('\u{c}');
        let line = line.trim_start_matches('\u{c}');
        if footer_re().is_match(line) {
            while out.last().is_some_and(|l| l.trim().is_empty()) {
                out.pop();
            }
            after_break = true;
            continue;
        }
        if had_ff {
            after_break = true;
            if line.trim().is_empty() {
                continue;
            }
        }
        if after_break {
            if line.trim().is_empty() {
                continue;
            }
            after_break = false;
            if header_re().is_match(line) {
                // Skip blank lines after the running header too.
                after_break = true;
                continue;
            }
        }
        out.push(line);
    }
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    out.join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Component {
    Num(u32),
    Letter(u8),
}

fn parse_number(n: &str) -> Option<Vec<Component>> {
    n.split('.')
        .enumerate()
        .map(|(i, part)| {
            if i == 0 && part.len() == 1 && part.as_bytes()[0].is_ascii_uppercase() {
                Some(Component::Letter(part.as_bytes()[0]))
            } else {
                part.parse::<u32>().ok().map(Component::Num)
            }
        })
        .collect()
}

/// Tracks the open section path and the last number seen at each level so
/// only plausible successors are accepted as headings.
#[derive(Default)]
struct Numbering {
    open: Vec<Component>,
    /// Last child number under `open[..i]`, for i = 0..=open.len().
    last_child: Vec<Option<Component>>,
}

impl Numbering {
    fn accepts(&self, c: &[Component]) -> bool {
        let depth = c.len() - 1;
        if depth > self.open.len() || c[..depth] != self.open[..depth] {
            return false;
        }
        let last = self.last_child.get(depth).copied().flatten();
        let next = c[depth];
        match (last, next) {
            (None, Component::Num(n)) => (1..=3).contains(&n) || (depth == 0 && n <= 3),
            (None, Component::Letter(l)) => depth == 0 && l == b'A',
            (Some(Component::Num(p)), Component::Num(n)) => n > p && n <= p + 3,
            (Some(Component::Num(_)), Component::Letter(l)) => depth == 0 && l == b'A',
            (Some(Component::Letter(p)), Component::Letter(l)) => l > p && l <= p + 2,
            (Some(Component::Letter(_)), Component::Num(_)) => false,
        }
    }

    fn push(&mut self, c: &[Component]) {
        let depth = c.len() - 1;
        self.open.truncate(depth);
        self.open.push(c[depth]);
        self.last_child.truncate(depth + 1);
        if self.last_child.len() <= depth {
            self.last_child.resize(depth + 1, None);
        }
        self.last_child[depth] = Some(c[depth]);
        self.last_child.push(None);
    }
}

fn detect_rfc_id(text: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re =
        RE.get_or_init(|| Regex::new(r"(?m)(?:^Request for Comments:\s*(\d+)|^RFC (\d+)\s{2,})").expect("valid regex"));
    re.captures(text)
        .and_then(|c| c.get(1).or(c.get(2)))
        .map(|m| format!("RFC {}", m.as_str()))
}

fn detect_title(raw: &str, front: &str) -> String {
    // Running headers carry the short title between two wide gaps.
    let gap = Regex::new(r"\s{2,}").expect("valid regex");
    for line in raw.lines() {
        let line = line.trim_start_matches('\u{c}');
        if header_re().is_match(line) {
            let parts: Vec<&str> = gap.split(line.trim()).collect();
            if parts.len() >= 3 {
                return parts[1].to_string();
            }
        }
    }
    // Otherwise the first centered line after the metadata block.
    let mut seen_blank = false;
    for line in front.lines() {
        if line.trim().is_empty() {
            seen_blank = true;
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        if seen_blank && indent >= 8 {
            return line.trim().to_string();
        }
    }
    String::new()
}

/// Segments an IETF plain-text document into a numbered section tree.
/// A heading is a column-0 line `^\d+(\.\d+)*\.?\s+\S` (or an appendix
/// letter) whose number plausibly continues the current numbering; dotted
/// table-of-contents entries are never headings.
pub fn parse_rfc(text: &str) -> RfcDocument {
    let clean = strip_page_furniture(text);
    let mut numbering = Numbering::default();
    let mut flat: Vec<(Vec<Component>, RfcSection)> = Vec::new();
    let mut front = String::new();
    for line in clean.split('\n') {
        let heading = heading_re().captures(line).and_then(|cap| {
            if toc_leader_re().is_match(line) {
                return None;
            }
            let number = cap.get(1)?.as_str();
            let comps = parse_number(number)?;
            // A lone capital letter is only an appendix with the keyword;
            // otherwise prose such as "A node MUST ..." would match.
            if comps.len() == 1 && number.starts_with(|c: char| c.is_ascii_uppercase()) && !line.starts_with("Appendix")
            {
                return None;
            }
            numbering
                .accepts(&comps)
                .then(|| (comps, number.to_string(), cap[2].to_string()))
        });
        match heading {
            Some((comps, number, title)) => {
                numbering.push(&comps);
                flat.push((
                    comps,
                    RfcSection {
                        number,
                        heading: title,
                        heading_line: line.to_string(),
                        body: String::new(),
                        children: Vec::new(),
                    },
                ));
            }
            None => {
                let target = match flat.last_mut() {
                    Some((_, s)) => &mut s.body,
                    None => &mut front,
                };
                target.push_str(line);
                target.push('\n');
            }
        }
    }

    let mut warnings = Vec::new();
    let rfc_id = detect_rfc_id(text).unwrap_or_else(|| {
        warnings.push("no RFC number found; using \"RFC ?\"".to_string());
        "RFC ?".to_string()
    });
    let title = detect_title(text, &front);

    let sections = if flat.is_empty() {
        warnings.push("no numbered headings detected; treating the document as one section".to_string());
        let body = std::mem::take(&mut front);
        vec![RfcSection {
            number: "0".into(),
            heading: title.clone(),
            heading_line: String::new(),
            body,
            children: Vec::new(),
        }]
    } else {
        build_tree(flat)
    };

    RfcDocument {
        rfc_id,
        title,
        raw_text: text.to_string(),
        front_matter: front,
        sections,
        warnings,
    }
}

fn build_tree(flat: Vec<(Vec<Component>, RfcSection)>) -> Vec<RfcSection> {
    // Stack of (depth, section) being assembled.
    let mut roots: Vec<RfcSection> = Vec::new();
    let mut stack: Vec<(usize, RfcSection)> = Vec::new();
    fn attach(roots: &mut Vec<RfcSection>, stack: &mut Vec<(usize, RfcSection)>) {
        let (_, done) = stack.pop().expect("non-empty stack");
        match stack.last_mut() {
            Some((_, parent)) => parent.children.push(done),
            None => roots.push(done),
        }
    }
    for (comps, section) in flat {
        let depth = comps.len();
        while stack.last().is_some_and(|(d, _)| *d >= depth) {
            attach(&mut roots, &mut stack);
        }
        stack.push((depth, section));
    }
    while !stack.is_empty() {
        attach(&mut roots, &mut stack);
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(sections: &[RfcSection]) -> Vec<(String, Vec<String>)> {
        sections
            .iter()
            .map(|s| (s.number.clone(), s.children.iter().map(|c| c.number.clone()).collect()))
            .collect()
    }

    #[test]
    fn synthetic_four_sections() {
        let text = "Front matter\n\n1. Intro\nintro body\n1.1 Scope\nscope\n1.2.  Terms\nterms\n2. Protocol\nbody\n";
        let doc = parse_rfc(text);
        assert_eq!(
            shape(&doc.sections),
            vec![("1".into(), vec!["1.1".into(), "1.2".into()]), ("2".into(), vec![])]
        );
        assert_eq!(doc.section("1.2").unwrap().heading, "Terms");
        assert_eq!(
            normalize_whitespace(&doc.reconstructed_body()),
            normalize_whitespace(&doc.normalized_body())
        );
    }

    #[test]
    fn single_heading() {
        let doc = parse_rfc("1. Introduction\nSome text.\n");
        assert_eq!(doc.sections.len(), 1);
        assert!(doc.sections[0].children.is_empty());
        assert!(doc.warnings.iter().any(|w| w.contains("RFC number")));
    }

    #[test]
    fn indented_and_implausible_lines_are_body() {
        let text = "1. Intro\n   2. indented list item\n1997 was a year\n7. Not next\n2. Real\n";
        let doc = parse_rfc(text);
        assert_eq!(doc.sections.len(), 2);
        assert!(doc.sections[0].body.contains("7. Not next"));
    }

    #[test]
    fn toc_entries_are_not_headings() {
        let text =
            "Table of Contents\n1. Intro ........................ 2\n2. More ......... 3\n\n1. Intro\nx\n2. More\ny\n";
        let doc = parse_rfc(text);
        assert_eq!(doc.sections.len(), 2);
        assert_eq!(doc.sections[0].body, "x\n");
    }

    #[test]
    fn page_furniture_is_stripped() {
        let text = "1. Intro\nfirst page text\n\nAuthor                 Standards Track                  [Page 1]\n\u{c}\nRFC 9999                  Toy Protocol                  May 2001\n\n\ncontinued text\n2. Next\n";
        let doc = parse_rfc(text);
        assert_eq!(doc.rfc_id, "RFC 9999");
        assert_eq!(doc.title, "Toy Protocol");
        assert_eq!(doc.sections[0].body, "first page text\ncontinued text\n");
    }

    #[test]
    fn appendices_follow_numbered_sections() {
        let text = "1. Intro\nx\nAppendix A. Extra\ny\nA.1.  Detail\nz\n";
        let doc = parse_rfc(text);
        assert_eq!(
            shape(&doc.sections),
            vec![("1".into(), vec![]), ("A".into(), vec!["A.1".into()])]
        );
    }

    #[test]
    fn no_headings_falls_back() {
        let doc = parse_rfc("just prose\nmore prose\n");
        assert_eq!(doc.sections.len(), 1);
        assert_eq!(doc.sections[0].number, "0");
        assert!(doc.warnings.iter().any(|w| w.contains("no numbered headings")));
    }
}
