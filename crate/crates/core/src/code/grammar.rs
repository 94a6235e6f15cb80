//! Subject-language grammars.
//!
//! A grammar turns the bytes of one source file into raw entities
//! (functions, type and macro definitions, call expressions). Grammars are
//! selected by file extension so further languages can be slotted in
//! without touching the model or the call graph.

use tree_sitter::{Node, Parser};

use super::{DefinitionKind, Span};

/// Raw function definition as seen by a grammar, before ids are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFunction {
    pub name: String,
    pub arity: usize,
    pub variadic: bool,
    pub is_static: bool,
    /// Whole definition, from the first specifier to the closing brace.
    pub span: Span,
    /// Declaration part (everything before the body).
    pub signature_span: Span,
    pub calls: Vec<RawCall>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCall {
    /// Identifier text for direct calls; the callee expression text otherwise.
    pub callee: String,
    pub arg_count: usize,
    pub indirect: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDefinition {
    pub name: String,
    pub kind: DefinitionKind,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedSource {
    pub functions: Vec<RawFunction>,
    pub definitions: Vec<RawDefinition>,
    /// Set when the parser had to recover from syntax errors.
    pub had_errors: bool,
}

pub trait Grammar: Send + Sync {
    /// Language tag stored on each source unit.
    fn language(&self) -> &'static str;
    fn extensions(&self) -> &'static [&'static str];
    fn parse(&self, source: &[u8]) -> ParsedSource;
}

/// Returns the grammar registered for a file extension, if any.
pub fn grammar_for_extension(ext: &str) -> Option<&'static dyn Grammar> {
    static C: CGrammar = CGrammar;
    let grammars: [&'static dyn Grammar; 1] = [&C];
    grammars
        .into_iter()
        .find(|g| g.extensions().iter().any(|e| e.eq_ignore_ascii_case(ext)))
}

/// C grammar backed by tree-sitter. No preprocessing is done: every branch
/// of a conditional-compilation block is walked as written.
#[derive(Debug, Default, Clone, Copy)]
pub struct CGrammar;

impl Grammar for CGrammar {
    fn language(&self) -> &'static str {
        "c"
    }

    fn extensions(&self) -> &'static [&'static str] {
        &["c", "h"]
    }

    fn parse(&self, source: &[u8]) -> ParsedSource {
        parse_c(source)
    }
}

/// Extracts functions, definitions and calls from C source bytes.
pub fn parse_c(source: &[u8]) -> ParsedSource {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_c::LANGUAGE.into())
        .expect("tree-sitter-c grammar is ABI compatible");
    let Some(tree) = parser.parse(source, None) else {
        return ParsedSource {
            had_errors: true,
            ..Default::default()
        };
    };
    let root = tree.root_node();
    let mut out = ParsedSource {
        had_errors: root.has_error(),
        ..Default::default()
    };
    let mut walker = Walker {
        src: source,
        out: &mut out,
    };
    walker.visit_top(root);
    out.functions.sort_by_key(|f| f.span.start);
    out.definitions
        .sort_by(|a, b| (a.span.start, &a.name).cmp(&(b.span.start, &b.name)));
    out
}

struct Walker<'a> {
    src: &'a [u8],
    out: &'a mut ParsedSource,
}

impl Walker<'_> {
    fn text(&self, node: Node<'_>) -> String {
        String::from_utf8_lossy(&self.src[node.start_byte()..node.end_byte()]).into_owned()
    }

    /// Walks declarations outside of any function body.
    fn visit_top(&mut self, node: Node<'_>) {
        match node.kind() {
            "function_definition" => {
                self.function(node);
                return;
            }
            "preproc_def" | "preproc_function_def" => {
                if let Some(name) = node.child_by_field_name("name") {
                    self.out.definitions.push(RawDefinition {
                        name: self.text(name),
                        kind: DefinitionKind::Macro,
                        span: macro_span(node, self.src),
                    });
                }
                return;
            }
            "type_definition" => {
                self.type_definition(node);
                return;
            }
            "declaration" => {
                if let Some(ty) = node.child_by_field_name("type") {
                    self.tagged_type(ty, span_of(node));
                }
                return;
            }
            "struct_specifier" | "union_specifier" | "enum_specifier" => {
                // Bare specifier (e.g. a struct without trailing semicolon
                // recovered by the parser).
                let mut span = span_of(node);
                if let Some(next) = node.next_sibling() {
                    if next.kind() == ";" {
                        span.end = next.end_byte();
                    }
                }
                self.tagged_type(node, span);
                return;
            }
            _ => {}
        }
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            self.visit_top(child);
        }
    }

    fn type_definition(&mut self, node: Node<'_>) {
        let span = span_of(node);
        if let Some(ty) = node.child_by_field_name("type") {
            self.tagged_type(ty, span);
        }
        let mut cursor = node.walk();
        for declarator in node.children_by_field_name("declarator", &mut cursor) {
            if let Some(name) = declarator_name(declarator, self.src) {
                self.out.definitions.push(RawDefinition {
                    name,
                    kind: DefinitionKind::Typedef,
                    span,
                });
            }
        }
    }

    /// Records `struct foo { ... }` style definitions. Forward declarations
    /// and plain uses (no body) are ignored.
    fn tagged_type(&mut self, ty: Node<'_>, span: Span) {
        let kind = match ty.kind() {
            "struct_specifier" => DefinitionKind::Struct,
            "union_specifier" => DefinitionKind::Union,
            "enum_specifier" => DefinitionKind::Enum,
            _ => return,
        };
        if ty.child_by_field_name("body").is_none() {
            return;
        }
        if let Some(name) = ty.child_by_field_name("name") {
            self.out.definitions.push(RawDefinition {
                name: self.text(name),
                kind,
                span,
            });
        }
    }

    fn function(&mut self, node: Node<'_>) {
        let Some(declarator) = node.child_by_field_name("declarator") else {
            return;
        };
        let Some(fdecl) = find_function_declarator(declarator) else {
            return;
        };
        let Some(name) = fdecl
            .child_by_field_name("declarator")
            .and_then(|d| declarator_name(d, self.src))
        else {
            return;
        };
        let (arity, variadic) = fdecl
            .child_by_field_name("parameters")
            .map(|p| count_parameters(p, self.src))
            .unwrap_or((0, false));
        let is_static = has_static(node, self.src);
        let span = span_of(node);
        let body = node.child_by_field_name("body");
        let signature_end = body.map(|b| b.start_byte()).unwrap_or(node.end_byte());
        let signature_span = Span::new(node.start_byte(), trim_end(self.src, node.start_byte(), signature_end));
        let mut calls = Vec::new();
        if let Some(body) = body {
            collect_calls(body, self.src, &mut calls);
        }
        calls.sort_by_key(|c: &RawCall| c.span.start);
        self.out.functions.push(RawFunction {
            name,
            arity,
            variadic,
            is_static,
            span,
            signature_span,
            calls,
        });
    }
}

fn span_of(node: Node<'_>) -> Span {
    Span::new(node.start_byte(), node.end_byte())
}

/// Macro nodes include their terminating newline; the definition text stops
/// before it.
fn macro_span(node: Node<'_>, src: &[u8]) -> Span {
    Span::new(node.start_byte(), trim_end(src, node.start_byte(), node.end_byte()))
}

fn trim_end(src: &[u8], start: usize, mut end: usize) -> usize {
    while end > start && src[end - 1].is_ascii_whitespace() {
        end -= 1;
    }
    end
}

fn find_function_declarator(node: Node<'_>) -> Option<Node<'_>> {
    match node.kind() {
        "function_declarator" => {
            // `int (*get(void))(int)` nests a function declarator inside the
            // returned pointer's declarator; the innermost one names the
            // function being defined.
            let inner = node
                .child_by_field_name("declarator")
                .and_then(find_function_declarator);
            Some(inner.unwrap_or(node))
        }
        "pointer_declarator" | "attributed_declarator" => node
            .child_by_field_name("declarator")
            .and_then(find_function_declarator),
        "parenthesized_declarator" => {
            let mut cursor = node.walk();
            let found = node.named_children(&mut cursor).find_map(find_function_declarator);
            found
        }
        _ => None,
    }
}

fn declarator_name(node: Node<'_>, src: &[u8]) -> Option<String> {
    match node.kind() {
        "identifier" | "type_identifier" | "field_identifier" => {
            Some(String::from_utf8_lossy(&src[node.start_byte()..node.end_byte()]).into_owned())
        }
        "pointer_declarator"
        | "function_declarator"
        | "array_declarator"
        | "attributed_declarator"
        | "init_declarator" => node
            .child_by_field_name("declarator")
            .and_then(|d| declarator_name(d, src)),
        "parenthesized_declarator" => {
            let mut cursor = node.walk();
            let found = node.named_children(&mut cursor).find_map(|c| declarator_name(c, src));
            found
        }
        _ => None,
    }
}

/// Counts fixed parameters. `(void)` is zero; `...` sets the variadic flag
/// and is not counted.
fn count_parameters(list: Node<'_>, src: &[u8]) -> (usize, bool) {
    let mut count = 0;
    let mut variadic = false;
    let mut cursor = list.walk();
    for param in list.named_children(&mut cursor) {
        match param.kind() {
            "variadic_parameter" => variadic = true,
            "parameter_declaration" => {
                let is_void = param.child_by_field_name("declarator").is_none()
                    && param
                        .child_by_field_name("type")
                        .map(|t| &src[t.start_byte()..t.end_byte()] == b"void")
                        .unwrap_or(false);
                if !is_void {
                    count += 1;
                }
            }
            // K&R identifier lists.
            "identifier" => count += 1,
            _ => {}
        }
    }
    (count, variadic)
}

fn has_static(node: Node<'_>, src: &[u8]) -> bool {
    let mut cursor = node.walk();
    let found = node
        .children(&mut cursor)
        .any(|c| c.kind() == "storage_class_specifier" && &src[c.start_byte()..c.end_byte()] == b"static");
    found
}

fn collect_calls(node: Node<'_>, src: &[u8], out: &mut Vec<RawCall>) {
    if node.kind() == "call_expression" {
        if let (Some(function), Some(args)) = (
            node.child_by_field_name("function"),
            node.child_by_field_name("arguments"),
        ) {
            let mut cursor = args.walk();
            let arg_count = args
                .named_children(&mut cursor)
                .filter(|c| c.kind() != "comment")
                .count();
            let indirect = function.kind() != "identifier";
            out.push(RawCall {
                callee: String::from_utf8_lossy(&src[function.start_byte()..function.end_byte()]).into_owned(),
                arg_count,
                indirect,
                span: span_of(node),
            });
        }
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        collect_calls(child, src, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice(src: &str, span: Span) -> &str {
        &src[span.start..span.end]
    }

    #[test]
    fn extracts_functions_with_arity_and_static() {
        let src = "static int add(int a, int b) { return a + b; }\n\
                   void nothing(void) {}\n\
                   int logf_(const char *fmt, ...) { return 0; }\n";
        let parsed = parse_c(src.as_bytes());
        let names: Vec<_> = parsed
            .functions
            .iter()
            .map(|f| (f.name.as_str(), f.arity, f.variadic, f.is_static))
            .collect();
        assert_eq!(
            names,
            vec![
                ("add", 2, false, true),
                ("nothing", 0, false, false),
                ("logf_", 1, true, false)
            ]
        );
        assert_eq!(
            slice(src, parsed.functions[0].span),
            "static int add(int a, int b) { return a + b; }"
        );
        assert_eq!(
            slice(src, parsed.functions[0].signature_span),
            "static int add(int a, int b)"
        );
    }

    #[test]
    fn pointer_returning_function_is_named() {
        let src = "struct route *find(int x, int y) { return 0; }";
        let parsed = parse_c(src.as_bytes());
        assert_eq!(parsed.functions[0].name, "find");
        assert_eq!(parsed.functions[0].arity, 2);
    }

    #[test]
    fn calls_count_arguments_and_flag_indirect() {
        let src = "void f(struct ops *o) { g(1, h(2), /* c */ 3); o->cb(4); (*fp)(); }";
        let parsed = parse_c(src.as_bytes());
        let calls: Vec<_> = parsed.functions[0]
            .calls
            .iter()
            .map(|c| (c.callee.as_str(), c.arg_count, c.indirect))
            .collect();
        assert_eq!(
            calls,
            vec![("g", 3, false), ("h", 1, false), ("o->cb", 1, true), ("(*fp)", 0, true)]
        );
    }

    #[test]
    fn type_and_macro_definitions() {
        let src = "#define MAX_HOPS 16\n\
                   #define SQ(x) ((x) * (x))\n\
                   struct babel_route { int metric; };\n\
                   typedef struct neigh { int id; } neigh_t;\n\
                   enum state { UP, DOWN };\n\
                   struct fwd;\n";
        let parsed = parse_c(src.as_bytes());
        let defs: Vec<_> = parsed
            .definitions
            .iter()
            .map(|d| (d.name.as_str(), d.kind, slice(src, d.span)))
            .collect();
        assert_eq!(
            defs,
            vec![
                ("MAX_HOPS", DefinitionKind::Macro, "#define MAX_HOPS 16"),
                ("SQ", DefinitionKind::Macro, "#define SQ(x) ((x) * (x))"),
                (
                    "babel_route",
                    DefinitionKind::Struct,
                    "struct babel_route { int metric; };"
                ),
                (
                    "neigh",
                    DefinitionKind::Struct,
                    "typedef struct neigh { int id; } neigh_t;"
                ),
                (
                    "neigh_t",
                    DefinitionKind::Typedef,
                    "typedef struct neigh { int id; } neigh_t;"
                ),
                ("state", DefinitionKind::Enum, "enum state { UP, DOWN };"),
            ]
        );
    }

    #[test]
    fn conditional_branches_are_both_indexed() {
        let src = "#ifdef A\nint pick(int x) { return 1; }\n#else\nint pick(int x) { return 2; }\n#endif\n";
        let parsed = parse_c(src.as_bytes());
        assert_eq!(parsed.functions.len(), 2);
        assert!(parsed.functions.iter().all(|f| f.name == "pick" && f.arity == 1));
    }

    #[test]
    fn garbage_does_not_panic() {
        let parsed = parse_c(b"}{ int ( ;; \xff\xfe #define");
        assert!(parsed.had_errors);
    }
}
