//! Line-oriented text format for models, coefficients, and roles.
//!
//! One directive per line; `#` starts a comment; blank lines are ignored:
//!
//! ```text
//! var <name> [latent] [unmeasured]
//! edge <name> -> <name> [= <real>]
//! errvar <name> = <positive real>
//! role exposure <name>
//! role mediator <name>
//! role outcome <name>
//! role covariate <name> [<name> ...]
//! role unmeasured <name> [<name> ...]
//! ```
//!
//! Reals are decimal with optional sign and exponent. Input may use LF or
//! CRLF; serialization emits LF. The canonical form lists variables in
//! declaration order, edges sorted by (from, to), non-default error
//! variances, then roles, with coefficients printed in their shortest
//! round-trip decimal representation.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Edge, PathModel, RoleAssignment, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseErrorKind {
    Encoding,
    Syntax,
    Semantic,
}

/// A structured parse failure with a 1-based source position.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind: ParseErrorKind::Syntax,
            line,
            column,
            message: message.into(),
        }
    }

    fn semantic(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind: ParseErrorKind::Semantic,
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleKind {
    Exposure,
    Mediator,
    Outcome,
    Covariate,
    Unmeasured,
}

/// Which source element a span belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum ElementKey {
    Variable(String),
    Edge(String, String),
    ErrorVariance(String),
    Role(RoleKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

/// A parsed model plus optional roles, with source spans for diagnostics.
#[derive(Debug, Clone)]
pub struct ModelDocument {
    pub model: PathModel,
    pub roles: Option<RoleAssignment>,
    pub spans: HashMap<ElementKey, Span>,
}

impl ModelDocument {
    pub fn new(model: PathModel, roles: Option<RoleAssignment>) -> Self {
        ModelDocument {
            model,
            roles,
            spans: HashMap::new(),
        }
    }
}

impl PartialEq for ModelDocument {
    /// Document equality is model and role equality; spans are diagnostics.
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model && self.roles == other.roles
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut chars = line.char_indices().peekable();
    let mut column = 0usize;
    let mut start = None;
    let mut start_column = 0usize;
    loop {
        let next = chars.next();
        column += 1;
        match next {
            Some((i, c)) if !c.is_whitespace() => {
                if start.is_none() {
                    start = Some(i);
                    start_column = column;
                }
            }
            other => {
                if let Some(s) = start.take() {
                    let end = other.as_ref().map(|(i, _)| *i).unwrap_or(line.len());
                    tokens.push(Token {
                        text: &line[s..end],
                        column: start_column,
                    });
                }
                if other.is_none() {
                    break;
                }
            }
        }
    }
    tokens
}

fn parse_real(token: &Token<'_>, line: usize) -> Result<f64, ParseError> {
    let value: f64 = token.text.parse().map_err(|_| {
        ParseError::syntax(line, token.column, format!("invalid real: {:?}", token.text))
    })?;
    if !value.is_finite() {
        return Err(ParseError::syntax(
            line,
            token.column,
            format!("non-finite real: {:?}", token.text),
        ));
    }
    Ok(value)
}

fn valid_name(token: &Token<'_>, line: usize) -> Result<String, ParseError> {
    let text = token.text;
    if text.is_empty() || text.chars().any(char::is_whitespace) {
        return Err(ParseError::syntax(line, token.column, "empty variable name"));
    }
    Ok(text.to_string())
}

/// Parses a document, reporting the first syntax or semantic problem with
/// its source position. Never panics on arbitrary input.
pub fn parse(text: &str) -> Result<ModelDocument, ParseError> {
    let mut model = PathModel::new();
    let mut spans: HashMap<ElementKey, Span> = HashMap::new();
    let mut role_lines: Vec<(RoleKind, Vec<String>, usize, usize)> = Vec::new();

    for (line_index, raw_line) in text.lines().enumerate() {
        let line_number = line_index + 1;
        let without_comment = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let tokens = tokenize(without_comment);
        if tokens.is_empty() {
            continue;
        }
        let directive = &tokens[0];
        match directive.text {
            "var" => {
                if tokens.len() < 2 {
                    return Err(ParseError::syntax(line_number, directive.column, "var needs a name"));
                }
                let name = valid_name(&tokens[1], line_number)?;
                let mut latent = false;
                let mut unmeasured = false;
                for flag in &tokens[2..] {
                    match flag.text {
                        "latent" => latent = true,
                        "unmeasured" => unmeasured = true,
                        other => {
                            return Err(ParseError::syntax(
                                line_number,
                                flag.column,
                                format!("unknown var flag: {other:?}"),
                            ))
                        }
                    }
                }
                let variable = if latent {
                    Variable::latent(&name)
                } else if unmeasured {
                    Variable::unmeasured(&name)
                } else {
                    Variable::observed(&name)
                };
                model.add_variable(variable).map_err(|e| {
                    ParseError::semantic(line_number, tokens[1].column, e.to_string())
                })?;
                spans.insert(
                    ElementKey::Variable(name),
                    Span { line: line_number, column: tokens[1].column },
                );
            }
            "edge" => {
                if tokens.len() < 4 || tokens[2].text != "->" {
                    return Err(ParseError::syntax(
                        line_number,
                        directive.column,
                        "expected: edge <name> -> <name> [= <real>]",
                    ));
                }
                let from = valid_name(&tokens[1], line_number)?;
                let to = valid_name(&tokens[3], line_number)?;
                let coefficient = match tokens.len() {
                    4 => None,
                    6 if tokens[4].text == "=" => Some(parse_real(&tokens[5], line_number)?),
                    _ => {
                        return Err(ParseError::syntax(
                            line_number,
                            tokens[4].column,
                            "expected: = <real>",
                        ))
                    }
                };
                for name in [&from, &to] {
                    if !model.contains(name) {
                        return Err(ParseError::semantic(
                            line_number,
                            directive.column,
                            format!("edge references undeclared variable: {name}"),
                        ));
                    }
                }
                model
                    .add_edge(Edge { from: from.clone(), to: to.clone(), coefficient })
                    .map_err(|e| ParseError::semantic(line_number, directive.column, e.to_string()))?;
                spans.insert(
                    ElementKey::Edge(from, to),
                    Span { line: line_number, column: directive.column },
                );
            }
            "errvar" => {
                if tokens.len() != 4 || tokens[2].text != "=" {
                    return Err(ParseError::syntax(
                        line_number,
                        directive.column,
                        "expected: errvar <name> = <positive real>",
                    ));
                }
                let name = valid_name(&tokens[1], line_number)?;
                if !model.contains(&name) {
                    return Err(ParseError::semantic(
                        line_number,
                        tokens[1].column,
                        format!("errvar references undeclared variable: {name}"),
                    ));
                }
                let value = parse_real(&tokens[3], line_number)?;
                if value <= 0.0 {
                    return Err(ParseError::semantic(
                        line_number,
                        tokens[3].column,
                        format!("nonpositive error variance: {name}"),
                    ));
                }
                model.set_error_variance(&name, value);
                spans.insert(
                    ElementKey::ErrorVariance(name),
                    Span { line: line_number, column: tokens[1].column },
                );
            }
            "role" => {
                if tokens.len() < 3 {
                    return Err(ParseError::syntax(
                        line_number,
                        directive.column,
                        "expected: role <kind> <name> [...]",
                    ));
                }
                let kind = match tokens[1].text {
                    "exposure" => RoleKind::Exposure,
                    "mediator" => RoleKind::Mediator,
                    "outcome" => RoleKind::Outcome,
                    "covariate" => RoleKind::Covariate,
                    "unmeasured" => RoleKind::Unmeasured,
                    other => {
                        return Err(ParseError::syntax(
                            line_number,
                            tokens[1].column,
                            format!("unknown role kind: {other:?}"),
                        ))
                    }
                };
                let single = matches!(kind, RoleKind::Exposure | RoleKind::Mediator | RoleKind::Outcome);
                if single && tokens.len() != 3 {
                    return Err(ParseError::syntax(
                        line_number,
                        tokens[1].column,
                        format!("role {} takes exactly one name", tokens[1].text),
                    ));
                }
                if role_lines.iter().any(|(k, ..)| *k == kind) {
                    return Err(ParseError::semantic(
                        line_number,
                        tokens[1].column,
                        format!("duplicate role: {}", tokens[1].text),
                    ));
                }
                let mut names = Vec::new();
                for token in &tokens[2..] {
                    let name = valid_name(token, line_number)?;
                    if !model.contains(&name) {
                        return Err(ParseError::semantic(
                            line_number,
                            token.column,
                            format!("role references undeclared variable: {name}"),
                        ));
                    }
                    names.push(name);
                }
                spans.insert(
                    ElementKey::Role(kind),
                    Span { line: line_number, column: directive.column },
                );
                role_lines.push((kind, names, line_number, directive.column));
            }
            other => {
                return Err(ParseError::syntax(
                    line_number,
                    directive.column,
                    format!("unknown directive: {other:?}"),
                ))
            }
        }
    }

    // whole-model invariants (acyclicity, error variances)
    if let Some(violation) = model.validate().first() {
        let span = model
            .edges()
            .first()
            .and_then(|e| spans.get(&ElementKey::Edge(e.from.clone(), e.to.clone())))
            .copied()
            .unwrap_or(Span { line: 1, column: 1 });
        return Err(ParseError::semantic(span.line, span.column, violation.to_string()));
    }

    let roles = if role_lines.is_empty() {
        None
    } else {
        let find = |kind: RoleKind| role_lines.iter().find(|(k, ..)| *k == kind);
        let single = |kind: RoleKind| find(kind).map(|(_, names, ..)| names[0].clone());
        let (first_line, first_column) = {
            let (_, _, l, c) = role_lines[0];
            (l, c)
        };
        let exposure = single(RoleKind::Exposure).ok_or_else(|| {
            ParseError::semantic(first_line, first_column, "roles need an exposure")
        })?;
        let outcome = single(RoleKind::Outcome).ok_or_else(|| {
            ParseError::semantic(first_line, first_column, "roles need an outcome")
        })?;
        let mut assignment = RoleAssignment::new(exposure, None, outcome);
        assignment.mediator = single(RoleKind::Mediator);
        if let Some((_, names, ..)) = find(RoleKind::Covariate) {
            assignment.covariates = names.iter().cloned().collect();
        }
        if let Some((_, names, ..)) = find(RoleKind::Unmeasured) {
            assignment.unmeasured = names.iter().cloned().collect();
        }
        if let Some(problem) = assignment.validate(&model).first() {
            return Err(ParseError::semantic(first_line, first_column, problem.clone()));
        }
        Some(assignment)
    };

    Ok(ModelDocument { model, roles, spans })
}

/// Parses raw bytes, rejecting invalid UTF-8 with a structured error.
pub fn parse_bytes(bytes: &[u8]) -> Result<ModelDocument, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
            let column = prefix.len() - prefix.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1) + 1;
            Err(ParseError {
                kind: ParseErrorKind::Encoding,
                line,
                column,
                message: "invalid UTF-8".to_string(),
            })
        }
    }
}

/// Serializes to canonical form: variables in declaration order, edges
/// sorted by (from, to), explicit non-default error variances, roles last.
pub fn serialize(doc: &ModelDocument) -> String {
    let model = &doc.model;
    let mut out = String::new();
    for v in model.variables() {
        out.push_str("var ");
        out.push_str(&v.name);
        if v.kind == crate::model::VariableKind::Latent {
            out.push_str(" latent");
        } else if !v.measured {
            out.push_str(" unmeasured");
        }
        out.push('\n');
    }
    let mut edges: Vec<&Edge> = model.edges().iter().collect();
    edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    for e in edges {
        out.push_str("edge ");
        out.push_str(&e.from);
        out.push_str(" -> ");
        out.push_str(&e.to);
        if let Some(c) = e.coefficient {
            out.push_str(" = ");
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    for v in model.variables() {
        let value = model.error_variance(&v.name);
        if value != crate::model::DEFAULT_ERROR_VARIANCE {
            out.push_str("errvar ");
            out.push_str(&v.name);
            out.push_str(" = ");
            out.push_str(&value.to_string());
            out.push('\n');
        }
    }
    if let Some(roles) = &doc.roles {
        out.push_str("role exposure ");
        out.push_str(&roles.exposure);
        out.push('\n');
        if let Some(m) = &roles.mediator {
            out.push_str("role mediator ");
            out.push_str(m);
            out.push('\n');
        }
        out.push_str("role outcome ");
        out.push_str(&roles.outcome);
        out.push('\n');
        if !roles.covariates.is_empty() {
            out.push_str("role covariate");
            for name in &roles.covariates {
                out.push(' ');
                out.push_str(name);
            }
            out.push('\n');
        }
        if !roles.unmeasured.is_empty() {
            out.push_str("role unmeasured");
            for name in &roles.unmeasured {
                out.push(' ');
                out.push_str(name);
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{confounding_scenario, Scenario};

    const SCENARIO_DOC: &str = "\
# mediator-outcome confounding, moderate effects
var C
var U unmeasured
var A
var M
var Y
edge C -> A = 0.6
edge C -> M = 0.6
edge C -> Y = 0
edge A -> M = 0.6
edge A -> Y = 0.6
edge M -> Y = 0.6
edge U -> M = 0.6
edge U -> Y = 0.6
role exposure A
role mediator M
role outcome Y
role covariate C
role unmeasured U
";

    #[test]
    fn minimal_document() {
        let doc = parse("var A\nvar Y\nedge A -> Y = 0.5\n").unwrap();
        assert_eq!(doc.model.variables().len(), 2);
        assert_eq!(doc.model.edges().len(), 1);
        assert_eq!(doc.model.coefficient("A", "Y"), Some(0.5));
        assert!(doc.roles.is_none());
    }

    #[test]
    fn scenario_document_matches_the_built_in_model() {
        let doc = parse(SCENARIO_DOC).unwrap();
        let (expected_model, expected_roles) = confounding_scenario(Scenario::MediatorOutcome);
        assert_eq!(doc.model, expected_model);
        assert_eq!(doc.roles, Some(expected_roles));
    }

    #[test]
    fn undeclared_edge_endpoint_is_a_semantic_error() {
        let err = parse("var A\nedge A -> B\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Semantic);
        assert_eq!(err.line, 2);
        assert!(err.message.contains('B'), "{}", err.message);
    }

    #[test]
    fn cycles_and_bad_errvars_are_semantic_errors() {
        let err = parse("var A\nvar M\nedge A -> M\nedge M -> A\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Semantic);
        assert!(err.message.contains("cycle"), "{}", err.message);

        let err = parse("var Y\nerrvar Y = 0\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Semantic);
        assert!(err.message.contains("nonpositive"), "{}", err.message);
        assert!(parse("var Y\nerrvar Y = 2.5\n").is_ok());
    }

    #[test]
    fn unknown_directives_and_malformed_lines_are_syntax_errors() {
        for bad in [
            "vertex A\n",
            "edge A - B\n",
            "var\n",
            "edge A -> B = x\n",
            "role pivot A\n",
        ] {
            let err = parse(&format!("var A\nvar B\n{bad}")).unwrap_err();
            assert_eq!(err.kind, ParseErrorKind::Syntax, "input {bad:?}");
        }
    }

    #[test]
    fn duplicate_edges_and_roles_are_rejected() {
        let err = parse("var A\nvar B\nedge A -> B\nedge A -> B = 1\n").unwrap_err();
        assert!(err.message.contains("duplicate edge"), "{}", err.message);
        let err = parse("var A\nvar Y\nrole exposure A\nrole outcome Y\nrole exposure Y\n")
            .unwrap_err();
        assert!(err.message.contains("duplicate role"), "{}", err.message);
    }

    #[test]
    fn roles_need_exposure_and_outcome() {
        let err = parse("var A\nrole covariate A\n").unwrap_err();
        assert!(err.message.contains("exposure"), "{}", err.message);
    }

    #[test]
    fn round_trip_is_canonical_and_idempotent() {
        let doc = parse(SCENARIO_DOC).unwrap();
        let canonical = serialize(&doc);
        let reparsed = parse(&canonical).unwrap();
        assert_eq!(reparsed, doc);
        assert_eq!(serialize(&reparsed), canonical);
    }

    #[test]
    fn shortest_decimal_form_is_emitted() {
        let doc = parse("var A\nvar Y\nedge A -> Y = 0.6\n").unwrap();
        let text = serialize(&doc);
        assert!(text.contains("edge A -> Y = 0.6\n"), "{text}");
        assert!(!text.contains("0.60000000000000001"), "{text}");
    }

    #[test]
    fn explicit_default_errvar_is_dropped_but_equal() {
        let doc = parse("var A\nerrvar A = 1.0\n").unwrap();
        let text = serialize(&doc);
        assert!(!text.contains("errvar"), "{text}");
        assert_eq!(parse(&text).unwrap(), doc);
    }

    #[test]
    fn crlf_input_is_accepted() {
        let doc = parse("var A\r\nvar Y\r\nedge A -> Y = 0.5\r\n").unwrap();
        assert_eq!(doc.model.edges().len(), 1);
    }

    #[test]
    fn spans_point_at_declarations() {
        let doc = parse("var A\nvar Y\nedge A -> Y\n").unwrap();
        let span = doc.spans[&ElementKey::Edge("A".into(), "Y".into())];
        assert_eq!(span.line, 3);
    }

    #[test]
    fn invalid_utf8_is_an_encoding_error() {
        let err = parse_bytes(b"var A\nvar \xff\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Encoding);
        assert_eq!(err.line, 2);
    }
}
