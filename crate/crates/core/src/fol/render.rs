use std::fmt::Write;

use super::{FolRule, Formula, PredicateDef, RuleBase};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    Or,
    And,
    Not,
}

fn write_formula(out: &mut String, f: &Formula, ctx: Ctx) {
    match f {
        Formula::Atom(id) => out.push_str(id),
        Formula::Not(inner) => {
            out.push('!');
            if let Formula::Not(_) = inner.as_ref() {
                // the grammar allows a single `!` per literal
                out.push('(');
                write_formula(out, inner, Ctx::Top);
                out.push(')');
            } else {
                write_formula(out, inner, Ctx::Not);
            }
        }
        Formula::Or(children) => {
            // A nested `|` must keep its parentheses or it would flatten on re-parse.
            let wrap = ctx != Ctx::Top;
            write_joined(out, children, " | ", Ctx::Or, wrap);
        }
        Formula::And(children) => {
            let wrap = matches!(ctx, Ctx::And | Ctx::Not);
            write_joined(out, children, " & ", Ctx::And, wrap);
        }
    }
}

fn write_joined(out: &mut String, children: &[Formula], sep: &str, ctx: Ctx, wrap: bool) {
    if wrap {
        out.push('(');
    }
    for (i, child) in children.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write_formula(out, child, ctx);
    }
    if wrap {
        out.push(')');
    }
}

/// Canonical text of a formula, with the minimum parentheses needed to
/// re-parse to the same tree.
pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f, Ctx::Top);
    out
}

fn render_rule_with_chapter(rule: &FolRule, chapter: Option<&str>) -> String {
    let body = match &rule.body {
        // Compound bodies are always parenthesised: `(P1 | P2 | P3)`.
        f @ (Formula::And(_) | Formula::Or(_)) => format!("({})", render_formula(f)),
        f => render_formula(f),
    };
    match chapter {
        Some(ch) => format!("article {} chapter {} : {} -> {}", rule.article_id, ch, body, quote(&rule.head)),
        None => format!("article {} : {} -> {}", rule.article_id, body, quote(&rule.head)),
    }
}

/// `article 264 : (P1 | P2 | P3) -> "crime of theft"`
pub fn render_rule(rule: &FolRule) -> String {
    render_rule_with_chapter(rule, None)
}

pub fn render_predicate(p: &PredicateDef) -> String {
    format!("pred {} @{} : {}", p.id, p.article_id, quote(&p.text))
}

/// Canonical source for a whole rule base: all predicate declarations, then
/// all rules with their chapters.
pub fn render_rulebase(base: &RuleBase) -> String {
    let mut out = String::new();
    for p in base.predicates() {
        writeln!(out, "{}", render_predicate(p)).unwrap();
    }
    for rule in base.rules() {
        let chapter = base.chapter(&rule.article_id);
        writeln!(out, "{}", render_rule_with_chapter(rule, chapter)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_rulebase;

    fn atoms(ids: &[&str]) -> Vec<Formula> {
        ids.iter().map(|id| Formula::atom(*id)).collect()
    }

    #[test]
    fn theft_rule_text() {
        let rule = FolRule {
            article_id: "264".into(),
            body: Formula::Or(atoms(&["P1", "P2", "P3"])),
            head: "crime of theft".into(),
        };
        assert_eq!(render_rule(&rule), r#"article 264 : (P1 | P2 | P3) -> "crime of theft""#);
    }

    #[test]
    fn negated_atom() {
        let rule = FolRule {
            article_id: "1".into(),
            body: Formula::not(Formula::atom("P1")),
            head: "x".into(),
        };
        assert!(render_rule(&rule).contains("!P1"));
    }

    #[test]
    fn nesting_keeps_needed_parentheses() {
        let f = Formula::And(vec![
            Formula::Or(atoms(&["a", "b"])),
            Formula::not(Formula::And(atoms(&["c", "d"]))),
            Formula::And(atoms(&["e", "f"])),
        ]);
        assert_eq!(render_formula(&f), "(a | b) & !(c & d) & (e & f)");
        let g = Formula::Or(vec![Formula::Or(atoms(&["a", "b"])), Formula::And(atoms(&["c", "d"]))]);
        assert_eq!(render_formula(&g), "(a | b) | c & d");
    }

    #[test]
    fn render_is_a_fixed_point() {
        let src = r#"
pred a @7 : "first \"quoted\""
pred b @7 : "second"
pred c @7 : "third"
article 7 chapter 2 : !(a | b) & c | !c -> "verdict"
"#;
        let once = render_rulebase(&parse_rulebase(src).unwrap());
        let twice = render_rulebase(&parse_rulebase(&once).unwrap());
        assert_eq!(once, twice);
    }
}
