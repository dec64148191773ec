//! Charge-prediction prompts built from text templates with `{{slot}}`
//! placeholders.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExplainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ZeroShotWithout,
    ZeroShotWith,
    FewShotWithout,
    FewShotWith,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] =
        [PromptKind::ZeroShotWithout, PromptKind::ZeroShotWith, PromptKind::FewShotWithout, PromptKind::FewShotWith];

    pub fn few_shot(self) -> bool {
        matches!(self, PromptKind::FewShotWithout | PromptKind::FewShotWith)
    }

    pub fn with_explanation(self) -> bool {
        matches!(self, PromptKind::ZeroShotWith | PromptKind::FewShotWith)
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::ZeroShotWithout => "zero_shot_without",
            PromptKind::ZeroShotWith => "zero_shot_with",
            PromptKind::FewShotWithout => "few_shot_without",
            PromptKind::FewShotWith => "few_shot_with",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown prompt kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub query: String,
    pub case: String,
    pub explanation: Option<String>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub kind: PromptKind,
    pub query: String,
    pub case: String,
    pub explanation: Option<String>,
    pub exemplar: Option<Exemplar>,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.kind.with_explanation() && self.explanation.is_none() {
            return Err(ExplainError::MissingSlot("explanation".into()));
        }
        if self.kind.few_shot() {
            let ex = self.exemplar.as_ref().ok_or_else(|| ExplainError::MissingSlot("exemplar".into()))?;
            if self.kind.with_explanation() && ex.explanation.is_none() {
                return Err(ExplainError::MissingSlot("exemplar_explanation".into()));
            }
        }
        Ok(())
    }
}

/// The four template files. Loading from a directory allows swapping in a
/// translated set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub instruction: String,
    pub zero_shot: String,
    pub few_shot: String,
    pub evidence_with: String,
}

fn trim_newline(s: &str) -> String {
    s.strip_suffix('\n').map(|t| t.strip_suffix('\r').unwrap_or(t)).unwrap_or(s).to_string()
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            instruction: trim_newline(include_str!("../../templates/instruction.txt")),
            zero_shot: trim_newline(include_str!("../../templates/zero_shot.txt")),
            few_shot: trim_newline(include_str!("../../templates/few_shot.txt")),
            evidence_with: trim_newline(include_str!("../../templates/evidence_with.txt")),
        }
    }
}

impl TemplateSet {
    pub const FILES: [&'static str; 4] = ["instruction.txt", "zero_shot.txt", "few_shot.txt", "evidence_with.txt"];

    pub fn from_dir(dir: &Path) -> Result<Self, ExplainError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path)
                .map(|s| trim_newline(&s))
                .map_err(|e| ExplainError::Io(path.display().to_string(), e.to_string()))
        };
        Ok(TemplateSet {
            instruction: read(Self::FILES[0])?,
            zero_shot: read(Self::FILES[1])?,
            few_shot: read(Self::FILES[2])?,
            evidence_with: read(Self::FILES[3])?,
        })
    }
}

/// Substitutes every `{{name}}` in `template` from `slots` in one pass;
/// substituted text is never rescanned.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> Result<String, ExplainError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| ExplainError::Template(format!("unclosed slot near `{}`", &rest[start..])))?;
        let name = after[..end].trim();
        let value = slots
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| ExplainError::MissingSlot(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

fn evidence(templates: &TemplateSet, case: &str, explanation: Option<&str>) -> Result<String, ExplainError> {
    match explanation {
        Some(e) => fill(&templates.evidence_with, &[("case", case), ("explanation", e)]),
        None => Ok(case.to_string()),
    }
}

/// Instantiates the template for `spec.kind`. Explanations are only used by
/// the `with` kinds.
pub fn build_prompt(spec: &PromptSpec, templates: &TemplateSet) -> Result<String, ExplainError> {
    spec.validate()?;
    let with = spec.kind.with_explanation();
    let ev = evidence(templates, &spec.case, spec.explanation.as_deref().filter(|_| with))?;
    if !spec.kind.few_shot() {
        return fill(
            &templates.zero_shot,
            &[("instruction", &templates.instruction), ("query", &spec.query), ("evidence", &ev)],
        );
    }
    let ex = spec.exemplar.as_ref().ok_or_else(|| ExplainError::MissingSlot("exemplar".into()))?;
    let ex_ev = evidence(templates, &ex.case, ex.explanation.as_deref().filter(|_| with))?;
    fill(
        &templates.few_shot,
        &[
            ("instruction", &templates.instruction),
            ("exemplar_query", &ex.query),
            ("exemplar_evidence", &ex_ev),
            ("exemplar_answer", &ex.answer),
            ("query", &spec.query),
            ("evidence", &ev),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PromptKind) -> PromptSpec {
        PromptSpec {
            kind,
            query: "q".into(),
            case: "c".into(),
            explanation: Some("e".into()),
            exemplar: Some(Exemplar { query: "xq".into(), case: "xc".into(), explanation: Some("xe".into()), answer: "theft".into() }),
        }
    }

    const INSTR: &str = "Please answer the criminal name for the query fact description based on the relevant cases.";

    #[test]
    fn zero_shot_exact() {
        let t = TemplateSet::default();
        assert_eq!(
            build_prompt(&spec(PromptKind::ZeroShotWithout), &t).unwrap(),
            format!("{INSTR}\nThe query is q.\nEvidence: c.\nThe answer is:")
        );
        assert_eq!(
            build_prompt(&spec(PromptKind::ZeroShotWith), &t).unwrap(),
            format!("{INSTR}\nThe query is q.\nEvidence: c + e.\nThe answer is:")
        );
    }

    #[test]
    fn few_shot_has_two_blocks() {
        let p = build_prompt(&spec(PromptKind::FewShotWith), &TemplateSet::default()).unwrap();
        assert_eq!(p.matches("The query is").count(), 2);
        assert_eq!(p.matches("Evidence:").count(), 2);
        assert_eq!(p.matches("The answer is:").count(), 2);
        assert!(p.contains("The answer is: theft.\nThe query is q."));
        assert!(p.contains("Evidence: xc + xe."));
        assert!(p.ends_with("The answer is:"));
    }

    #[test]
    fn invariants_enforced() {
        let mut s = spec(PromptKind::ZeroShotWith);
        s.explanation = None;
        assert_eq!(build_prompt(&s, &TemplateSet::default()), Err(ExplainError::MissingSlot("explanation".into())));
        let mut s = spec(PromptKind::FewShotWithout);
        s.exemplar = None;
        assert_eq!(build_prompt(&s, &TemplateSet::default()), Err(ExplainError::MissingSlot("exemplar".into())));
    }

    #[test]
    fn fill_rules() {
        assert_eq!(fill("a {{x}} b", &[("x", "{{y}}")]).unwrap(), "a {{y}} b");
        assert_eq!(fill("{{ x }}", &[("x", "1")]).unwrap(), "1");
        assert_eq!(fill("{{z}}", &[]), Err(ExplainError::MissingSlot("z".into())));
        assert!(matches!(fill("{{z", &[]), Err(ExplainError::Template(_))));
    }

    #[test]
    fn template_dir_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("instruction.txt"), "请回答罪名。\n").unwrap();
        std::fs::write(dir.path().join("zero_shot.txt"), "{{instruction}}查询：{{query}}。证据：{{evidence}}。答案是：\n").unwrap();
        std::fs::write(dir.path().join("few_shot.txt"), "{{instruction}}{{exemplar_query}}{{exemplar_evidence}}{{exemplar_answer}}{{query}}{{evidence}}").unwrap();
        std::fs::write(dir.path().join("evidence_with.txt"), "{{case}}+{{explanation}}").unwrap();
        let t = TemplateSet::from_dir(dir.path()).unwrap();
        assert_eq!(build_prompt(&spec(PromptKind::ZeroShotWith), &t).unwrap(), "请回答罪名。查询：q。证据：c+e。答案是：");
        assert!(TemplateSet::from_dir(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in PromptKind::ALL {
            assert_eq!(k.name().parse::<PromptKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }
}
