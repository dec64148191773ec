use std::collections::{BTreeMap, HashMap};

use super::{FolError, FolRule, Formula};

/// Source of predicate scores for evaluation.
pub trait Assignment {
    fn score(&self, predicate: &str) -> Option<f64>;
}

impl Assignment for HashMap<String, f64> {
    fn score(&self, predicate: &str) -> Option<f64> {
        self.get(predicate).copied()
    }
}

impl Assignment for BTreeMap<String, f64> {
    fn score(&self, predicate: &str) -> Option<f64> {
        self.get(predicate).copied()
    }
}

impl<A: Assignment + ?Sized> Assignment for &A {
    fn score(&self, predicate: &str) -> Option<f64> {
        (**self).score(predicate)
    }
}

/// Strong conjunction: `max(0, Σs - n + 1)`.
pub fn lukasiewicz_and(scores: &[f64]) -> f64 {
    let n = scores.len() as f64;
    (scores.iter().sum::<f64>() - n + 1.0).max(0.0)
}

/// Strong disjunction: `min(1, Σs)`.
pub fn lukasiewicz_or(scores: &[f64]) -> f64 {
    scores.iter().sum::<f64>().min(1.0)
}

pub fn lukasiewicz_not(score: f64) -> f64 {
    1.0 - score
}

/// Evaluates `formula` under Łukasiewicz semantics.
///
/// Negated compounds evaluate as `1 - eval(inner)`; nothing is pushed inward.
/// Atom scores must lie in `[0, 1]`.
pub fn eval_formula<A: Assignment + ?Sized>(formula: &Formula, assignment: &A) -> Result<f64, FolError> {
    match formula {
        Formula::Atom(id) => {
            let score = assignment
                .score(id)
                .ok_or_else(|| FolError::MissingAssignment(id.clone()))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(FolError::ScoreOutOfRange {
                    predicate: id.clone(),
                    score,
                });
            }
            Ok(score)
        }
        Formula::Not(inner) => Ok(lukasiewicz_not(eval_formula(inner, assignment)?)),
        Formula::And(children) => {
            let scores = eval_children(children, assignment)?;
            Ok(lukasiewicz_and(&scores))
        }
        Formula::Or(children) => {
            let scores = eval_children(children, assignment)?;
            Ok(lukasiewicz_or(&scores))
        }
    }
}

fn eval_children<A: Assignment + ?Sized>(children: &[Formula], assignment: &A) -> Result<Vec<f64>, FolError> {
    children.iter().map(|c| eval_formula(c, assignment)).collect()
}

/// Scores the body of `rule`. The head only names the conclusion.
pub fn eval_rule<A: Assignment + ?Sized>(rule: &FolRule, assignment: &A) -> Result<f64, FolError> {
    eval_formula(&rule.body, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn assign(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn atoms(ids: &[&str]) -> Vec<Formula> {
        ids.iter().map(|id| Formula::atom(*id)).collect()
    }

    #[test]
    fn or_saturates_at_one() {
        let f = Formula::Or(atoms(&["P1", "P2", "P3"]));
        let a = assign(&[("P1", 0.8), ("P2", 0.2), ("P3", 0.05)]);
        assert!((eval_formula(&f, &a).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn and_of_two() {
        let f = Formula::And(atoms(&["P1", "P2"]));
        let a = assign(&[("P1", 0.8), ("P2", 0.9)]);
        assert!((eval_formula(&f, &a).unwrap() - 0.7).abs() < TOL);
    }

    #[test]
    fn cnf_two_step() {
        // (P1 | P2) & P3: inner disjunction 0.6, then conjunction with 1.0.
        let f = Formula::And(vec![Formula::Or(atoms(&["P1", "P2"])), Formula::atom("P3")]);
        let a = assign(&[("P1", 0.3), ("P2", 0.3), ("P3", 1.0)]);
        assert!((eval_formula(&f, &a).unwrap() - 0.6).abs() < TOL);
    }

    #[test]
    fn all_zero_or_is_zero() {
        let rule = FolRule {
            article_id: "264".into(),
            body: Formula::Or(atoms(&["P1", "P2", "P3"])),
            head: "crime of theft".into(),
        };
        let a = assign(&[("P1", 0.0), ("P2", 0.0), ("P3", 0.0)]);
        assert_eq!(eval_rule(&rule, &a).unwrap(), 0.0);
    }

    #[test]
    fn negated_compound_is_complement() {
        let f = Formula::not(Formula::And(atoms(&["a", "b"])));
        let a = assign(&[("a", 0.9), ("b", 0.6)]);
        assert!((eval_formula(&f, &a).unwrap() - 0.5).abs() < TOL);
    }

    #[test]
    fn missing_atom_is_an_error() {
        let f = Formula::Or(atoms(&["P1", "P9"]));
        let err = eval_formula(&f, &assign(&[("P1", 0.5)])).unwrap_err();
        assert_eq!(err, FolError::MissingAssignment("P9".into()));
    }

    #[test]
    fn out_of_range_atom_is_an_error() {
        let err = eval_formula(&Formula::atom("a"), &assign(&[("a", 1.5)])).unwrap_err();
        assert!(matches!(err, FolError::ScoreOutOfRange { .. }));
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")].prop_map(Formula::atom);
        leaf.prop_recursive(4, 24, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
                prop::collection::vec(inner, 2..4).prop_map(Formula::Or),
            ]
        })
    }

    fn arb_positive_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(Formula::atom);
        leaf.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
                prop::collection::vec(inner, 2..4).prop_map(Formula::Or),
            ]
        })
    }

    fn arb_assignment() -> impl Strategy<Value = HashMap<String, f64>> {
        prop::array::uniform4(0.0f64..=1.0).prop_map(|s| {
            ["a", "b", "c", "d"]
                .iter()
                .zip(s)
                .map(|(k, v)| (k.to_string(), v))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn bounded_in_unit_interval(f in arb_formula(), a in arb_assignment()) {
            let v = eval_formula(&f, &a).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn monotone_without_negation(
            f in arb_positive_formula(),
            a in arb_assignment(),
            which in 0usize..3,
            bump in 0.0f64..=1.0,
        ) {
            let key = ["a", "b", "c"][which].to_string();
            let mut raised = a.clone();
            let old = raised[&key];
            raised.insert(key, (old + bump).min(1.0));
            prop_assert!(eval_formula(&f, &raised).unwrap() + 1e-12 >= eval_formula(&f, &a).unwrap());
        }

        #[test]
        fn de_morgan_at_endpoints(bits in prop::array::uniform3(any::<bool>())) {
            let a: HashMap<String, f64> = ["a", "b", "c"]
                .iter()
                .zip(bits)
                .map(|(k, b)| (k.to_string(), if b { 1.0 } else { 0.0 }))
                .collect();
            let lhs = Formula::not(Formula::Or(atoms(&["a", "b", "c"])));
            let rhs = Formula::And(atoms(&["a", "b", "c"]).into_iter().map(Formula::not).collect());
            prop_assert_eq!(eval_formula(&lhs, &a).unwrap(), eval_formula(&rhs, &a).unwrap());
        }
    }
}
