use serde::{Deserialize, Serialize};

use super::{Comparator, OrdinalLevel, PropertyConstraint};
use crate::kb::{Element, PropertyValue};
use crate::names::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintVerdict {
    Satisfied,
    Violated,
    Unknown,
}

impl ConstraintVerdict {
    fn from_bool(holds: bool) -> Self {
        if holds {
            ConstraintVerdict::Satisfied
        } else {
            ConstraintVerdict::Violated
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub verdict: ConstraintVerdict,
    /// the element's value for the property, when known
    pub observed: Option<String>,
    pub diagnostic: Option<String>,
}

/// Evaluates `constraint` on `element`. A missing or `?` property yields
/// [`ConstraintVerdict::Unknown`].
pub fn eval_property_constraint(constraint: &PropertyConstraint, element: &Element) -> ConstraintVerdict {
    evaluate_constraint(constraint, &normalize(&constraint.property), element).verdict
}

/// Like [`eval_property_constraint`] with a pre-resolved property key. When
/// the key names the element's own kind, the element's id and display name
/// stand in as the value.
pub fn evaluate_constraint(constraint: &PropertyConstraint, key: &str, element: &Element) -> Evaluation {
    let observed: Vec<&str> = match element.property(key) {
        Some((_, PropertyValue::Known(v))) => vec![v.as_str()],
        Some((_, PropertyValue::Unknown)) => return unknown(),
        None if normalize(element.kind.as_str()) == key => vec![element.id.as_str(), element.display_name.as_str()],
        None => return unknown(),
    };
    let shown = Some(observed[0].to_string());
    let matches_any = |wanted: &str| observed.iter().any(|o| o.to_lowercase() == wanted.to_lowercase());

    let verdict = match constraint.comparator {
        Comparator::Equal => ConstraintVerdict::from_bool(constraint.values.first().is_some_and(|v| matches_any(v))),
        Comparator::NotEqual => ConstraintVerdict::from_bool(!constraint.values.first().is_some_and(|v| matches_any(v))),
        Comparator::Includes => ConstraintVerdict::from_bool(constraint.values.iter().any(|v| matches_any(v))),
        Comparator::Excludes => ConstraintVerdict::from_bool(!constraint.values.iter().any(|v| matches_any(v))),
        cmp => {
            let wanted = constraint.values.first().map_or("", String::as_str);
            let have = observed[0];
            if let (Some(a), Some(b)) = (OrdinalLevel::parse(have), OrdinalLevel::parse(wanted)) {
                ConstraintVerdict::from_bool(cmp.holds(a, b))
            } else if let (Ok(a), Ok(b)) = (have.trim().parse::<f64>(), wanted.trim().parse::<f64>()) {
                ConstraintVerdict::from_bool(cmp.holds(a, b))
            } else {
                return Evaluation {
                    verdict: ConstraintVerdict::Violated,
                    observed: shown,
                    diagnostic: Some(format!("cannot order {have:?} against {wanted:?}")),
                };
            }
        }
    };
    Evaluation { verdict, observed: shown, diagnostic: None }
}

fn unknown() -> Evaluation {
    Evaluation { verdict: ConstraintVerdict::Unknown, observed: None, diagnostic: None }
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;

    fn element(props: &[(&str, &str)]) -> Element {
        Element {
            id: "e1".into(),
            kind: "dbms".into(),
            display_name: "E One".into(),
            properties: props
                .iter()
                .map(|(k, v)| {
                    let value = if *v == "?" { PropertyValue::Unknown } else { PropertyValue::Known(v.to_string()) };
                    (k.to_string(), value)
                })
                .collect::<BTreeMap<_, _>>(),
            compatible_with: BTreeSet::new(),
        }
    }

    fn constraint(property: &str, comparator: Comparator, values: &[&str]) -> PropertyConstraint {
        PropertyConstraint { property: property.into(), comparator, values: values.iter().map(|v| v.to_string()).collect() }
    }

    #[test]
    fn license_membership() {
        let oss = constraint("License", Comparator::Includes, &["GPL", "LGPL", "BSD"]);
        assert_eq!(eval_property_constraint(&oss, &element(&[("License", "GPL")])), ConstraintVerdict::Satisfied);
        assert_eq!(eval_property_constraint(&oss, &element(&[("License", "Proprietary")])), ConstraintVerdict::Violated);
        assert_eq!(eval_property_constraint(&oss, &element(&[("License", "gpl")])), ConstraintVerdict::Satisfied);
    }

    #[test]
    fn unknown_and_missing_values() {
        let backup = constraint("Backup facility", Comparator::Equal, &["yes"]);
        assert_eq!(eval_property_constraint(&backup, &element(&[("BackupFacility", "?")])), ConstraintVerdict::Unknown);
        assert_eq!(eval_property_constraint(&backup, &element(&[])), ConstraintVerdict::Unknown);
        assert_eq!(eval_property_constraint(&backup, &element(&[("BackupFacility", "yes")])), ConstraintVerdict::Satisfied);
    }

    #[test]
    fn ordering_uses_levels_then_numbers() {
        let e = element(&[("Maturity", "high"), ("Version", "8.3"), ("Vendor", "acme")]);
        assert_eq!(
            eval_property_constraint(&constraint("Maturity", Comparator::GreaterThan, &["average"]), &e),
            ConstraintVerdict::Satisfied
        );
        assert_eq!(
            eval_property_constraint(&constraint("Version", Comparator::AtLeast, &["10"]), &e),
            ConstraintVerdict::Violated
        );
        let odd = evaluate_constraint(&constraint("Vendor", Comparator::AtMost, &["5"]), "vendor", &e);
        assert_eq!(odd.verdict, ConstraintVerdict::Violated);
        assert!(odd.diagnostic.is_some());
    }

    #[test]
    fn kind_pseudo_property() {
        let e = element(&[]);
        assert_eq!(
            eval_property_constraint(&constraint("DBMS", Comparator::Excludes, &["e1"]), &e),
            ConstraintVerdict::Violated
        );
        assert_eq!(
            eval_property_constraint(&constraint("DBMS", Comparator::Equal, &["E One"]), &e),
            ConstraintVerdict::Satisfied
        );
    }

    #[test]
    fn negation_swaps_satisfied_and_violated() {
        let els = [element(&[("P", "a")]), element(&[("P", "b")]), element(&[("P", "?")]), element(&[])];
        for cmp in [Comparator::Equal, Comparator::NotEqual, Comparator::Includes, Comparator::Excludes] {
            let c = constraint("P", cmp, &["a", "c"]);
            let n = constraint("P", cmp.negated(), &["a", "c"]);
            for e in &els {
                let (v, w) = (eval_property_constraint(&c, e), eval_property_constraint(&n, e));
                match v {
                    ConstraintVerdict::Unknown => assert_eq!(w, ConstraintVerdict::Unknown),
                    ConstraintVerdict::Satisfied => assert_eq!(w, ConstraintVerdict::Violated),
                    ConstraintVerdict::Violated => assert_eq!(w, ConstraintVerdict::Satisfied),
                }
            }
        }
    }
}
