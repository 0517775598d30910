//! Test support: a from-scratch scoring oracle over raw KB JSON and a
//! seeded generator of small random knowledge bases.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const EXAMPLE_KB: &str = include_str!("../../../../fixtures/example_kb.json");
pub const EXAMPLE_SPEC: &str = include_str!("../../../../fixtures/example_spec.qk");

pub fn norm(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace() && *c != '_' && *c != '-').flat_map(char::to_lowercase).collect()
}

#[derive(Debug, Clone)]
pub struct OConstraint {
    pub property: String,
    pub cmp: &'static str,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct OSpec {
    pub uses: Vec<String>,
    pub constraints: Vec<OConstraint>,
    /// (attribute name, comparator, level index 0..=4)
    pub qrs: Vec<(String, &'static str, i64)>,
}

impl OSpec {
    pub fn to_text(&self) -> String {
        const LEVELS: [&str; 5] = ["very low", "low", "average", "high", "very high"];
        let mut out = String::new();
        for u in &self.uses {
            out.push_str(&format!("use \"{u}\"\n"));
        }
        for c in &self.constraints {
            let vals: Vec<String> = c.values.iter().map(|v| format!("\"{v}\"")).collect();
            let rhs = if matches!(c.cmp, "includes" | "excludes") { format!("{{{}}}", vals.join(", ")) } else { vals[0].clone() };
            out.push_str(&format!("\"{}\" {} {}\n", c.property, c.cmp, rhs));
        }
        for (a, cmp, l) in &self.qrs {
            out.push_str(&format!("\"{a}\" {cmp} \"{}\"\n", LEVELS[*l as usize]));
        }
        out
    }

    /// The reference specification, written out by hand.
    pub fn example() -> OSpec {
        OSpec {
            uses: vec!["DBMS".into()],
            constraints: vec![
                OConstraint { property: "License".into(), cmp: "includes", values: vec!["GPL".into(), "LGPL".into(), "BSD".into()] },
                OConstraint { property: "Backup facility".into(), cmp: "equal", values: vec!["yes".into()] },
            ],
            qrs: vec![("Reliability".into(), "greater than", 2)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OScore {
    pub satisfied: i64,
    pub violated: i64,
    pub unknown: i64,
    pub qr_met: i64,
    pub compat: i64,
    pub issues: i64,
    pub total: i64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum V {
    Sat,
    Vio,
    Unk,
}

struct OElement {
    id: String,
    kind: String,
    display: String,
    props: BTreeMap<String, String>,
    compat: BTreeSet<String>,
}

struct ODecision {
    selects: Option<String>,
    impacts: Vec<(String, i64, String)>,
    deps: Vec<(String, Option<OConstraint>)>,
    incompat: BTreeSet<String>,
}

/// Scores a configuration straight from the KB JSON, without the library.
pub struct Oracle {
    kinds: Vec<(String, String)>,
    attrs: Vec<(String, String)>,
    elements: BTreeMap<String, OElement>,
    decisions: BTreeMap<String, ODecision>,
}

fn parse_predicate(text: &str) -> OConstraint {
    // `"P" equal "v"` is the only predicate shape the generators and fixture use.
    let parts: Vec<&str> = text.split('"').collect();
    let cmp = match parts[2].trim() {
        "equal" => "equal",
        "not equal" => "not equal",
        other => panic!("oracle does not understand predicate comparator {other:?}"),
    };
    OConstraint { property: parts[1].to_string(), cmp, values: vec![parts[3].to_string()] }
}

impl Oracle {
    pub fn new(kb_json: &str) -> Self {
        let v: Value = serde_json::from_str(kb_json).unwrap();
        let arr = |k: &str| v[k].as_array().cloned().unwrap_or_default();
        let kinds = arr("kinds")
            .iter()
            .map(|k| (k["id"].as_str().unwrap().to_string(), k["display_name"].as_str().unwrap().to_string()))
            .collect();
        let attrs = arr("attributes")
            .iter()
            .map(|k| (k["id"].as_str().unwrap().to_string(), k["display_name"].as_str().unwrap().to_string()))
            .collect();
        let mut elements: BTreeMap<String, OElement> = BTreeMap::new();
        for e in arr("elements") {
            let props = e["properties"]
                .as_object()
                .map(|m| m.iter().map(|(k, v)| (norm(k), v.as_str().unwrap().to_string())).collect())
                .unwrap_or_default();
            let compat = e["compatible_with"]
                .as_array()
                .map(|a| a.iter().map(|x| x.as_str().unwrap().to_string()).collect())
                .unwrap_or_default();
            let id = e["id"].as_str().unwrap().to_string();
            elements.insert(
                id.clone(),
                OElement {
                    id,
                    kind: e["kind"].as_str().unwrap().to_string(),
                    display: e["display_name"].as_str().unwrap().to_string(),
                    props,
                    compat,
                },
            );
        }
        let pairs: Vec<(String, String)> =
            elements.values().flat_map(|e| e.compat.iter().map(|c| (e.id.clone(), c.clone()))).collect();
        for (a, b) in pairs {
            elements.get_mut(&b).unwrap().compat.insert(a);
        }
        let mut decisions: BTreeMap<String, ODecision> = BTreeMap::new();
        for d in arr("decisions") {
            let impacts = d["impacts"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .map(|i| {
                            (
                                i["attribute"].as_str().unwrap().to_string(),
                                i["valence"].as_i64().unwrap(),
                                i["certainty"].as_str().unwrap().to_string(),
                            )
                        })
                        .collect()
                })
                .unwrap_or_default();
            let deps = d["dependencies"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .map(|x| (x["kind"].as_str().unwrap().to_string(), x["predicate"].as_str().map(parse_predicate)))
                        .collect()
                })
                .unwrap_or_default();
            let incompat = d["incompatible_with"]
                .as_array()
                .map(|a| a.iter().map(|x| x.as_str().unwrap().to_string()).collect())
                .unwrap_or_default();
            decisions.insert(
                d["id"].as_str().unwrap().to_string(),
                ODecision { selects: d["selects"].as_str().map(str::to_string), impacts, deps, incompat },
            );
        }
        let inc: Vec<(String, String)> =
            decisions.iter().flat_map(|(id, d)| d.incompat.iter().map(|o| (id.clone(), o.clone()))).collect();
        for (a, b) in inc {
            decisions.get_mut(&b).unwrap().incompat.insert(a);
        }
        Oracle { kinds, attrs, elements, decisions }
    }

    pub fn decision_ids(&self) -> Vec<String> {
        self.decisions.keys().cloned().collect()
    }

    fn kind_key(&self, property: &str) -> Option<String> {
        let k = norm(property);
        self.kinds.iter().find(|(id, d)| norm(id) == k || norm(d) == k).map(|(id, _)| id.clone())
    }

    fn eval(&self, c: &OConstraint, e: &OElement) -> V {
        let key = norm(&c.property);
        let observed: Vec<String> = match e.props.get(&key) {
            Some(v) if v == "?" => return V::Unk,
            Some(v) => vec![v.clone()],
            None => match self.kind_key(&c.property) {
                Some(kind) if kind == e.kind => vec![e.id.clone(), e.display.clone()],
                _ => return V::Unk,
            },
        };
        let has = |w: &str| observed.iter().any(|o| o.to_lowercase() == w.to_lowercase());
        let b = match c.cmp {
            "equal" => has(&c.values[0]),
            "not equal" => !has(&c.values[0]),
            "includes" => c.values.iter().any(|w| has(w)),
            "excludes" => !c.values.iter().any(|w| has(w)),
            ord => {
                let (Ok(x), Ok(y)) = (observed[0].parse::<f64>(), c.values[0].parse::<f64>()) else { return V::Vio };
                match ord {
                    "greater than" => x > y,
                    "less than" => x < y,
                    "at least" => x >= y,
                    "at most" => x <= y,
                    _ => unreachable!(),
                }
            }
        };
        if b {
            V::Sat
        } else {
            V::Vio
        }
    }

    fn carries(&self, c: &OConstraint, kind: &str) -> bool {
        let key = norm(&c.property);
        if self.kind_key(&c.property).as_deref() == Some(kind) {
            return true;
        }
        self.elements.values().any(|e| e.kind == kind && e.props.contains_key(&key))
    }

    fn attr_id(&self, name: &str) -> Option<String> {
        self.attrs.iter().find(|(id, d)| norm(id) == norm(name) || norm(d) == norm(name)).map(|(id, _)| id.clone())
    }

    pub fn predicted(&self, config: &[String], attribute: &str) -> i64 {
        let sum: i64 = config
            .iter()
            .flat_map(|d| self.decisions[d].impacts.iter())
            .filter(|(a, _, c)| a == attribute && c == "certain")
            .map(|(_, v, _)| *v)
            .sum();
        (2 + sum.clamp(-2, 2)).clamp(0, 4)
    }

    pub fn score(&self, config: &[String], spec: &OSpec) -> OScore {
        let mut s = OScore::default();
        let selected: BTreeSet<&String> = config.iter().filter_map(|d| self.decisions[d].selects.as_ref()).collect();
        for eid in &selected {
            let e = &self.elements[*eid];
            for c in spec.constraints.iter().filter(|c| self.carries(c, &e.kind)) {
                match self.eval(c, e) {
                    V::Sat => s.satisfied += 1,
                    V::Vio => s.violated += 1,
                    V::Unk => s.unknown += 1,
                }
            }
            s.compat += e
                .compat
                .iter()
                .filter(|o| spec.constraints.iter().all(|c| self.eval(c, &self.elements[*o]) != V::Vio))
                .count() as i64;
        }
        for (a, cmp, level) in &spec.qrs {
            // Names that are not attributes bind as property constraints.
            if let Some(id) = self.attr_id(a) {
                let p = self.predicted(config, &id);
                let met = match *cmp {
                    "greater than" => p > *level,
                    "less than" => p < *level,
                    "at least" => p >= *level,
                    "at most" => p <= *level,
                    "equal" => p == *level,
                    _ => p != *level,
                };
                s.qr_met += met as i64;
            }
        }
        s.issues = self.issue_count(config);
        s.total = 10 * s.satisfied - 20 * s.violated + 4 * s.qr_met + 2 * s.compat - 15 * s.issues;
        s
    }

    pub fn issue_count(&self, config: &[String]) -> i64 {
        let mut n = 0;
        let mut sorted: Vec<&String> = config.iter().collect();
        sorted.sort();
        sorted.dedup();
        for (i, a) in sorted.iter().enumerate() {
            for b in &sorted[i + 1..] {
                if self.decisions[*a].incompat.contains(*b) {
                    n += 1;
                }
            }
        }
        let selected: BTreeSet<&String> = sorted.iter().filter_map(|d| self.decisions[*d].selects.as_ref()).collect();
        for d in &sorted {
            for (kind, pred) in &self.decisions[*d].deps {
                let Some(pred) = pred else { continue };
                n += selected
                    .iter()
                    .filter(|e| self.elements[**e].kind == *kind && self.eval(pred, &self.elements[**e]) == V::Vio)
                    .count() as i64;
            }
        }
        for (i, a) in sorted.iter().enumerate() {
            for b in &sorted[i + 1..] {
                if let (Some(x), Some(y)) = (&self.decisions[*a].selects, &self.decisions[*b].selects) {
                    if x != y && self.elements[x].kind == self.elements[y].kind {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    fn slot(&self, d: &str) -> Option<&str> {
        self.decisions[d].selects.as_ref().map(|e| self.elements[e].kind.as_str())
    }

    /// Best total over every subset of `universe` that fills each kind at
    /// most once.
    pub fn best_total(&self, universe: &[String], spec: &OSpec) -> i64 {
        let n = universe.len();
        let mut best = i64::MIN;
        for mask in 0u32..(1 << n) {
            let config: Vec<String> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| universe[i].clone()).collect();
            let slots: Vec<&str> = config.iter().filter_map(|d| self.slot(d)).collect();
            let distinct: BTreeSet<&str> = slots.iter().copied().collect();
            if distinct.len() != slots.len() {
                continue;
            }
            best = best.max(self.score(&config, spec).total);
        }
        best
    }
}

pub struct RandomCase {
    pub kb_json: String,
    pub spec: OSpec,
}

const PROPS: [&str; 2] = ["Tier", "Vendor"];
const VALUES: [&str; 4] = ["a", "b", "c", "?"];

/// A random KB with up to `max_decisions` decisions and a specification
/// under which every decision is applicable.
pub fn random_case(seed: u64, max_decisions: usize) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_attrs = rng.gen_range(1..=3);
    let n_kinds = rng.gen_range(1..=3);
    let attrs: Vec<String> = (0..n_attrs).map(|i| format!("q{i}")).collect();
    let kinds: Vec<String> = (0..n_kinds).map(|i| format!("k{i}")).collect();

    let mut elements = Vec::new();
    let mut element_ids = Vec::new();
    for k in &kinds {
        for j in 0..rng.gen_range(2..=4) {
            let id = format!("{k}_e{j}");
            let mut props = serde_json::Map::new();
            for p in PROPS {
                if rng.gen_bool(0.8) {
                    props.insert(p.to_string(), json!(VALUES.choose(&mut rng).unwrap()));
                }
            }
            if rng.gen_bool(0.5) {
                props.insert("Score".into(), json!(rng.gen_range(1..=5).to_string()));
            }
            elements.push((id.clone(), k.clone(), props));
            element_ids.push(id);
        }
    }
    let element_docs: Vec<Value> = elements
        .iter()
        .map(|(id, k, props)| {
            let compat: Vec<&String> = element_ids.iter().filter(|o| *o != id && rng.gen_bool(0.25)).collect();
            json!({"id": id, "kind": k, "display_name": id.to_uppercase(), "properties": props, "compatible_with": compat})
        })
        .collect();

    let n_dec = rng.gen_range(1..=max_decisions);
    let mut decisions = Vec::new();
    let ids: Vec<String> = (0..n_dec).map(|i| format!("d{i:02}")).collect();
    let certainties = ["certain", "certain", "possible", "conditional"];
    for (i, id) in ids.iter().enumerate() {
        let mut d = serde_json::Map::new();
        d.insert("id".into(), json!(id));
        d.insert("display_name".into(), json!(format!("Decision {i}")));
        let tactic = rng.gen_bool(0.3);
        if tactic {
            d.insert("offered_when".into(), json!({"attribute": attrs.choose(&mut rng).unwrap()}));
        } else {
            d.insert("selects".into(), json!(element_ids.choose(&mut rng).unwrap()));
        }
        let impacts: Vec<Value> = (0..rng.gen_range(0..=2))
            .map(|_| {
                let valence: i64 = rng.gen_range(-2..=2);
                json!({"attribute": attrs.choose(&mut rng).unwrap(), "valence": valence,
                       "certainty": certainties.choose(&mut rng).unwrap(), "note": "generated"})
            })
            .collect();
        d.insert("impacts".into(), json!(impacts));
        if rng.gen_bool(0.3) {
            let kind = kinds.choose(&mut rng).unwrap();
            let mut dep = json!({"kind": kind, "label": "generated"});
            if rng.gen_bool(0.5) {
                dep["predicate"] = json!(format!("\"{}\" equal \"{}\"", PROPS.choose(&mut rng).unwrap(), VALUES[..3].choose(&mut rng).unwrap()));
            }
            d.insert("dependencies".into(), json!([dep]));
        }
        let incompat: Vec<&String> = ids[..i].iter().filter(|_| rng.gen_bool(0.1)).collect();
        d.insert("incompatible_with".into(), json!(incompat));
        decisions.push(Value::Object(d));
    }

    let kb = json!({
        "version": format!("random-{seed}"),
        "attributes": attrs.iter().map(|a| json!({"id": a, "display_name": a.to_uppercase()})).collect::<Vec<_>>(),
        "kinds": kinds.iter().map(|k| json!({"id": k, "display_name": k.to_uppercase(), "category": "technology"})).collect::<Vec<_>>(),
        "elements": element_docs,
        "decisions": decisions,
    });

    let mut constraints = Vec::new();
    for _ in 0..rng.gen_range(0..=3) {
        let c = match rng.gen_range(0..5) {
            0 => OConstraint { property: PROPS.choose(&mut rng).unwrap().to_string(), cmp: "equal", values: vec![VALUES[..3].choose(&mut rng).unwrap().to_string()] },
            1 => OConstraint { property: PROPS.choose(&mut rng).unwrap().to_string(), cmp: "not equal", values: vec![VALUES[..3].choose(&mut rng).unwrap().to_string()] },
            2 => OConstraint { property: PROPS.choose(&mut rng).unwrap().to_string(), cmp: "includes", values: vec!["a".into(), "b".into()] },
            3 => OConstraint { property: PROPS.choose(&mut rng).unwrap().to_string(), cmp: "excludes", values: vec![VALUES[..3].choose(&mut rng).unwrap().to_string()] },
            _ => OConstraint { property: "Score".into(), cmp: "at least", values: vec![rng.gen_range(1..=5).to_string()] },
        };
        constraints.push(c);
    }
    let qr_cmps = ["at least", "greater than", "at most"];
    let qrs = attrs
        .iter()
        .map(|a| {
            let cmp = *qr_cmps.choose(&mut rng).unwrap();
            let level = match cmp {
                "greater than" => rng.gen_range(0..=3),
                "at most" => rng.gen_range(1..=4),
                _ => rng.gen_range(0..=4),
            };
            (a.to_uppercase(), cmp, level)
        })
        .collect();
    let spec = OSpec { uses: kinds.iter().map(|k| k.to_uppercase()).collect(), constraints, qrs };
    RandomCase { kb_json: serde_json::to_string_pretty(&kb).unwrap(), spec }
}

/// Specifications of arbitrary valid statements, for round-trip checks.
pub mod specs {
    use proptest::prelude::*;
    use quark_core::speclang::{
        Comparator, OrdinalLevel, Origin, PropertyConstraint, QualityRequirement, SpecStatement, Statement,
    };
    use quark_core::ArchSpec;

    pub fn name() -> impl Strategy<Value = String> {
        prop_oneof![
            "[A-Za-z][A-Za-z0-9_]{0,8}",
            "[A-Za-z][A-Za-z0-9 ]{0,10}[A-Za-z0-9]",
            "[ -~]{0,12}",
            "[a-zé\"\\\\ #;{}]{1,8}",
        ]
    }

    pub fn value() -> impl Strategy<Value = String> {
        prop_oneof![name(), "-?[0-9]{1,3}(\\.[0-9]{1,2})?"]
    }

    pub fn level() -> impl Strategy<Value = OrdinalLevel> {
        prop::sample::select(OrdinalLevel::ALL.to_vec())
    }

    pub fn statement() -> impl Strategy<Value = Statement> {
        let scalar = prop::sample::select(vec![Comparator::Equal, Comparator::NotEqual]);
        let set = prop::sample::select(vec![Comparator::Includes, Comparator::Excludes]);
        let ordering = prop::sample::select(vec![Comparator::GreaterThan, Comparator::LessThan, Comparator::AtLeast, Comparator::AtMost]);
        prop_oneof![
            name().prop_map(|kind| Statement::Use { kind }),
            (name(), scalar, value()).prop_map(|(property, comparator, v)| Statement::Property(PropertyConstraint {
                property,
                comparator,
                values: vec![v]
            })),
            (name(), set, prop::collection::btree_set(value(), 1..4)).prop_map(|(property, comparator, vs)| {
                Statement::Property(PropertyConstraint { property, comparator, values: vs.into_iter().collect() })
            }),
            (name(), ordering.clone(), "-?[0-9]{1,3}").prop_map(|(property, comparator, v)| {
                Statement::Property(PropertyConstraint { property, comparator, values: vec![v] })
            }),
            (name(), ordering, level()).prop_map(|(attribute, comparator, level)| {
                Statement::Quality(QualityRequirement { attribute, comparator, level })
            }),
        ]
    }

    pub fn arch_spec() -> impl Strategy<Value = ArchSpec> {
        prop::collection::vec(statement(), 0..8).prop_map(|bodies| ArchSpec {
            statements: bodies.into_iter().map(|b| SpecStatement::canonical(b, Origin::Architect)).collect(),
        })
    }
}
