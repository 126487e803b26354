use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::FinTracerError;
use crate::harness::FIU;

pub const SCENARIO_SCHEMA: &str = "finpriv/fintracer-scenario/v1";

/// `[institution, account]`.
pub type AccountRef = (String, String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "$schema", default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub institutions: Vec<InstitutionSpec>,
    pub edges: Vec<EdgeSpec>,
    pub seeds: SeedSpec,
    pub iterations: u32,
    #[serde(default)]
    pub reveal: RevealMode,
    #[serde(default)]
    pub dp: Option<DpSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstitutionSpec {
    pub id: String,
    pub accounts: Vec<AccountSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AccountSpec {
    Id(String),
    Detailed {
        id: String,
        #[serde(default)]
        attributes: BTreeMap<String, serde_json::Value>,
    },
}

impl AccountSpec {
    pub fn id(&self) -> &str {
        match self {
            AccountSpec::Id(id) | AccountSpec::Detailed { id, .. } => id,
        }
    }

    fn attribute(&self, name: &str) -> Option<&serde_json::Value> {
        match self {
            AccountSpec::Id(_) => None,
            AccountSpec::Detailed { attributes, .. } => attributes.get(name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub src: AccountRef,
    pub dst: AccountRef,
}

/// Which accounts start with a tag of one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Accounts(Vec<AccountRef>),
    Attribute {
        attribute: String,
        equals: serde_json::Value,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevealMode {
    #[default]
    Exact,
    Nonzero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSpec {
    pub epsilon: f64,
}

/// One bank's slice of the graph: the accounts that take part in
/// cross-institution transactions and the edges leaving them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Institution {
    pub id: String,
    pub accounts: Vec<String>,
    /// `(local source account, destination)` in declaration order.
    pub outgoing: Vec<(String, AccountRef)>,
    /// `(source, local destination account)` in declaration order.
    pub incoming: Vec<(AccountRef, String)>,
}

impl Institution {
    /// Institutions this one sends partial mappings to, in first-edge order.
    pub fn receivers(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.outgoing
            .iter()
            .map(|(_, (inst, _))| inst.as_str())
            .filter(|i| seen.insert(*i))
            .collect()
    }
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub institutions: Vec<Institution>,
    pub seeds: BTreeSet<AccountRef>,
    pub iterations: u32,
    pub reveal: RevealMode,
    pub dp: Option<DpSpec>,
}

impl Network {
    /// Every tagged account, institution by institution.
    pub fn accounts(&self) -> Vec<AccountRef> {
        self.institutions
            .iter()
            .flat_map(|i| i.accounts.iter().map(|a| (i.id.clone(), a.clone())))
            .collect()
    }

    pub fn institution(&self, id: &str) -> Option<&Institution> {
        self.institutions.iter().find(|i| i.id == id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (AccountRef, AccountRef)> + '_ {
        self.institutions.iter().flat_map(|i| {
            i.outgoing
                .iter()
                .map(|(src, dst)| ((i.id.clone(), src.clone()), dst.clone()))
        })
    }
}

fn invalid(msg: String) -> FinTracerError {
    FinTracerError::Scenario(msg)
}

fn show(r: &AccountRef) -> String {
    format!("[{}, {}]", r.0, r.1)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, FinTracerError> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<Network, FinTracerError> {
        if let Some(s) = &self.schema {
            if s != SCENARIO_SCHEMA {
                return Err(invalid(format!("unsupported schema {s}, expected {SCENARIO_SCHEMA}")));
            }
        }
        let mut specs: HashMap<&str, HashMap<&str, &AccountSpec>> = HashMap::new();
        for inst in &self.institutions {
            if inst.id.is_empty() || inst.id == FIU {
                return Err(invalid(format!("institution id {:?} is reserved", inst.id)));
            }
            let mut accounts = HashMap::new();
            for a in &inst.accounts {
                if accounts.insert(a.id(), a).is_some() {
                    return Err(invalid(format!("duplicate account {} in institution {}", a.id(), inst.id)));
                }
            }
            if specs.insert(&inst.id, accounts).is_some() {
                return Err(invalid(format!("duplicate institution {}", inst.id)));
            }
        }
        let resolves = |r: &AccountRef| specs.get(r.0.as_str()).is_some_and(|a| a.contains_key(r.1.as_str()));

        let mut seen_edges = HashSet::new();
        let mut participating: HashSet<AccountRef> = HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            let name = format!("edge {i} ({} -> {})", show(&e.src), show(&e.dst));
            if !resolves(&e.src) {
                return Err(invalid(format!("{name}: unknown source account")));
            }
            if !resolves(&e.dst) {
                return Err(invalid(format!("{name}: unknown destination account")));
            }
            if e.src.0 == e.dst.0 {
                return Err(invalid(format!("{name}: both ends are in the same institution")));
            }
            if !seen_edges.insert((&e.src, &e.dst)) {
                return Err(invalid(format!("{name}: duplicate edge")));
            }
            participating.insert(e.src.clone());
            participating.insert(e.dst.clone());
        }

        let seeds: BTreeSet<AccountRef> = match &self.seeds {
            SeedSpec::Accounts(list) => {
                for s in list {
                    if !resolves(s) {
                        return Err(invalid(format!("seed {}: unknown account", show(s))));
                    }
                }
                list.iter().cloned().collect()
            }
            SeedSpec::Attribute { attribute, equals } => self
                .institutions
                .iter()
                .flat_map(|i| {
                    i.accounts
                        .iter()
                        .filter(|a| a.attribute(attribute) == Some(equals))
                        .map(|a| (i.id.clone(), a.id().to_string()))
                })
                .collect(),
        };

        if let Some(dp) = &self.dp {
            if !(dp.epsilon.is_finite() && dp.epsilon > 0.0) {
                return Err(invalid(format!("dp epsilon must be positive, got {}", dp.epsilon)));
            }
            if self.reveal != RevealMode::Exact {
                return Err(invalid("dp noise applies to exact reveal only".into()));
            }
        }

        let institutions = self
            .institutions
            .iter()
            .map(|inst| {
                let accounts = inst
                    .accounts
                    .iter()
                    .map(|a| a.id().to_string())
                    .filter(|a| participating.contains(&(inst.id.clone(), a.clone())))
                    .collect();
                let outgoing = self
                    .edges
                    .iter()
                    .filter(|e| e.src.0 == inst.id)
                    .map(|e| (e.src.1.clone(), e.dst.clone()))
                    .collect();
                let incoming = self
                    .edges
                    .iter()
                    .filter(|e| e.dst.0 == inst.id)
                    .map(|e| (e.src.clone(), e.dst.1.clone()))
                    .collect();
                Institution {
                    id: inst.id.clone(),
                    accounts,
                    outgoing,
                    incoming,
                }
            })
            .collect();
        Ok(Network {
            institutions,
            seeds,
            iterations: self.iterations,
            reveal: self.reveal,
            dp: self.dp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(edges: &str) -> String {
        format!(
            r#"{{"institutions":[{{"id":"A","accounts":["a1","a2"]}},{{"id":"B","accounts":["b1",{{"id":"b2","attributes":{{"flag":true}}}}]}}],
               "edges":{edges},"seeds":[["A","a1"]],"iterations":2}}"#
        )
    }

    #[test]
    fn keeps_only_participating_accounts() {
        let net = Scenario::from_json(&scenario(r#"[{"src":["A","a1"],"dst":["B","b2"]}]"#))
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(net.accounts(), vec![("A".into(), "a1".into()), ("B".into(), "b2".into())]);
        assert_eq!(net.institution("A").unwrap().receivers(), vec!["B"]);
        assert_eq!(net.reveal, RevealMode::Exact);
    }

    #[test]
    fn dangling_edges_are_named() {
        let err = Scenario::from_json(&scenario(r#"[{"src":["A","a1"],"dst":["B","b9"]}]"#))
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(
            err.to_string(),
            "invalid scenario: edge 0 ([A, a1] -> [B, b9]): unknown destination account"
        );
        let err = Scenario::from_json(&scenario(r#"[{"src":["A","a1"],"dst":["A","a2"]}]"#))
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("same institution"));
    }

    #[test]
    fn attribute_seeds() {
        let mut s = Scenario::from_json(&scenario(r#"[{"src":["A","a1"],"dst":["B","b2"]}]"#)).unwrap();
        s.seeds = SeedSpec::Attribute {
            attribute: "flag".into(),
            equals: serde_json::Value::Bool(true),
        };
        let net = s.validate().unwrap();
        assert_eq!(net.seeds, BTreeSet::from([("B".to_string(), "b2".to_string())]));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_dp() {
        assert!(Scenario::from_json(r#"{"institutions":[],"edges":[],"seeds":[],"iterations":1,"extra":1}"#).is_err());
        let s = Scenario::from_json(r#"{"institutions":[],"edges":[],"seeds":[],"iterations":1,"reveal":"nonzero","dp":{"epsilon":1.0}}"#).unwrap();
        assert!(s.validate().is_err());
    }
}
