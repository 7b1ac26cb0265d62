use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LtsModel, ModelError};

/// On-disk model format. Keys are fixed; anything else is rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub states: Vec<String>,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<(String, String)>>,
    #[serde(default)]
    pub valuation: BTreeMap<String, Vec<String>>,
}

impl ModelJson {
    pub fn into_model(self) -> Result<LtsModel, ModelError> {
        let mut m = LtsModel::new(self.states)?;
        let lookup = |m: &LtsModel, context: String, name: &str| {
            m.state_index(name).ok_or_else(|| ModelError::UnknownState {
                context,
                name: name.to_string(),
            })
        };
        for (action, pairs) in &self.relations {
            m.declare_action(action);
            for (src, dst) in pairs {
                let s = lookup(&m, format!("relation `{action}`"), src)?;
                let t = lookup(&m, format!("relation `{action}`"), dst)?;
                m.add_transition(action, s, t);
            }
        }
        for (prop, states) in &self.valuation {
            m.declare_prop(prop);
            for name in states {
                let s = lookup(&m, format!("valuation of `{prop}`"), name)?;
                m.set_true(prop, s);
            }
        }
        Ok(m)
    }

    pub fn from_model(m: &LtsModel) -> Self {
        let name = |i: usize| m.state_names()[i].clone();
        let relations = m
            .actions()
            .map(|a| {
                let pairs = m
                    .transitions(a)
                    .into_iter()
                    .map(|(s, t)| (name(s), name(t)))
                    .collect();
                (a.to_string(), pairs)
            })
            .collect();
        let valuation = m
            .propositions()
            .map(|p| (p.to_string(), m.prop_states(p).iter().map(name).collect()))
            .collect();
        ModelJson {
            states: m.state_names().to_vec(),
            relations,
            valuation,
        }
    }
}

impl LtsModel {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str::<ModelJson>(text)?.into_model()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelJson::from_model(self)).expect("model serializes")
    }

    /// Graphviz rendering: one node per state labelled with the
    /// propositions true there, one edge per transition labelled by action.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lts {\n  node [shape=circle];\n");
        for (i, name) in self.state_names().iter().enumerate() {
            let props: Vec<&str> = self
                .propositions()
                .filter(|p| self.prop_states(p).contains(i))
                .collect();
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\\n{}\"];",
                escape(name),
                escape(name),
                escape(&props.join(","))
            );
        }
        for a in self.actions() {
            for (s, t) in self.transitions(a) {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}\"];",
                    escape(&self.state_names()[s]),
                    escape(&self.state_names()[t]),
                    escape(a)
                );
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
