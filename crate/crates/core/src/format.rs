//! Instance files and witness records.
//!
//! A profile is one JSON document: the seller's neighbors, every agent with
//! her valuation and true neighbor set, and optionally the reports that
//! differ from truth-telling (`null` meaning the agent stays away). Money
//! values are strings, decimal where exact ("2.5"), fractional otherwise
//! ("1/3"); both forms parse. Malformed structure is a hard error with the
//! offending path; reported neighbor entries naming the reporter or an
//! undeclared agent are dropped with a warning instead, since they cannot
//! spread the sale to anyone.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audit::{
    AttackModel, FamilySpec, Property, PropertyVerdict, VerdictStatus, Witness, WitnessDetail,
};
use crate::mechanisms::Mechanism;
use crate::model::{Agent, AgentId, GlobalProfile, Instance, Report};
use crate::money::Money;

/// Why an instance or witness document was rejected. The message names the
/// offending field path or carries serde's line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ParseError(pub String);

fn at(path: String, what: impl std::fmt::Display) -> ParseError {
    ParseError(format!("{path}: {what}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub seller_neighbors: Vec<String>,
    pub agents: BTreeMap<String, AgentDoc>,
    /// Reports that differ from truthful; `None` is an absent agent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reports: BTreeMap<String, Option<ReportDoc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub valuation: Money,
    #[serde(default)]
    pub neighbors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub bid: Money,
    #[serde(default)]
    pub neighbors: Vec<String>,
}

/// A parsed profile plus anything the parser chose to tolerate.
#[derive(Clone, Debug)]
pub struct ParsedProfile {
    pub profile: GlobalProfile,
    pub warnings: Vec<String>,
}

pub fn parse_profile(text: &str) -> Result<ParsedProfile, ParseError> {
    let doc: ProfileDoc = serde_json::from_str(text)
        .map_err(|e| ParseError(format!("invalid instance document: {e}")))?;
    realize_profile(&doc)
}

/// Turn a document into a live profile, validating as the model requires:
/// valuations and bids non-negative, true neighbor sets closed over declared
/// agents, report keys declared. Dirty reported neighbor entries are dropped
/// with a warning.
pub fn realize_profile(doc: &ProfileDoc) -> Result<ParsedProfile, ParseError> {
    let mut warnings = Vec::new();
    let mut agents: BTreeMap<AgentId, Agent> = BTreeMap::new();
    for (name, spec) in &doc.agents {
        if spec.valuation.is_negative() {
            return Err(at(
                format!("agents.{name}.valuation"),
                format_args!("negative value {}", spec.valuation),
            ));
        }
        let mut neighbors = BTreeSet::new();
        for n in &spec.neighbors {
            if n == name {
                return Err(at(
                    format!("agents.{name}.neighbors"),
                    "an agent cannot be her own neighbor",
                ));
            }
            if !doc.agents.contains_key(n) {
                return Err(at(
                    format!("agents.{name}.neighbors"),
                    format_args!("undeclared agent {n}"),
                ));
            }
            neighbors.insert(AgentId::new(n.as_str()));
        }
        agents.insert(
            AgentId::new(name.as_str()),
            Agent {
                valuation: spec.valuation.clone(),
                neighbors,
            },
        );
    }
    let mut seller_neighbors = BTreeSet::new();
    for n in &doc.seller_neighbors {
        if !doc.agents.contains_key(n) {
            return Err(at(
                "seller_neighbors".into(),
                format_args!("undeclared agent {n}"),
            ));
        }
        seller_neighbors.insert(AgentId::new(n.as_str()));
    }
    let instance = Instance::new(seller_neighbors, agents);
    let mut profile = GlobalProfile::truthful(Arc::new(instance));
    for (name, entry) in &doc.reports {
        if !doc.agents.contains_key(name) {
            return Err(at(format!("reports.{name}"), "undeclared agent"));
        }
        let report = match entry {
            None => Report::Absent,
            Some(r) => {
                if r.bid.is_negative() {
                    return Err(at(
                        format!("reports.{name}.bid"),
                        format_args!("negative value {}", r.bid),
                    ));
                }
                let mut neighbors = BTreeSet::new();
                for n in &r.neighbors {
                    if n == name {
                        warnings.push(format!(
                            "reports.{name}.neighbors: dropped the reporter's own id"
                        ));
                    } else if !doc.agents.contains_key(n) {
                        warnings.push(format!(
                            "reports.{name}.neighbors: dropped undeclared agent {n}"
                        ));
                    } else {
                        neighbors.insert(AgentId::new(n.as_str()));
                    }
                }
                Report::Present {
                    bid: r.bid.clone(),
                    neighbors,
                }
            }
        };
        profile = profile
            .with_report(&AgentId::new(name.as_str()), report)
            .expect("cleaned reports always apply");
    }
    Ok(ParsedProfile { profile, warnings })
}

pub fn profile_to_doc(profile: &GlobalProfile) -> ProfileDoc {
    let instance = profile.instance();
    let truthful = GlobalProfile::truthful(profile.instance_arc());
    let mut reports = BTreeMap::new();
    for (id, report) in profile.reports() {
        if truthful.report(id).expect("same instance") == report {
            continue;
        }
        let entry = match report {
            Report::Absent => None,
            Report::Present { bid, neighbors } => Some(ReportDoc {
                bid: bid.clone(),
                neighbors: neighbors.iter().map(|n| n.to_string()).collect(),
            }),
        };
        reports.insert(id.to_string(), entry);
    }
    ProfileDoc {
        seller_neighbors: instance
            .seller_neighbors
            .iter()
            .map(|id| id.to_string())
            .collect(),
        agents: instance
            .agents
            .iter()
            .map(|(id, agent)| {
                (
                    id.to_string(),
                    AgentDoc {
                        valuation: agent.valuation.clone(),
                        neighbors: agent.neighbors.iter().map(|n| n.to_string()).collect(),
                    },
                )
            })
            .collect(),
        reports,
    }
}

/// Deterministic instance serialization: pretty-printed with sorted keys and
/// a trailing newline, so identical profiles produce identical bytes.
pub fn profile_to_json(profile: &GlobalProfile) -> String {
    let mut text = serde_json::to_string_pretty(&profile_to_doc(profile))
        .expect("profile documents always serialize");
    text.push('\n');
    text
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub max_agents: u8,
    pub bid_max: u32,
}

/// A replayable counterexample: the honest instance plus the record of what
/// went wrong, including the deviating report or attack profile when the
/// violation involves one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessDoc {
    pub mechanism: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Money>,
    pub property: String,
    pub family: FamilyDoc,
    pub instance_index: u64,
    pub instance: ProfileDoc,
    pub violation: ViolationDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViolationDoc {
    NegativeUtility {
        agent: String,
        utility: Money,
    },
    NegativeRevenue {
        revenue: Money,
    },
    Inefficient {
        winner: String,
        winner_value: Money,
        best: String,
        best_value: Money,
    },
    ProfitableDeviation {
        agent: String,
        /// The deviating report; `null` means the agent stays away.
        report: Option<ReportDoc>,
        honest_utility: Money,
        deviant_utility: Money,
    },
    ProfitableSplit {
        agent: String,
        replicas: Vec<String>,
        attacked: ProfileDoc,
        honest_utility: Money,
        coalition_utility: Money,
    },
}

/// Mechanism selector as (name, gap parameter) for command lines and JSON.
pub fn mechanism_from_parts(name: &str, delta: Option<&Money>) -> Result<Mechanism, ParseError> {
    let mech = match name {
        "vcg" => Mechanism::Vcg,
        "pvcg" => Mechanism::Pvcg,
        "ivcg" => Mechanism::Ivcg,
        "idm" => Mechanism::Idm,
        "danmu" => Mechanism::DanMu,
        "delta-ivcg" => {
            let delta = delta.ok_or_else(|| {
                ParseError("delta-ivcg needs its gap parameter (--delta)".into())
            })?;
            return Ok(Mechanism::DeltaIvcg {
                delta: delta.clone(),
            });
        }
        other => return Err(ParseError(format!("unknown mechanism {other}"))),
    };
    Ok(mech)
}

fn mechanism_delta(mechanism: &Mechanism) -> Option<Money> {
    match mechanism {
        Mechanism::DeltaIvcg { delta } => Some(delta.clone()),
        _ => None,
    }
}

fn report_to_doc(report: &Report) -> Option<ReportDoc> {
    match report {
        Report::Absent => None,
        Report::Present { bid, neighbors } => Some(ReportDoc {
            bid: bid.clone(),
            neighbors: neighbors.iter().map(|n| n.to_string()).collect(),
        }),
    }
}

pub fn witness_to_doc(witness: &Witness) -> WitnessDoc {
    let violation = match &witness.detail {
        WitnessDetail::NegativeUtility { agent, utility } => ViolationDoc::NegativeUtility {
            agent: agent.to_string(),
            utility: utility.clone(),
        },
        WitnessDetail::NegativeRevenue { revenue } => ViolationDoc::NegativeRevenue {
            revenue: revenue.clone(),
        },
        WitnessDetail::Inefficient {
            winner,
            winner_value,
            best,
            best_value,
        } => ViolationDoc::Inefficient {
            winner: winner.to_string(),
            winner_value: winner_value.clone(),
            best: best.to_string(),
            best_value: best_value.clone(),
        },
        WitnessDetail::ProfitableDeviation {
            agent,
            deviant,
            honest_utility,
            deviant_utility,
        } => ViolationDoc::ProfitableDeviation {
            agent: agent.to_string(),
            report: report_to_doc(deviant.report(agent).expect("deviant keeps the agent")),
            honest_utility: honest_utility.clone(),
            deviant_utility: deviant_utility.clone(),
        },
        WitnessDetail::ProfitableSplit {
            agent,
            replicas,
            attacked,
            honest_utility,
            coalition_utility,
        } => ViolationDoc::ProfitableSplit {
            agent: agent.to_string(),
            replicas: replicas.iter().map(|r| r.to_string()).collect(),
            attacked: profile_to_doc(attacked),
            honest_utility: honest_utility.clone(),
            coalition_utility: coalition_utility.clone(),
        },
    };
    WitnessDoc {
        mechanism: witness.mechanism.name().to_string(),
        delta: mechanism_delta(&witness.mechanism),
        property: witness.property.name().to_string(),
        family: FamilyDoc {
            max_agents: witness.family.max_agents,
            bid_max: witness.family.bid_max,
        },
        instance_index: witness.instance_index,
        instance: profile_to_doc(&witness.honest),
        violation,
    }
}

/// Rebuild a witness from its document. The caller decides whether to trust
/// it; `Witness::verify` replays the mechanisms and confirms every recorded
/// number.
pub fn witness_from_doc(doc: &WitnessDoc) -> Result<Witness, ParseError> {
    let mechanism = mechanism_from_parts(&doc.mechanism, doc.delta.as_ref())?;
    let property = Property::parse(&doc.property)
        .ok_or_else(|| ParseError(format!("unknown property {}", doc.property)))?;
    let family = FamilySpec::new(doc.family.max_agents, doc.family.bid_max)
        .map_err(|e| ParseError(e.to_string()))?;
    let honest = realize_profile(&doc.instance)?.profile;
    let detail = match &doc.violation {
        ViolationDoc::NegativeUtility { agent, utility } => WitnessDetail::NegativeUtility {
            agent: AgentId::new(agent.as_str()),
            utility: utility.clone(),
        },
        ViolationDoc::NegativeRevenue { revenue } => WitnessDetail::NegativeRevenue {
            revenue: revenue.clone(),
        },
        ViolationDoc::Inefficient {
            winner,
            winner_value,
            best,
            best_value,
        } => WitnessDetail::Inefficient {
            winner: AgentId::new(winner.as_str()),
            winner_value: winner_value.clone(),
            best: AgentId::new(best.as_str()),
            best_value: best_value.clone(),
        },
        ViolationDoc::ProfitableDeviation {
            agent,
            report,
            honest_utility,
            deviant_utility,
        } => {
            let id = AgentId::new(agent.as_str());
            let report = match report {
                None => Report::Absent,
                Some(r) => Report::Present {
                    bid: r.bid.clone(),
                    neighbors: r.neighbors.iter().map(|n| AgentId::new(n.as_str())).collect(),
                },
            };
            let deviant = honest
                .with_report(&id, report)
                .map_err(|e| ParseError(format!("violation.report: {e}")))?;
            WitnessDetail::ProfitableDeviation {
                agent: id,
                deviant,
                honest_utility: honest_utility.clone(),
                deviant_utility: deviant_utility.clone(),
            }
        }
        ViolationDoc::ProfitableSplit {
            agent,
            replicas,
            attacked,
            honest_utility,
            coalition_utility,
        } => WitnessDetail::ProfitableSplit {
            agent: AgentId::new(agent.as_str()),
            replicas: replicas.iter().map(|r| AgentId::new(r.as_str())).collect(),
            attacked: realize_profile(attacked)?.profile,
            honest_utility: honest_utility.clone(),
            coalition_utility: coalition_utility.clone(),
        },
    };
    Ok(Witness {
        mechanism,
        property,
        family,
        instance_index: doc.instance_index,
        honest,
        detail,
    })
}

/// One audited cell, as reported by `audit` and inside every matrix cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictDoc {
    pub mechanism: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Money>,
    pub property: String,
    pub status: String,
    pub family: FamilyDoc,
    pub family_size: u64,
    pub instances_checked: u64,
    pub deviations_checked: u64,
    pub skipped_instances: u64,
    pub skipped_deviations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessDoc>,
}

pub fn verdict_to_doc(verdict: &PropertyVerdict) -> VerdictDoc {
    VerdictDoc {
        mechanism: verdict.mechanism.name().to_string(),
        delta: mechanism_delta(&verdict.mechanism),
        property: verdict.property.name().to_string(),
        status: verdict.status.name().to_string(),
        family: FamilyDoc {
            max_agents: verdict.family.max_agents,
            bid_max: verdict.family.bid_max,
        },
        family_size: verdict.family_size,
        instances_checked: verdict.instances_checked,
        deviations_checked: verdict.deviations_checked,
        skipped_instances: verdict.skipped_instances,
        skipped_deviations: verdict.skipped_deviations,
        witness: verdict.witness.as_ref().map(witness_to_doc),
    }
}

pub fn parse_property(name: &str) -> Result<Property, ParseError> {
    Property::parse(name).ok_or_else(|| {
        let all: Vec<&str> = Property::ALL.iter().map(|p| p.name()).collect();
        ParseError(format!(
            "unknown property {name}; expected one of {}",
            all.join(", ")
        ))
    })
}

pub fn parse_status(name: &str) -> Result<VerdictStatus, ParseError> {
    match name {
        "holds" => Ok(VerdictStatus::Holds),
        "fails" => Ok(VerdictStatus::Fails),
        "inconclusive" => Ok(VerdictStatus::Inconclusive),
        other => Err(ParseError(format!("unknown verdict status {other}"))),
    }
}

/// Attack models for witness context; mirrors `Property::parse` naming.
pub fn attack_model_name(model: AttackModel) -> &'static str {
    match model {
        AttackModel::Replica => "replica",
        AttackModel::Chain => "chain",
        AttackModel::General => "general",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{check_property, FamilySpec, Property};
    use crate::mechanisms;
    use crate::model::Report;
    use crate::testutil::{e1, profile_of};

    fn parse(text: &str) -> ParsedProfile {
        parse_profile(text).unwrap()
    }

    #[test]
    fn e1_round_trips() {
        let original = profile_of(e1());
        let json = profile_to_json(&original);
        let reparsed = parse(&json);
        assert!(reparsed.warnings.is_empty());
        assert_eq!(reparsed.profile, original);
        assert_eq!(profile_to_json(&reparsed.profile), json);
    }

    #[test]
    fn null_report_means_absent() {
        let text = r#"{
            "seller_neighbors": ["a"],
            "agents": {
                "a": {"valuation": "0", "neighbors": ["b"]},
                "b": {"valuation": "1", "neighbors": []}
            },
            "reports": {"b": null}
        }"#;
        let parsed = parse(text);
        assert_eq!(
            parsed.profile.report(&AgentId::new("b")).unwrap(),
            &Report::Absent
        );
        // b is still activated (a relays to her) but bids nothing.
        assert!(parsed
            .profile
            .activated()
            .contains(&AgentId::new("b")));
        assert!(!parsed
            .profile
            .activated_bidders()
            .contains(&AgentId::new("b")));
    }

    #[test]
    fn decimal_bids_parse_exactly() {
        let text = r#"{
            "seller_neighbors": ["a"],
            "agents": {"a": {"valuation": "2.5", "neighbors": []}}
        }"#;
        let parsed = parse(text);
        let instance = parsed.profile.instance().clone();
        assert_eq!(
            instance.agent(&AgentId::new("a")).unwrap().valuation,
            Money::from_ratio(5, 2)
        );
    }

    #[test]
    fn dirty_reported_neighbors_are_dropped_with_warnings() {
        let text = r#"{
            "seller_neighbors": ["a"],
            "agents": {
                "a": {"valuation": "1", "neighbors": ["b"]},
                "b": {"valuation": "2", "neighbors": []}
            },
            "reports": {"a": {"bid": "1", "neighbors": ["a", "ghost", "b"]}}
        }"#;
        let parsed = parse(text);
        assert_eq!(parsed.warnings.len(), 2);
        let report = parsed.profile.report(&AgentId::new("a")).unwrap();
        let Report::Present { neighbors, .. } = report else {
            panic!("a reported a bid");
        };
        assert_eq!(neighbors.iter().count(), 1);
        assert!(neighbors.contains(&AgentId::new("b")));
    }

    #[test]
    fn structural_errors_name_the_field() {
        let undeclared = r#"{
            "seller_neighbors": ["a"],
            "agents": {"a": {"valuation": "1", "neighbors": ["ghost"]}}
        }"#;
        let err = parse_profile(undeclared).unwrap_err();
        assert!(err.0.contains("agents.a.neighbors"), "{err}");

        let negative = r#"{
            "seller_neighbors": ["a"],
            "agents": {"a": {"valuation": "-1", "neighbors": []}}
        }"#;
        let err = parse_profile(negative).unwrap_err();
        assert!(err.0.contains("agents.a.valuation"), "{err}");

        let unknown_field = r#"{
            "seller_neighbors": [],
            "agents": {},
            "winner": "a"
        }"#;
        let err = parse_profile(unknown_field).unwrap_err();
        assert!(err.0.contains("winner"), "{err}");
    }

    #[test]
    fn witness_documents_replay() {
        let verdict = check_property(
            &Mechanism::Vcg,
            Property::WeakBudgetBalance,
            FamilySpec::new(2, 1).unwrap(),
            None,
        )
        .unwrap();
        let witness = verdict.witness.unwrap();
        let doc = witness_to_doc(&witness);
        let json = serde_json::to_string_pretty(&doc).unwrap();
        let parsed: WitnessDoc = serde_json::from_str(&json).unwrap();
        let rebuilt = witness_from_doc(&parsed).unwrap();
        rebuilt.verify().unwrap();
        assert_eq!(rebuilt, witness);
    }

    #[test]
    fn deviation_witness_round_trips_through_run() {
        let verdict = check_property(
            &Mechanism::Pvcg,
            Property::IncentiveCompatibility,
            FamilySpec::new(2, 2).unwrap(),
            None,
        )
        .unwrap();
        let witness = verdict.witness.unwrap();
        let doc = witness_to_doc(&witness);
        let rebuilt = witness_from_doc(&doc).unwrap();
        let WitnessDetail::ProfitableDeviation {
            deviant,
            deviant_utility,
            agent,
            ..
        } = &rebuilt.detail
        else {
            panic!("expected a deviation witness");
        };
        let outcome = mechanisms::run(&rebuilt.mechanism, deviant).unwrap();
        let valuation = &rebuilt.honest.instance().agent(agent).unwrap().valuation;
        assert_eq!(outcome.utility(agent, valuation), *deviant_utility);
    }
}
