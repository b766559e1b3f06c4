//! Synthetic groups with planted behavioral rules.
//!
//! Every behavior pairs a scene marker with an action marker; the matching
//! [`PlantedRule`]s let the planted provider answer every oracle task from
//! the table, so experiment outcomes are predictable.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{EventId, Observation, Source};
use crate::oracle::mock::{PlantedConfig, PlantedRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Tariff pressure draws lobbying.
    Lobby,
    /// Product recalls draw refunds.
    Refund,
    /// Tariff pressure draws relocation; the drifted form of `Lobby`.
    Relocate,
    /// Strikes draw wage negotiation.
    Negotiate,
}

impl Behavior {
    pub const ALL: [Behavior; 4] = [Behavior::Lobby, Behavior::Refund, Behavior::Relocate, Behavior::Negotiate];

    pub fn rule(self) -> PlantedRule {
        let (cm, am, action, statement, gate, conflicts): (&str, &str, &str, &str, &str, &[&str]) = match self {
            Behavior::Lobby => (
                "tariff",
                "lobby",
                "lobby lawmakers to roll back the measures",
                "{group} tends to lobby policymakers when its input costs are threatened.",
                "Is {group} facing tariff pressure that could shape its next action?",
                &["relocate"],
            ),
            Behavior::Refund => (
                "recall",
                "refund",
                "refund affected customers in full",
                "{group} tends to refund customers after quality failures.",
                "Is {group} dealing with a product recall that could shape its next action?",
                &[],
            ),
            Behavior::Relocate => (
                "tariff",
                "relocate",
                "relocate production to a lower-cost region",
                "{group} tends to relocate production when its input costs are threatened.",
                "Is {group} facing tariff pressure that could shape its next action?",
                &[],
            ),
            Behavior::Negotiate => (
                "strike",
                "negotiate",
                "negotiate a new wage agreement with the union",
                "{group} tends to negotiate with labor when operations stall.",
                "Is {group} confronting a strike that could shape its next action?",
                &[],
            ),
        };
        PlantedRule {
            context_marker: cm.into(),
            action_marker: am.into(),
            action: action.into(),
            statement: statement.into(),
            gate: gate.into(),
            conflicts: conflicts.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn scenes(self) -> &'static [&'static str] {
        match self {
            Behavior::Lobby | Behavior::Relocate => &[
                "faces a new tariff on imported components",
                "is hit by tariff hikes on its key inputs",
                "is caught in a tariff dispute between trading partners",
            ],
            Behavior::Refund => &[
                "announces a recall of a flagship device",
                "is forced into a product recall after safety complaints",
                "expands a recall to older models",
            ],
            Behavior::Negotiate => &[
                "is disrupted by a strike at its warehouses",
                "sees a strike spread to its assembly plants",
            ],
        }
    }

    fn actions(self) -> &'static [&'static str] {
        match self {
            Behavior::Lobby => &[
                "lobby lawmakers to roll back the measures",
                "lobby trade officials for exemptions",
            ],
            Behavior::Refund => &["refund affected customers in full", "refund buyers and extend warranties"],
            Behavior::Relocate => &[
                "relocate production to a lower-cost region",
                "relocate assembly lines abroad",
            ],
            Behavior::Negotiate => &[
                "negotiate a new wage agreement with the union",
                "negotiate shorter shifts with organizers",
            ],
        }
    }
}

const LEADS: [&str; 5] = [
    "In early trading,",
    "This quarter,",
    "Amid analyst scrutiny,",
    "Following a board meeting,",
    "During its fiscal planning,",
];
const PLACES: [&str; 5] = ["in Europe", "in Asia", "in North America", "across its supply chain", "in its home market"];
const WHEN: [&str; 4] = ["within weeks", "before the next quarter", "this year", "immediately"];

/// Provider config knowing every behavior.
pub fn planted_config() -> PlantedConfig {
    PlantedConfig::new(Behavior::ALL.iter().map(|b| b.rule()).collect())
}

fn slug(group: &str) -> String {
    group
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_lowercase()
}

/// Observations for `blocks` (behavior, count), shuffled together, with
/// `noise` marker-free events mixed in. Order keys run from `start`.
pub fn generate(group: &str, blocks: &[(Behavior, usize)], noise: usize, seed: u64, start: i64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<Option<Behavior>> = blocks
        .iter()
        .flat_map(|&(b, n)| std::iter::repeat_n(Some(b), n))
        .chain(std::iter::repeat_n(None, noise))
        .collect();
    slots.shuffle(&mut rng);
    let prefix = slug(group);
    slots
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            let key = start + i as i64;
            let lead = LEADS.choose(&mut rng).expect("non-empty");
            let place = PLACES.choose(&mut rng).expect("non-empty");
            let when = WHEN.choose(&mut rng).expect("non-empty");
            let (scene, action) = match b {
                Some(b) => (
                    *b.scenes().choose(&mut rng).expect("non-empty"),
                    *b.actions().choose(&mut rng).expect("non-empty"),
                ),
                None => ("holds its annual shareholder meeting", "publish a sustainability report"),
            };
            Observation {
                id: EventId::new(format!("{prefix}-{key:05}")),
                group: group.to_string(),
                domain: "synthetic".into(),
                source: Source::Synthetic,
                order_key: key,
                context: format!("{lead} {group} {scene} {place}."),
                decision: format!("{group} will {action} {when}."),
                question: format!("What will {group} do next?"),
            }
        })
        .collect()
}

/// Two disjoint rules with `per_rule` events each.
pub fn two_rule_corpus(group: &str, per_rule: usize, seed: u64) -> Vec<Observation> {
    generate(group, &[(Behavior::Lobby, per_rule), (Behavior::Refund, per_rule)], 0, seed, 0)
}

/// Three consecutive phases of `per_phase` events. Tariff scenes draw
/// lobbying in the first phase and relocation afterwards; recalls always
/// draw refunds.
pub fn drifting_corpus(group: &str, per_phase: usize, seed: u64) -> Vec<Observation> {
    let half = per_phase / 2;
    let mut out = Vec::new();
    for phase in 0..3u64 {
        let tariff = if phase == 0 { Behavior::Lobby } else { Behavior::Relocate };
        out.extend(generate(
            group,
            &[(tariff, half), (Behavior::Refund, per_phase - half)],
            0,
            seed.wrapping_add(phase),
            (phase as usize * per_phase) as i64,
        ));
    }
    out
}
