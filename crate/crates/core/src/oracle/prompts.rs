//! Prompt templates. Each template has a fixed marker phrase so test
//! doubles can recognize the task with [`classify`].

use std::fmt::Write;

/// A rendered (scene, action) example.
#[derive(Debug, Clone, Copy)]
pub struct Pair<'a> {
    pub scene: &'a str,
    pub action: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Hypotheses,
    Summarize,
    UngatedCheck,
    GateCheck,
    SelectCandidate,
    RelationBatch,
    DemotionGates,
    GateSemantic,
    AddStatements,
    PredictWithBackground,
    PredictWithProfile,
    PredictVanilla,
    PredictRag,
    ProfileExtract,
    ProfileAggregate,
    JudgeConsistency,
    JudgeDimension(Dimension),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Initiative,
    Scope,
    Magnitude,
    Horizon,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Initiative,
        Dimension::Scope,
        Dimension::Magnitude,
        Dimension::Horizon,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Initiative => "initiative",
            Dimension::Scope => "scope",
            Dimension::Magnitude => "magnitude",
            Dimension::Horizon => "horizon",
        }
    }
}

const PREDICT_TAIL: &str =
    "Predict the specific action taken by {g}. State the concrete decision, not the motivation or background. Answer in one sentence.";

fn predict_tail(group: &str) -> String {
    PREDICT_TAIL.replace("{g}", group)
}

fn bullet_list(items: &[&str], empty: &str) -> String {
    if items.is_empty() {
        return empty.to_string();
    }
    items.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
}

/// One event per line, used by demotion and add prompts.
pub fn event_lines(pairs: &[Pair<'_>]) -> String {
    if pairs.is_empty() {
        return "(none)".to_string();
    }
    pairs
        .iter()
        .map(|p| format!("- Scene: {} | Action: {}", one_line(p.scene), one_line(p.action)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn scene_action_block(pairs: &[Pair<'_>]) -> String {
    let mut out = String::new();
    for (i, p) in pairs.iter().enumerate() {
        let _ = writeln!(out, "[{}] Scene: {}", i + 1, one_line(p.scene));
        let _ = writeln!(out, "    Action: {}", one_line(p.action));
    }
    out.trim_end().to_string()
}

pub fn hypotheses(
    group: &str,
    topic: &str,
    pairs: &[Pair<'_>],
    established: &[&str],
    gate_path: &[&str],
    k: usize,
) -> String {
    format!(
        "# Scene-Action Pairs\n{pairs}\n\n# Established Statements\n{est}\n\n# Already Proposed Common Points\n{path}\n\n# Task\n\
Your task is to build the grounding logic for an AI system to understand the behavior of {group} (Current topic: \"{topic}\"), assert the AI system has no prior knowledge of {group}.\n\
To do this, please propose hypotheses for the general behavior logic of {group} based on the given action-scene pairs, complete the task step by step:\n\n\
1. What's the main feature of {group}'s behavior (Focus on the current topic: \"{topic}\") shown in the given scene-action pairs, other than the already established statements?\n\n\
2. Summarize {k} potential common points (grounding statements) of the actions taken by {group} in the given scenes about the focused topic: \"{topic}\", which is other than the already established statements.\n\
- The grounding statements should be general, avoiding too specific action descriptions.\n\
- Consider the grounding statements in a general way.\n\
- The grounding statements should be concise, informative, and general sentences.\n\
- Never be assertive! Always make objective description of the character rather than making assertive causal relations.\n\
- Keep each statement decision-relevant: it should explain *why this subset of actions* happens, not just a broad institutional slogan.\n\n\
3. Summarize {k} potential common points of the given scenes that trigger each behavior, which should be different from already proposed common points.\n\
- The question should be simple, not ambiguous, and specific to a subset of scenes rather than always applicable.\n\
- Focus on the next action when asking! Don't ask whether certain event is involved, instead ask whether the scene might trigger potential behavior for {group}'s next action.\n\
- Directly include \"{group}'s next action\" in the question!\n\
- Make each question selective (rough target 20%-70% scene coverage), avoid near-universal questions.\n\
- Use observable scene conditions (governance constraints, funding pressure, political climate, student demand, reputational stakes).\n\n\
4. Output the hypothesized scene-action triggers in the following format:\n\
action_hypotheses = [ ]  # A list of grounding statements (strings)\n\
scene_check_hypotheses = [ ]  # A list of syntactically complete questions to check the given scene (always mentioning {group})",
        pairs = scene_action_block(pairs),
        est = bullet_list(established, "None"),
        path = bullet_list(gate_path, "None"),
    )
}

pub fn summarize(group: &str, pairs_json: &str, n_input: usize, n_target: usize, n_upper: usize) -> String {
    format!(
        "# Task: Summarize & Compress Scene-Action Hypothesis Pairs\n\n\
You are given a list of {n_input} paired hypotheses. Each pair contains:\n\
- \"scene_check_hypothesis\": a question about {group}'s next action\n\
- \"action_hypothesis\": a general behavioral grounding statement about {group}\n\n\
Input pairs:\n{pairs_json}\n\n\
## Goal\n\
Produce a rewritten, deduplicated, and compressed set of pairs that capture the most important and most general behavioral grounding logic for {group}.\n\n\
You should output between {n_target} and {n_upper} pairs. Use your judgment to keep as many meaningfully distinct pairs as needed, but merge or drop redundant ones.\n\n\
Rewriting is allowed and encouraged to increase: generality, coverage across different subsets of scenes, clarity, non-assertiveness.\n\n\
## Selection Principles (prioritized)\n\
1. Coverage: The pairs should collectively cover the widest range of distinct behavioral patterns and distinct scene triggers.\n\
2. Centrality: Prefer pairs that reflect recurring or core behaviors across many scene-action pairs.\n\
3. Specificity without overfitting: Keep statements general; only keep a specific skill/ability if it appears repeatedly and broadly.\n\
4. Non-redundancy: Each pair must represent a meaningfully different behavior/trigger from the others.\n\
5. Pair coherence: The scene_check_hypothesis must plausibly test for the corresponding action_hypothesis.\n\
6. Gate selectivity: Prefer scene_check_hypothesis that are neither almost always true nor almost always false.\n\n\
## Output Format (JSON only)\n\
{{\"pairs\": [{{\"scene_check_hypothesis\": \"...\", \"action_hypothesis\": \"...\"}}]}}"
    )
}

pub fn ungated_check(group: &str, action: &str, statement: &str) -> String {
    format!(
        "Group: {group}\n\nAction: {action}\n\nStatement: {statement}\n\n\
Question: Is the action consistent with the behavioral pattern described in the statement?\n\n\
yes: the action follows or reflects the pattern described in the statement.\n\
no: the action is unrelated to or contradicts the pattern described in the statement.\n\n\
Directly answer only yes/no."
    )
}

pub fn gate_check(scene: &str, question: &str) -> String {
    format!(
        "Scene: {scene}\n\nQuestion: {question}\n\n\
Answer yes or no based on available evidence. Answer unknown only when the scene is completely unrelated to the question."
    )
}

pub fn select_candidate(group: &str, verbalized: &[String]) -> String {
    let mut cands = String::new();
    for (i, v) in verbalized.iter().enumerate() {
        let _ = writeln!(cands, "## Candidate {}\n{}\n", i + 1, v.trim_end());
    }
    format!(
        "I have generated {c} candidate Codified Decision Trees (CDTs) intended to model the behavior of the group \"{group}\".\n\
Please evaluate them and select the best one based on:\n\
1. Coherence and logic of the decision flow.\n\
2. Generalized understanding of the group's behavior (avoiding overfitting to specific trivial details).\n\
3. Clarity and meaningfulness of the gates (questions) and statements (behaviors).\n\n\
Here are the candidates:\n\n{cands}\n\
Task:\n\
1. Analyze the strengths and weaknesses of each candidate briefly.\n\
2. Select the single best candidate.\n\
3. Output your choice in the following JSON format:\n\
{{\"best_candidate_index\": <1-based index>, \"reasoning\": \"<your reasoning>\"}}",
        c = verbalized.len(),
        cands = cands.trim_end(),
    )
}

pub fn relation_batch(group: &str, action: &str, statements: &[&str]) -> String {
    let listed = statements
        .iter()
        .enumerate()
        .map(|(i, s)| format!("[{}] {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "Group: {group}\n\nAction: {action}\n\n\
Classify the relationship between the action and EACH statement below.\n\n\
For each statement, answer:\n\
- supports: the action follows, reflects, or is consistent with the pattern.\n\
- irrelevant: the action is unrelated to the statement.\n\
- contradicts: the action conflicts with the pattern.\n\n\
Statements:\n{listed}\n\n\
Output JSON only:\n\
[\"supports or irrelevant or contradicts\", ...]\n\
Return a JSON array with exactly one label per statement, in the same order."
    )
}

pub fn demotion_gates(group: &str, statement: &str, precision: f64, sup: &[Pair<'_>], con: &[Pair<'_>]) -> String {
    format!(
        "You are analyzing behavioral patterns of {group}.\n\n\
## Statement being demoted\n\"{statement}\"\n\n\
This statement has precision {precision:.2} at the current node; it holds for some events but not others. We need to find a scene condition that separates the supporting events from the contradicting events, so the statement can be moved to a more specific subtree.\n\n\
## Supporting events (action consistent with the statement):\n{sup}\n\n\
## Contradicting events (action conflicts with the statement):\n{con}\n\n\
## Task\n\
Generate 3 candidate yes/no gate questions about the scene context that would separate the supporting events from the contradicting/irrelevant ones. Each question should:\n\
- Be about observable scene conditions (not about the action itself)\n\
- Be specific enough to distinguish this subset of events\n\
- Always mention \"{group}\" or reference their situation\n\
- Be answerable with yes/no from the scene context alone\n\
- Each candidate should take a different angle\n\n\
Output as JSON: [\"question 1\", \"question 2\", \"question 3\"]",
        sup = event_lines(sup),
        con = event_lines(con),
    )
}

pub fn gate_semantic(group: &str, statement: &str, question: &str) -> String {
    format!(
        "You are analyzing behavioral patterns of {group}.\n\n\
## Statement\n\"{statement}\"\n\n\
## Gate question\n\"{question}\"\n\n\
## Task\n\
Does this gate question provide a meaningful scene condition under which the statement would be specifically relevant? In other words, is the statement a natural behavioral pattern to expect when the gate condition is true?\n\n\
Answer only: yes or no."
    )
}

pub fn add_statements(group: &str, path: &[&str], uncovered: &[Pair<'_>], existing: &[&str]) -> String {
    format!(
        "You are analyzing behavioral patterns of {group}.\n\n\
## CDT path from Root to this node:\n{path}\n\n\
## Uncovered events at this node:\n\
These events are not supported by any existing statement at this node.\n{unc}\n\n\
## Existing statements at this node (for reference, do not duplicate):\n{ex}\n\n\
## Task\n\
Generate new behavioral statements that capture the patterns in the uncovered events.\n\
- Each statement should be one sentence, specific to the topic indicated by the gate path.\n\
- Do NOT duplicate or rephrase existing statements.\n\
- Focus on the behavioral pattern, not specific actions.\n\n\
Output as JSON: {{\"statements\": [\"statement 1\", \"statement 2\"]}}",
        path = bullet_list(path, "(root)"),
        unc = event_lines(uncovered),
        ex = bullet_list(existing, "(none)"),
    )
}

pub fn predict_with_background(group: &str, background: &str, context: &str, question: &str) -> String {
    format!(
        "# Background Knowledge\n{background}\n\n# Context\n{context}\n\n# Question\n{question}\n\n{}",
        predict_tail(group)
    )
}

pub fn predict_vanilla(group: &str, context: &str, question: &str) -> String {
    format!(
        "# Context\n{context}\n\n# Question\n{question}\n\n{}",
        predict_tail(group)
    )
}

pub fn predict_with_profile(profile: &str, scene: &str, question: &str) -> String {
    format!("# Background Knowledge\n{profile}\n\n# Scene\n{scene}\n\n# Question\n{question} Answer a concise narration in one sentence.")
}

pub fn predict_rag(group: &str, examples: &[Pair<'_>], context: &str, question: &str) -> String {
    format!(
        "# In-Context Examples\nThe following are past scene-action pairs for {group}:\n\n{ex}\n\n# Context\n{context}\n\n# Question\n{question}\n\n{}",
        predict_tail(group),
        ex = scene_action_block(examples),
    )
}

pub fn profile_extract(character: &str, block: &[Pair<'_>]) -> String {
    format!(
        "# Task\n\
Please provide a 1000-word, narrative-style character profile for {character}.\n\
The profile should read like a cohesive introduction, weaving together the character's background, personality traits and core motivations, notable attributes, relationships, key experiences, major decisions or actions, and character arc or development.\n\
The profile should be written in a concise yet informative style, similar to what one might find in a comprehensive character guide. Focus on the most crucial information that gives readers a clear understanding of the character's significance.\n\
The profile should be based on either your existing knowledge of the character or the provided information, without fabricating or inferring any inaccurate or uncertain details.\n\n\
# Scene-Action Pairs\n{b}\n\n\
Now, based on the given scene-action pairs, please generate the character profile, starting with ===Profile===.",
        b = scene_action_block(block),
    )
}

pub fn profile_aggregate(main: &str, new: &str) -> String {
    format!(
        "# Main Profile\n{main}\n\n# New Summarized Profile (From New Episodes)\n{new}\n\n\
Directly update the main profile based on the new summarized profile, keep its length in around 1000 words."
    )
}

pub fn judge_consistency(context: &str, premise: &str, hypothesis: &str) -> String {
    format!(
        "Context: {context}\n\nPremise: {premise}\nHypothesis: {hypothesis}\n\n\
Determine the relationship between the premise and hypothesis.\n\n\
- \"entails\": The hypothesis can be inferred from the premise. They describe the same action or event.\n\
- \"neutral\": The hypothesis is neither supported nor contradicted by the premise.\n\
- \"contradicts\": The hypothesis is incompatible with the premise.\n\n\
Output: {{\"relation\": \"entails\" | \"neutral\" | \"contradicts\", \"reason\": \"...\"}}"
    )
}

pub fn judge_dimension(dim: Dimension, group: &str, context: &str, prediction: &str, reference: &str) -> String {
    let (lead, body) = match dim {
        Dimension::Initiative => (
            format!("Compare the action of {group} in the response against the ground truth. Focus on whether the strategic character of the actions aligns, not whether the specific actions are identical."),
            "Initiative: Whether both actions are driven by the same type of trigger.\n  Proactive: the entity initiates a new move on its own accord.\n  Reactive: the entity responds to external events or pressures.\n  Match if both share the same trigger type; mismatch otherwise.",
        ),
        Dimension::Scope => (
            format!("Compare the action of {group} in the response against the ground truth."),
            "Scope: Whether both actions are directed at the same domain.\n  Internal: directed inward (restructuring, reform, resource reallocation).\n  External: directed outward (market expansion, product launch, partnership).\n  Match if both target the same domain; mismatch otherwise.",
        ),
        Dimension::Magnitude => (
            format!("Compare the action of {group} in the response against the ground truth."),
            "Magnitude: Whether both actions represent a similar scale of change.\n  Incremental: minor adjustment or refinement.\n  Moderate: notable but bounded change.\n  Transformative: fundamental strategic shift.\n  Match if both are at the same or adjacent levels; mismatch if non-adjacent.",
        ),
        Dimension::Horizon => (
            format!("Compare the action of {group} in the response against the ground truth."),
            "Horizon: Whether both actions operate on the same time horizon.\n  Exploitative: short-term optimization, immediate response.\n  Explorative: long-term investment, building new capabilities.\n  Match if both serve the same timeframe; mismatch otherwise.\n  Note: forward-looking language does not make an action explorative; judge by what it actually accomplishes.",
        ),
    };
    format!(
        "# Context\n{context}\n\n# Your Response: {prediction}\n# Ground Truth: {reference}\n\n{lead}\n\n{body}\n\n\
Output: {{\"{key}\": \"match\" | \"mismatch\", \"reason\": \"...\"}}",
        key = dim.key()
    )
}

/// Recognizes which template produced `prompt`.
pub fn classify(prompt: &str) -> Option<PromptKind> {
    let has = |s: &str| prompt.contains(s);
    let kind = if has("action_hypotheses = [") {
        PromptKind::Hypotheses
    } else if has("# Task: Summarize & Compress") {
        PromptKind::Summarize
    } else if has("best_candidate_index") {
        PromptKind::SelectCandidate
    } else if has("Classify the relationship between the action and EACH statement") {
        PromptKind::RelationBatch
    } else if has("## Statement being demoted") {
        PromptKind::DemotionGates
    } else if has("## Gate question") {
        PromptKind::GateSemantic
    } else if has("## Uncovered events at this node:") {
        PromptKind::AddStatements
    } else if has("Is the action consistent with the behavioral pattern") {
        PromptKind::UngatedCheck
    } else if has("Answer unknown only when the scene is completely unrelated") {
        PromptKind::GateCheck
    } else if has("Determine the relationship between the premise and hypothesis") {
        PromptKind::JudgeConsistency
    } else if let Some(d) = Dimension::ALL
        .into_iter()
        .find(|d| has(&format!("Output: {{\"{}\": \"match\"", d.key())))
    {
        PromptKind::JudgeDimension(d)
    } else if has("starting with ===Profile===") {
        PromptKind::ProfileExtract
    } else if has("# Main Profile") {
        PromptKind::ProfileAggregate
    } else if has("# In-Context Examples") {
        PromptKind::PredictRag
    } else if prompt.starts_with("# Background Knowledge") && has("\n# Scene\n") {
        PromptKind::PredictWithProfile
    } else if prompt.starts_with("# Background Knowledge") {
        PromptKind::PredictWithBackground
    } else if prompt.starts_with("# Context") && has("Predict the specific action") {
        PromptKind::PredictVanilla
    } else {
        return None;
    };
    Some(kind)
}

/// Text between `start` and the next of `ends` (or the end of the prompt).
pub fn section<'a>(prompt: &'a str, start: &str, ends: &[&str]) -> Option<&'a str> {
    let from = prompt.find(start)? + start.len();
    let rest = &prompt[from..];
    let to = ends.iter().filter_map(|e| rest.find(e)).min().unwrap_or(rest.len());
    Some(rest[..to].trim())
}
