use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};

use super::*;
use crate::embed::HashEncoder;
use crate::graph::{IntentGraph, NodeKind, Provenance, RelationKind};

// ---------------------------------------------------------------------------
// parse / render
// ---------------------------------------------------------------------------

#[test]
fn parses_plain_list() {
    let got = parse_label_list(r#"["answer 1", "answer 2"]"#).unwrap();
    assert_eq!(got, vec!["answer 1", "answer 2"]);
}

#[test]
fn parses_single_quotes_and_mixed_spacing() {
    let got = parse_label_list("['a' ,'b',\n 'c']").unwrap();
    assert_eq!(got, vec!["a", "b", "c"]);
}

#[test]
fn parses_fenced_list_with_prose() {
    let raw = "Sure! Here is the list you asked for:\n```python\n[\"combat\", \"physics\"]\n```\nLet me know if you need more.";
    let got = parse_label_list(raw).unwrap();
    assert_eq!(got, vec!["combat", "physics"]);
}

#[test]
fn skips_non_list_brackets() {
    let raw = "[note: see below] [\"real\"]";
    assert_eq!(parse_label_list(raw).unwrap(), vec!["real"]);
}

#[test]
fn honors_escaped_quotes_and_trailing_comma() {
    let got = parse_label_list(r#"["he said \"hi\"", 'it\'s fine',]"#).unwrap();
    assert_eq!(got, vec![r#"he said "hi""#, "it's fine"]);
}

#[test]
fn empty_list_is_valid() {
    assert!(parse_label_list("[]").unwrap().is_empty());
    assert!(parse_label_list("  [\n]  ").unwrap().is_empty());
}

#[test]
fn rejects_unquoted_items_and_prose() {
    assert!(parse_label_list("[1, 2]").is_err());
    assert!(parse_label_list("no entities found").is_err());
    assert!(parse_label_list("").is_err());
    assert!(parse_label_list("[\"unterminated").is_err());
}

#[test]
fn render_is_parse_inverse() {
    let labels = vec![
        "plain".to_string(),
        "with \"quotes\"".to_string(),
        "back\\slash".to_string(),
        "tab\there".to_string(),
    ];
    let rendered = render_label_list(&labels);
    assert_eq!(parse_label_list(&rendered).unwrap(), labels);
}

// ---------------------------------------------------------------------------
// templates
// ---------------------------------------------------------------------------

/// The template wording is part of the method; these digests pin the bytes.
#[test]
fn template_bodies_are_pinned() {
    use sha2::{Digest, Sha256};
    let digest = |t: &PromptTemplate| format!("{:x}", Sha256::digest(t.body.as_bytes()));
    assert_eq!(
        digest(&EXTRACT_EXACT),
        "8670968af837d6fc507489b4b763ef5aa9e2915b69607efeaac48044e38339f8"
    );
    assert_eq!(
        digest(&SELECT_RELATED),
        "e182a94bcdffdd69c574e1e3e740c71ddec38a2cb878e502669e6daac6323cc5"
    );
    assert_eq!(
        digest(&EXPAND_ITEM),
        "22d8f49f229a00fc7f064562376f34195595e14b6dcc13d63ac75ac8f580ec28"
    );
}

#[test]
fn templates_declare_their_slots() {
    for template in ALL_TEMPLATES {
        for slot in template.slots {
            assert!(
                template.body.contains(&format!("{{{slot}}}")),
                "{} body must contain {{{slot}}}",
                template.name
            );
        }
    }
    assert_eq!(EXTRACT_EXACT.slots, &["desc"]);
    assert_eq!(SELECT_RELATED.slots, &["desc", "RAG_options"]);
    assert_eq!(EXPAND_ITEM.slots, &["item_name"]);
}

#[test]
fn fill_substitutes_all_slots() {
    let filled = SELECT_RELATED
        .fill(&[("desc", "some text"), ("RAG_options", "[\"a\"]")])
        .unwrap();
    assert!(filled.contains("some text"));
    assert!(filled.contains("[\"a\"]"));
    assert!(!filled.contains("{desc}"));
    assert!(!filled.contains("{RAG_options}"));
}

#[test]
fn fill_rejects_missing_and_unknown_slots() {
    assert!(matches!(
        SELECT_RELATED.fill(&[("desc", "x")]),
        Err(ExtractError::MissingSlot { slot: "RAG_options", .. })
    ));
    assert!(matches!(
        EXTRACT_EXACT.fill(&[("desc", "x"), ("bogus", "y")]),
        Err(ExtractError::UnknownSlot { .. })
    ));
}

#[test]
fn fill_does_not_rescan_substituted_values() {
    // a description that itself contains a slot pattern must not be expanded
    let filled = SELECT_RELATED
        .fill(&[("desc", "sneaky {RAG_options} text"), ("RAG_options", "SECRET")])
        .unwrap();
    assert!(filled.contains("sneaky {RAG_options} text"));
    // the real slot got the value exactly once
    assert_eq!(filled.matches("SECRET").count(), 1);
}

// ---------------------------------------------------------------------------
// knowledge base
// ---------------------------------------------------------------------------

fn kb_mlp() -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    kb.insert("MLP", "multilayer perceptron").unwrap();
    kb.insert("API", "application programming interface").unwrap();
    kb.insert("gravity gun", "a physics manipulation tool").unwrap();
    kb
}

#[test]
fn kb_appends_explanations_for_hits() {
    let kb = kb_mlp();
    let text = "We train an MLP on the logs.";
    let out = augment_with_kb(text, &kb);
    assert!(out.starts_with(text));
    assert!(out.contains("### Concept Explanation"));
    assert!(out.contains("MLP: multilayer perceptron"));
    assert!(!out.contains("API:"));
}

#[test]
fn kb_no_hits_returns_input_unchanged() {
    let kb = kb_mlp();
    let text = "Nothing matches here.";
    assert_eq!(augment_with_kb(text, &kb), text);
}

#[test]
fn kb_matches_whole_tokens_only() {
    let kb = kb_mlp();
    // "API" must not match inside "rapid"
    assert_eq!(augment_with_kb("a rapid test", &kb), "a rapid test");
    // nor inside underscore-joined tokens
    assert_eq!(augment_with_kb("uses NYC_API only", &kb), "uses NYC_API only");
    // case-insensitive whole-token does match
    assert!(augment_with_kb("the api is public", &kb).contains("API: application"));
}

#[test]
fn kb_matches_multi_token_keys_in_sequence() {
    let kb = kb_mlp();
    let out = augment_with_kb("the Gravity Gun changed everything", &kb);
    assert!(out.contains("gravity gun: a physics manipulation tool"));
    // tokens present but not adjacent → no match
    assert_eq!(
        augment_with_kb("gravity affects gun physics", &kb),
        "gravity affects gun physics"
    );
}

#[test]
fn kb_tsv_loader_reports_lines() {
    let kb = KnowledgeBase::from_reader("MLP\tmultilayer perceptron\n\nGPU\tgraphics unit\n".as_bytes())
        .unwrap();
    assert_eq!(kb.len(), 2);

    let err = KnowledgeBase::from_reader("MLP\tx\nno tab here\n".as_bytes()).unwrap_err();
    assert!(matches!(err, ExtractError::KbFormat { line: 2, .. }));

    let err = KnowledgeBase::from_reader("MLP\tx\nmlp\ty\n".as_bytes()).unwrap_err();
    assert!(matches!(err, ExtractError::KbFormat { line: 2, .. }));
}

// ---------------------------------------------------------------------------
// clients, cache, runner
// ---------------------------------------------------------------------------

#[test]
fn mock_is_deterministic() {
    let client = MockCompletionClient;
    let settings = DecodeSettings::default();
    let prompt = EXTRACT_EXACT.fill(&[("desc", "a \"quoted phrase\" and GPU")]).unwrap();
    let a = client.complete(&prompt, &settings).unwrap();
    let b = client.complete(&prompt, &settings).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mock_round1_extracts_quoted_and_allcaps_in_order() {
    let client = MockCompletionClient;
    let desc = "Players praise the \"boss fights\" and the GPU PHYSICS engine, plus \"boss fights\" again and \"level editor\".";
    let prompt = EXTRACT_EXACT.fill(&[("desc", desc)]).unwrap();
    let resp = client.complete(&prompt, &DecodeSettings::default()).unwrap();
    let labels = parse_label_list(&resp).unwrap();
    assert_eq!(labels, vec!["boss fights", "GPU", "PHYSICS", "level editor"]);
}

#[test]
fn mock_round1_ignores_instruction_boilerplate() {
    // "NOT" appears in the template instructions; it must not leak into labels
    let client = MockCompletionClient;
    let prompt = EXTRACT_EXACT.fill(&[("desc", "plain text, nothing to find")]).unwrap();
    let resp = client.complete(&prompt, &DecodeSettings::default()).unwrap();
    assert_eq!(parse_label_list(&resp).unwrap(), Vec::<String>::new());
}

#[test]
fn mock_round2_picks_token_overlapping_options() {
    let client = MockCompletionClient;
    let options = render_label_list(&["space exploration", "farming sim", "boss fights"]);
    let prompt = SELECT_RELATED
        .fill(&[
            ("desc", "An epic about space travel and exploration."),
            ("RAG_options", &options),
        ])
        .unwrap();
    let resp = client.complete(&prompt, &DecodeSettings::default()).unwrap();
    let picks = parse_label_list(&resp).unwrap();
    assert_eq!(picks, vec!["space exploration"]);
}

#[test]
fn mock_expansion_is_canned_for_known_names_and_stable_otherwise() {
    let client = MockCompletionClient;
    let prompt = EXPAND_ITEM.fill(&[("item_name", "Half-Life 2")]).unwrap();
    let text = client.complete(&prompt, &DecodeSettings::default()).unwrap();
    for expected in ["storytelling", "physics-based gameplay", "gravity gun", "combat"] {
        assert!(text.contains(expected), "expansion must mention {expected}");
    }

    let prompt = EXPAND_ITEM.fill(&[("item_name", "Some Unknown Game")]).unwrap();
    let a = client.complete(&prompt, &DecodeSettings::default()).unwrap();
    let b = client.complete(&prompt, &DecodeSettings::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("Some Unknown Game"));
    // the paragraph quotes at least three distinct phrases for round 1
    let quoted: HashSet<&str> = a.split('"').skip(1).step_by(2).collect();
    assert!(quoted.len() >= 3, "got {quoted:?}");
}

#[test]
fn counting_client_counts_only_real_calls() {
    let counting = CountingClient::new(MockCompletionClient);
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&counting, &cache);
    let values = [("desc", "a \"thing\"")];
    runner.run(&EXTRACT_EXACT, &values).unwrap();
    runner.run(&EXTRACT_EXACT, &values).unwrap();
    runner.run(&EXTRACT_EXACT, &values).unwrap();
    assert_eq!(counting.calls(), 1);
}

#[test]
fn disk_cache_survives_process_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let values = [("item_name", "Cave Story")];
    let first = {
        let counting = CountingClient::new(MockCompletionClient);
        let cache = ResponseCache::at_dir(dir.path()).unwrap();
        let runner = PromptRunner::new(&counting, &cache);
        let (text, _) = runner.run(&EXPAND_ITEM, &values).unwrap();
        assert_eq!(counting.calls(), 1);
        text
    };
    // fresh cache instance over the same directory: zero client calls
    let counting = CountingClient::new(MockCompletionClient);
    let cache = ResponseCache::at_dir(dir.path()).unwrap();
    let runner = PromptRunner::new(&counting, &cache);
    let (text, _) = runner.run(&EXPAND_ITEM, &values).unwrap();
    assert_eq!(counting.calls(), 0);
    assert_eq!(text, first);

    // cache files carry template name and version for later collection
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 1);
    assert!(names[0].starts_with("expand_item.v1."));
}

#[test]
fn cache_key_separates_templates_and_settings() {
    let counting = CountingClient::new(MockCompletionClient);
    let cache = ResponseCache::in_memory();
    let mut runner = PromptRunner::new(&counting, &cache);
    runner.run(&EXTRACT_EXACT, &[("desc", "x")]).unwrap();
    runner.settings.max_tokens = 99;
    runner.run(&EXTRACT_EXACT, &[("desc", "x")]).unwrap();
    assert_eq!(counting.calls(), 2, "changed settings must not hit the cache");
}

// ---------------------------------------------------------------------------
// per-subject operations
// ---------------------------------------------------------------------------

fn test_graph() -> (IntentGraph, crate::graph::NodeId) {
    let mut g = IntentGraph::new();
    let item = g.add_item("it");
    (g, item)
}

#[test]
fn exact_intents_canonicalize_and_dedup() {
    let (_, item) = test_graph();
    let client = FnCompletionClient(|_: &str| Ok(r#"["A", "a ", "A"]"#.to_string()));
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let record = extract_exact_intents(item, "whatever", &runner).unwrap();
    assert_eq!(record.labels, vec!["a"]);
    assert!(!record.parse_failed);
}

#[test]
fn exact_intents_flag_unparseable_responses() {
    let (_, item) = test_graph();
    let client = FnCompletionClient(|_: &str| Ok("no entities found".to_string()));
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let record = extract_exact_intents(item, "whatever", &runner).unwrap();
    assert!(record.parse_failed);
    assert!(record.labels.is_empty());
    assert_eq!(record.raw_response, "no entities found");
}

#[test]
fn exact_intents_require_text() {
    let (_, item) = test_graph();
    let cache = ResponseCache::in_memory();
    let client = MockCompletionClient;
    let runner = PromptRunner::new(&client, &cache);
    assert!(matches!(
        extract_exact_intents(item, "  ", &runner),
        Err(ExtractError::EmptyDescription)
    ));
}

#[test]
fn related_intents_drop_hallucinations() {
    let (_, item) = test_graph();
    let client = FnCompletionClient(|_: &str| Ok(r#"["x", "q"]"#.to_string()));
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let options = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    let record = select_related_intents(item, "desc", &options, &runner).unwrap();
    assert_eq!(record.labels, vec!["x"]);
    assert_eq!(record.hallucinations, 1);
}

#[test]
fn related_intents_accept_empty_response_list() {
    let (_, item) = test_graph();
    let client = FnCompletionClient(|_: &str| Ok("[]".to_string()));
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let options = vec!["x".to_string()];
    let record = select_related_intents(item, "desc", &options, &runner).unwrap();
    assert!(record.labels.is_empty());
    assert!(!record.parse_failed);
    assert_eq!(record.hallucinations, 0);
}

#[test]
fn related_intents_render_every_option() {
    let (_, item) = test_graph();
    let seen = std::sync::Mutex::new(String::new());
    let client = FnCompletionClient(|prompt: &str| {
        *seen.lock().unwrap() = prompt.to_string();
        Ok("[]".to_string())
    });
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let options: Vec<String> = (0..100).map(|i| format!("intent {i:03}")).collect();
    select_related_intents(item, "desc", &options, &runner).unwrap();
    let prompt = seen.lock().unwrap().clone();
    let section = prompt
        .split("### Available Options:")
        .nth(1)
        .unwrap()
        .split("### Important Notes:")
        .next()
        .unwrap();
    for option in &options {
        assert!(section.contains(option.as_str()), "missing {option}");
    }
    assert!(matches!(
        select_related_intents(item, "desc", &[], &runner),
        Err(ExtractError::EmptyOptions)
    ));
}

#[test]
fn expansion_rejects_blank_names_and_empty_responses() {
    let cache = ResponseCache::in_memory();
    let client = MockCompletionClient;
    let runner = PromptRunner::new(&client, &cache);
    assert!(matches!(
        expand_item_summary("  ", &runner),
        Err(ExtractError::EmptyItemName)
    ));

    let empty = FnCompletionClient(|_: &str| Ok("   ".to_string()));
    let cache2 = ResponseCache::in_memory();
    let runner2 = PromptRunner::new(&empty, &cache2);
    assert!(matches!(
        expand_item_summary("Portal", &runner2),
        Err(ExtractError::EmptyResponse)
    ));
}

#[test]
fn client_failures_surface_from_ops() {
    let (_, item) = test_graph();
    let failing =
        FnCompletionClient(|_: &str| Err(ExtractError::ClientFailure("down".to_string())));
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&failing, &cache);
    assert!(matches!(
        extract_exact_intents(item, "text", &runner),
        Err(ExtractError::ClientFailure(_))
    ));
}

// ---------------------------------------------------------------------------
// two-round driver
// ---------------------------------------------------------------------------

/// Ten items over a planted shared vocabulary; two users with profile text.
fn corpus() -> (IntentGraph, Vec<SubjectText>) {
    let mut g = IntentGraph::new();
    let mut subjects = Vec::new();
    // each text quotes two phrases (round-1 fodder) and mentions one more
    // phrase's token unquoted, so round-2 retrieval has something to pick
    let texts = [
        "A shooter built around \"tactical combat\" and \"squad orders\" with light logistics touches.",
        "Roguelike dungeons with \"tactical combat\" and \"permadeath runs\" plus physics flourishes.",
        "City builder praising \"logistics planning\" and \"squad orders\" under drift weather.",
        "A puzzle box of \"physics toys\" and \"logistics planning\" told through dialogue.",
        "Narrative walk with \"branching dialogue\" and \"physics toys\" and occasional combat.",
        "Racer focused on \"drift tuning\" and \"branching dialogue\" between permadeath heats.",
        "Sim about \"drift tuning\" and \"permadeath runs\" with squad management.",
        "Sandbox with \"squad orders\" and \"physics toys\" and deep tuning.",
        "Tower defense of \"logistics planning\" and \"tactical combat\" with branching maps.",
        "Idle game of \"permadeath runs\" and \"drift tuning\" about orders.",
    ];
    for (i, text) in texts.iter().enumerate() {
        let item = g.add_item(format!("item {i}"));
        subjects.push(SubjectText { node: item, text: text.to_string() });
    }
    let u = g.add_user("u0");
    subjects.push(SubjectText {
        node: u,
        text: "Longtime fan of \"tactical combat\" above all, dabbling in physics.".to_string(),
    });
    (g, subjects)
}

#[test]
fn run_extraction_builds_exact_and_related_edges() {
    let (mut g, subjects) = corpus();
    let kb = KnowledgeBase::new();
    let client = MockCompletionClient;
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let outcome =
        run_extraction(&mut g, &subjects, &kb, &runner, HashEncoder::default(), 100).unwrap();

    g.check_consistency().unwrap();
    let stats = g.stats();
    assert_eq!(stats.items, 10);
    assert_eq!(stats.users, 1);
    // seven distinct planted phrases → seven intent nodes
    assert_eq!(stats.intents, 7);
    assert_eq!(outcome.report.vocabulary, 7);

    // oracle: count exact-label occurrences by direct string scan
    let mut exact_occurrences = 0;
    for s in &subjects {
        let quoted: HashSet<&str> = s.text.split('"').skip(1).step_by(2).collect();
        exact_occurrences += quoted.len();
    }
    assert!(stats.intent_edges >= exact_occurrences);
    assert_eq!(outcome.report.exact_labels, exact_occurrences);
    assert_eq!(outcome.report.failed_subjects, vec![]);

    // user got a possesses edge; items got satisfies edges
    let exact_user_edges = g
        .edges()
        .iter()
        .filter(|e| e.relation == RelationKind::UserPossessesIntent)
        .count();
    assert!(exact_user_edges >= 1);
    // round 2 found at least one related edge somewhere
    assert!(g.edges().iter().any(|e| e.provenance == Provenance::Related));
}

#[test]
fn run_extraction_is_deterministic() {
    let run = || {
        let (mut g, subjects) = corpus();
        let kb = KnowledgeBase::new();
        let client = MockCompletionClient;
        let cache = ResponseCache::in_memory();
        let runner = PromptRunner::new(&client, &cache);
        run_extraction(&mut g, &subjects, &kb, &runner, HashEncoder::default(), 100).unwrap();
        let mut buf = Vec::new();
        g.save(&mut buf).unwrap();
        buf
    };
    assert_eq!(run(), run());
}

#[test]
fn run_extraction_merges_shared_labels() {
    let mut g = IntentGraph::new();
    let a = g.add_item("a");
    let b = g.add_item("b");
    let subjects = vec![
        SubjectText { node: a, text: "features \"combat\" loops".to_string() },
        SubjectText { node: b, text: "more \"Combat\" here".to_string() },
    ];
    let kb = KnowledgeBase::new();
    let client = MockCompletionClient;
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    run_extraction(&mut g, &subjects, &kb, &runner, HashEncoder::default(), 100).unwrap();

    let intents: Vec<_> = g.nodes().filter(|n| n.kind == NodeKind::Intent).collect();
    assert_eq!(intents.len(), 1, "case variants must merge");
    let intent = intents[0].id;
    assert!(g.has_edge(a, intent, RelationKind::ItemSatisfiesIntent));
    assert!(g.has_edge(b, intent, RelationKind::ItemSatisfiesIntent));
}

#[test]
fn run_extraction_excludes_own_labels_from_round2() {
    // one item produces the entire vocabulary → zero options remain for it
    let mut g = IntentGraph::new();
    let a = g.add_item("a");
    let subjects = vec![SubjectText {
        node: a,
        text: "all of \"alpha\" and \"beta\"".to_string(),
    }];
    let kb = KnowledgeBase::new();
    let client = MockCompletionClient;
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let outcome =
        run_extraction(&mut g, &subjects, &kb, &runner, HashEncoder::default(), 100).unwrap();
    assert_eq!(outcome.report.related_labels, 0);
    assert!(g.edges().iter().all(|e| e.provenance == Provenance::Exact));
}

#[test]
fn run_extraction_survives_per_subject_failures() {
    let mut g = IntentGraph::new();
    let a = g.add_item("a");
    let b = g.add_item("b");
    let subjects = vec![
        SubjectText { node: a, text: "BOOM".to_string() },
        SubjectText { node: b, text: "fine \"combat\" text".to_string() },
    ];
    let calls = AtomicU64::new(0);
    let client = FnCompletionClient(move |prompt: &str| {
        calls.fetch_add(1, Ordering::Relaxed);
        if prompt.contains("BOOM") {
            Err(ExtractError::ClientFailure("subject a exploded".to_string()))
        } else {
            Ok(r#"["combat"]"#.to_string())
        }
    });
    let kb = KnowledgeBase::new();
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    let outcome =
        run_extraction(&mut g, &subjects, &kb, &runner, HashEncoder::default(), 100).unwrap();
    // the failing subject is reported (once per attempted round), never others
    assert!(!outcome.report.failed_subjects.is_empty());
    assert!(outcome.report.failed_subjects.iter().all(|(n, _)| *n == a));
    // the healthy subject still produced its edge
    let intent = g.find_intent("combat").unwrap();
    assert!(g.has_edge(b, intent, RelationKind::ItemSatisfiesIntent));
}

#[test]
fn run_extraction_rejects_intent_subjects() {
    let mut g = IntentGraph::new();
    let t = g.intent("label").unwrap();
    let subjects = vec![SubjectText { node: t, text: "text".to_string() }];
    let kb = KnowledgeBase::new();
    let client = MockCompletionClient;
    let cache = ResponseCache::in_memory();
    let runner = PromptRunner::new(&client, &cache);
    assert!(matches!(
        run_extraction(&mut g, &subjects, &kb, &runner, HashEncoder::default(), 100),
        Err(ExtractError::InvalidSubject(_))
    ));
}

#[test]
fn kb_grounding_changes_extraction() {
    // the KB explanation plants a quoted phrase the raw text lacks
    let mut kb = KnowledgeBase::new();
    kb.insert("RTS", "short for \"real-time strategy\"").unwrap();

    let build = |kb: &KnowledgeBase| {
        let mut g = IntentGraph::new();
        let a = g.add_item("a");
        let subjects = vec![SubjectText { node: a, text: "A classic RTS at heart.".to_string() }];
        let client = MockCompletionClient;
        let cache = ResponseCache::in_memory();
        let runner = PromptRunner::new(&client, &cache);
        run_extraction(&mut g, &subjects, kb, &runner, HashEncoder::default(), 100).unwrap();
        let mut labels: Vec<String> =
            g.nodes().filter(|n| n.kind == NodeKind::Intent).map(|n| n.label.clone()).collect();
        labels.sort();
        labels
    };

    let with_kb = build(&kb);
    let without = build(&KnowledgeBase::new());
    assert!(with_kb.contains(&"real-time strategy".to_string()));
    assert!(!without.contains(&"real-time strategy".to_string()));
}

// ---------------------------------------------------------------------------
// properties
// ---------------------------------------------------------------------------

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Rendering then parsing returns the labels verbatim.
        #[test]
        fn render_parse_round_trip(labels in prop::collection::vec("[ -~]{0,20}", 0..8)) {
            let rendered = render_label_list(&labels);
            prop_assert_eq!(parse_label_list(&rendered).unwrap(), labels);
        }

        /// Whatever the model replies, accepted round-2 labels are a subset
        /// of the offered options.
        #[test]
        fn round2_labels_subset_of_options(
            response in ".{0,120}",
            options in prop::collection::hash_set("[a-z]{1,8}", 1..10),
        ) {
            let options: Vec<String> = options.into_iter().collect();
            let mut g = IntentGraph::new();
            let item = g.add_item("x");
            let resp = response.clone();
            let client = FnCompletionClient(move |_: &str| Ok(resp.clone()));
            let cache = ResponseCache::in_memory();
            let runner = PromptRunner::new(&client, &cache);
            let record = select_related_intents(item, "desc", &options, &runner).unwrap();
            let offered: HashSet<String> =
                options.iter().map(|o| crate::label::canonical(o)).collect();
            for l in &record.labels {
                prop_assert!(offered.contains(l), "{l:?} not offered");
            }
        }

        /// KB augmentation always preserves the input as a prefix.
        #[test]
        fn kb_output_preserves_prefix(text in ".{0,80}") {
            let kb = kb_mlp();
            let out = augment_with_kb(&text, &kb);
            prop_assert!(out.starts_with(&text));
        }
    }
}
