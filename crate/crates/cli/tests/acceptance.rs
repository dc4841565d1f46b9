//! Acceptance suite. Each test is one pass/fail criterion; tolerances and
//! sizes are pinned in the constants below.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use plc_core::corpus::{LanguageId, LanguageRegistry, NaturalLanguageTag, TaskKind};
use plc_core::detect::{
    consensus, default_configs, run_detectors, ConsensusParams, ConsensusRule, Detector, DetectorConfig,
    DetectorVote, HeuristicDetector, HttpDetector,
};
use plc_core::metrics::{
    cppr, dmr, fpr, lcpr, summarize, GroupBy, MetricsError, Partition, SampleEvaluation,
};
use plc_core::migrate::{build_matrix, build_matrix_on, emit_chord, MatrixAxis};
use plc_core::parse::GrammarRegistry;

const ORACLE_CORPORA: usize = 1000;
const ORACLE_MAX_SAMPLES: usize = 500;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(10);
const IDENTITY_TOLERANCE: f64 = 1e-12;
const CONSENSUS_VOTE_SETS: usize = 10_000;
const HEURISTIC_MIN_ACCURACY: f64 = 0.90;
const ENSEMBLE_MIN_ACCURACY: f64 = 0.98;
const MIGRATION_CORPORA: usize = 300;
const E2E_TIME_LIMIT: Duration = Duration::from_secs(30);
const E2E_JOBS: [usize; 3] = [1, 4, 16];
const LIVE_MIN_TASKS: usize = 50;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn registry() -> LanguageRegistry {
    LanguageRegistry::default()
}

fn lang(name: &str) -> LanguageId {
    registry().normalize(name).unwrap()
}

// ---------------------------------------------------------------------------
// randomized corpora and a brute-force counting oracle

fn random_corpus(rng: &mut StdRng, langs: &[LanguageId], with_functional: bool) -> Vec<SampleEvaluation> {
    let n = rng.gen_range(0..=ORACLE_MAX_SAMPLES);
    // a small palette per corpus makes collisions and ties common
    let k = rng.gen_range(1..=5.min(langs.len()));
    let palette: Vec<LanguageId> = langs.choose_multiple(rng, k).cloned().collect();
    let confusion_rate: f64 = rng.gen();
    (0..n)
        .map(|i| {
            let expected = palette.choose(rng).unwrap().clone();
            let detected = if rng.gen_bool(confusion_rate) {
                if rng.gen_bool(0.1) {
                    LanguageId::unknown()
                } else {
                    palette.choose(rng).unwrap().clone()
                }
            } else {
                expected.clone()
            };
            let translation = rng.gen_bool(0.3);
            SampleEvaluation {
                task_id: format!("t{i}"),
                model_id: ["m1", "m2", "m3"].choose(rng).unwrap().to_string(),
                dataset: ["d1", "d2"].choose(rng).unwrap().to_string(),
                kind: if translation { TaskKind::Translation } else { TaskKind::Generation },
                source_language: translation.then(|| palette.choose(rng).unwrap().clone()),
                confused: detected != expected,
                parse_ok: !detected.is_unknown() && rng.gen_bool(0.7),
                expected,
                detected,
                confidence: rng.gen(),
                rule: ConsensusRule::Weighted,
                extract_method: None,
                functional_pass: with_functional.then(|| rng.gen_bool(0.5)),
                natural_language: NaturalLanguageTag::new(*["en", "fr", "zh"].choose(rng).unwrap()).unwrap(),
            }
        })
        .collect()
}

/// Counts straight off the raw tuples, without the library's partitions.
struct Oracle {
    total: usize,
    correct: usize,
    confused: usize,
    parse_all: usize,
    parse_confused: usize,
    parse_nonconfused: usize,
    dest: HashMap<String, usize>,
    pass_all: usize,
    pass_confused: usize,
    pass_nonconfused: usize,
}

fn oracle(samples: &[SampleEvaluation]) -> Oracle {
    let mut o = Oracle {
        total: 0,
        correct: 0,
        confused: 0,
        parse_all: 0,
        parse_confused: 0,
        parse_nonconfused: 0,
        dest: HashMap::new(),
        pass_all: 0,
        pass_confused: 0,
        pass_nonconfused: 0,
    };
    for s in samples {
        o.total += 1;
        let wrong = s.expected.as_str() != s.detected.as_str();
        let parsed = s.parse_ok;
        let passed = s.functional_pass == Some(true);
        if wrong {
            o.confused += 1;
            *o.dest.entry(s.detected.as_str().to_string()).or_insert(0) += 1;
            if parsed {
                o.parse_confused += 1;
            }
            if passed {
                o.pass_confused += 1;
            }
        } else {
            o.correct += 1;
            if parsed {
                o.parse_nonconfused += 1;
            }
            if passed {
                o.pass_nonconfused += 1;
            }
        }
        if parsed {
            o.parse_all += 1;
        }
        if passed {
            o.pass_all += 1;
        }
    }
    o
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[test]
fn metric_oracle_equivalence() {
    let langs = registry().languages();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let started = Instant::now();
    for _ in 0..ORACLE_CORPORA {
        let with_functional = rng.gen_bool(0.8);
        let samples = random_corpus(&mut rng, &langs, with_functional);
        let o = oracle(&samples);

        match lcpr(&samples) {
            Ok(v) => assert_eq!(Some(v), rate(o.correct, o.total)),
            Err(e) => assert_eq!((e, o.total), (MetricsError::EmptySlice, 0)),
        }
        assert_eq!(cppr(&samples, Partition::All), rate(o.parse_all, o.total));
        assert_eq!(cppr(&samples, Partition::Confused), rate(o.parse_confused, o.confused));
        assert_eq!(cppr(&samples, Partition::Nonconfused), rate(o.parse_nonconfused, o.correct));

        let mut destinations: Vec<LanguageId> = langs.clone();
        destinations.push(LanguageId::unknown());
        for d in &destinations {
            let expect = rate(*o.dest.get(d.as_str()).unwrap_or(&0), o.confused);
            match dmr(&samples, d) {
                Ok(v) => assert_eq!(Some(v), expect),
                Err(e) => assert_eq!((e, o.confused), (MetricsError::NoConfusedSamples, 0)),
            }
        }

        if with_functional {
            assert_eq!(fpr(&samples, Partition::All).unwrap(), rate(o.pass_all, o.total));
            assert_eq!(fpr(&samples, Partition::Confused).unwrap(), rate(o.pass_confused, o.confused));
            assert_eq!(fpr(&samples, Partition::Nonconfused).unwrap(), rate(o.pass_nonconfused, o.correct));
        } else if o.total > 0 {
            assert!(matches!(
                fpr(&samples, Partition::All),
                Err(MetricsError::MissingFunctionalResult { .. })
            ));
        }
    }
    let elapsed = started.elapsed();
    eprintln!("metric oracle: {ORACLE_CORPORA} corpora in {elapsed:?}");
    assert!(elapsed < ORACLE_TIME_LIMIT, "took {elapsed:?}");
}

#[test]
fn metric_identities() {
    let langs = registry().languages();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    for _ in 0..ORACLE_CORPORA {
        let samples = random_corpus(&mut rng, &langs, false);
        if samples.is_empty() {
            continue;
        }
        // ungrouped totals through the summary path
        let whole: Vec<SampleEvaluation> = samples
            .iter()
            .cloned()
            .map(|mut s| {
                s.model_id = "m".into();
                s.dataset = "d".into();
                s
            })
            .collect();
        let summary = &summarize(&whole, GroupBy::ModelDataset)[0];
        let c = &summary.counts;

        // lcpr + n_confused / n_total = 1
        assert_eq!(c.n_nonconfused() + c.n_confused, c.n_total);
        let l = lcpr(&samples).unwrap();
        assert!((l + c.n_confused as f64 / c.n_total as f64 - 1.0).abs() <= IDENTITY_TOLERANCE);

        // destinations share out every confused sample
        if c.n_confused > 0 {
            assert_eq!(c.destinations.values().sum::<u64>(), c.n_confused);
            let total: f64 = c.destinations.keys().map(|d| dmr(&samples, d).unwrap()).sum();
            assert!((total - 1.0).abs() <= IDENTITY_TOLERANCE, "Σ dmr = {total}");
        }

        // CPPR partitions add up
        let parse_all = samples.iter().filter(|s| s.parse_ok).count() as u64;
        assert_eq!(c.parse_ok_confused + c.parse_ok_nonconfused, parse_all);

        // size-weighted mean of per-group lcpr equals the ungrouped value
        let groups = summarize(&samples, GroupBy::ModelDatasetNl);
        let weighted: f64 = groups
            .iter()
            .map(|g| g.lcpr.unwrap() * g.n_total as f64)
            .sum::<f64>()
            / samples.len() as f64;
        assert!((weighted - l).abs() <= IDENTITY_TOLERANCE);
    }
}

// ---------------------------------------------------------------------------
// consensus

fn random_votes(rng: &mut StdRng, labels: &[LanguageId]) -> (Vec<DetectorVote>, Vec<DetectorConfig>) {
    let n = rng.gen_range(1..=5);
    let mut ranks: Vec<u32> = (1..=n as u32).collect();
    ranks.shuffle(rng);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect();
    let sum: f64 = raw.iter().sum();
    let configs: Vec<DetectorConfig> = (0..n)
        .map(|i| DetectorConfig {
            detector_id: format!("d{i}"),
            weight: raw[i] / sum,
            priority_rank: ranks[i],
        })
        .collect();
    let unanimous = rng.gen_bool(0.3);
    let shared = labels.choose(rng).unwrap().clone();
    let votes = (0..n)
        .map(|i| DetectorVote {
            detector_id: format!("d{i}"),
            label: if unanimous { shared.clone() } else { labels.choose(rng).unwrap().clone() },
            // coarse values make exact ties and margin edge cases likely
            confidence: if rng.gen_bool(0.5) {
                rng.gen_range(0..=10) as f64 / 10.0
            } else {
                rng.gen()
            },
        })
        .collect();
    (votes, configs)
}

#[test]
fn consensus_properties() {
    let mut labels = registry().languages()[..4].to_vec();
    labels.push(LanguageId::unknown());
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    for _ in 0..CONSENSUS_VOTE_SETS {
        let (votes, configs) = random_votes(&mut rng, &labels);
        let params = ConsensusParams {
            margin: rng.gen_range(0.0..0.3),
            floor: rng.gen_range(0.0..0.5),
        };
        let d = consensus(&votes, &configs, params).unwrap();

        // determinism
        assert_eq!(consensus(&votes, &configs, params).unwrap(), d);

        // permutation stability
        let mut shuffled = votes.clone();
        shuffled.shuffle(&mut rng);
        let mut shuffled_configs = configs.clone();
        shuffled_configs.shuffle(&mut rng);
        let p = consensus(&shuffled, &shuffled_configs, params).unwrap();
        assert_eq!(p.label, d.label);
        assert_eq!(p.rule, d.rule);
        assert_eq!(p.confidence.to_bits(), d.confidence.to_bits());
        assert_eq!(p.votes, d.votes);

        // unanimity dominance
        let first = &votes[0].label;
        let max_conf = votes.iter().map(|v| v.confidence).fold(0.0, f64::max);
        if votes.iter().all(|v| &v.label == first) && max_conf >= params.floor {
            assert_eq!(&d.label, first);
            assert_eq!(d.rule, ConsensusRule::Unanimous);
        }

        // decision invariants
        assert!((0.0..=1.0).contains(&d.confidence));
        if d.rule == ConsensusRule::Unanimous {
            assert!(d.votes.iter().all(|v| v.label == d.label));
        }
        if d.rule == ConsensusRule::BelowThresholdUnknown {
            assert!(d.label.is_unknown());
        }
    }

    // hand-computed example: python 0.5·0.9 = 0.45, java 0.3·0.6 + 0.2·0.7 = 0.32
    let votes = [
        DetectorVote { detector_id: "A".into(), label: lang("python"), confidence: 0.9 },
        DetectorVote { detector_id: "B".into(), label: lang("java"), confidence: 0.6 },
        DetectorVote { detector_id: "C".into(), label: lang("java"), confidence: 0.7 },
    ];
    let configs = [
        DetectorConfig { detector_id: "A".into(), weight: 0.5, priority_rank: 1 },
        DetectorConfig { detector_id: "B".into(), weight: 0.3, priority_rank: 2 },
        DetectorConfig { detector_id: "C".into(), weight: 0.2, priority_rank: 3 },
    ];
    let d = consensus(&votes, &configs, ConsensusParams { margin: 0.05, floor: 0.1 }).unwrap();
    assert_eq!(d.label, lang("python"));
    assert_eq!(d.rule, ConsensusRule::Weighted);
    assert!((d.confidence - 0.45).abs() < 1e-12);
}

// ---------------------------------------------------------------------------
// detection and parsing on the labeled snippet fixture

fn snippets() -> Vec<(LanguageId, String, String)> {
    let root = manifest_dir().join("../core/fixtures/snippets");
    let mut out = Vec::new();
    let mut dirs: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    for dir in dirs {
        let l = lang(dir.file_name().unwrap().to_str().unwrap());
        let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        for f in files {
            out.push((l.clone(), f.display().to_string(), fs::read_to_string(&f).unwrap()));
        }
    }
    out
}

/// HTTP detector stub that answers from the fixture labels but is wrong,
/// with middling confidence, on every snippet whose index ≡ `wrong_mod`
/// (mod 10).
fn labeling_stub(answers: HashMap<String, (String, usize)>, wrong_mod: usize) -> String {
    let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
    let port = server.server_addr().to_ip().unwrap().port();
    let answers = Arc::new(answers);
    for _ in 0..4 {
        let server = server.clone();
        let answers = answers.clone();
        thread::spawn(move || {
            for mut req in server.incoming_requests() {
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let body: serde_json::Value = serde_json::from_str(&body).unwrap();
                let code = body["code"].as_str().unwrap();
                let reply = match answers.get(code) {
                    Some((_, i)) if i % 10 == wrong_mod => serde_json::json!({"label": "python", "confidence": 0.6}),
                    Some((label, _)) => serde_json::json!({"label": label, "confidence": 0.95}),
                    None => serde_json::json!({"label": "unknown", "confidence": 0.0}),
                };
                let _ = req.respond(tiny_http::Response::from_string(reply.to_string()));
            }
        });
    }
    format!("http://127.0.0.1:{port}/detect")
}

#[test]
fn detection_fixture_accuracy() {
    let reg = registry();
    let all = snippets();
    for l in reg.languages() {
        assert!(all.iter().filter(|(x, _, _)| *x == l).count() >= 10, "{l} has fewer than 10 snippets");
    }

    let heuristic: Arc<dyn Detector> = Arc::new(HeuristicDetector::new(&reg));
    let correct = all.iter().filter(|(l, _, code)| &heuristic.detect(code).unwrap().label == l).count();
    let h_acc = correct as f64 / all.len() as f64;

    let answers: HashMap<String, (String, usize)> = all
        .iter()
        .enumerate()
        .map(|(i, (l, _, code))| (code.clone(), (l.to_string(), i)))
        .collect();
    let primary: Arc<dyn Detector> =
        Arc::new(HttpDetector::new("stub-primary", labeling_stub(answers.clone(), 0), reg.clone()));
    let secondary: Arc<dyn Detector> =
        Arc::new(HttpDetector::new("stub-secondary", labeling_stub(answers, 5), reg.clone()));
    let ensemble = vec![primary, heuristic.clone(), secondary];
    let configs = default_configs(&["stub-primary", "heuristic", "stub-secondary"]);
    let mut ensemble_correct = 0;
    for (l, path, code) in &all {
        let run = run_detectors(code, &ensemble).unwrap();
        assert_eq!(run.votes.len(), 3, "{path}: a stub did not answer");
        let d = consensus(&run.votes, &configs, ConsensusParams::default()).unwrap();
        if &d.label == l {
            ensemble_correct += 1;
        }
    }
    let e_acc = ensemble_correct as f64 / all.len() as f64;
    eprintln!("heuristic accuracy {h_acc:.4}, ensemble accuracy {e_acc:.4} on {} snippets", all.len());
    assert!(h_acc >= HEURISTIC_MIN_ACCURACY, "heuristic accuracy {h_acc}");
    assert!(e_acc >= ENSEMBLE_MIN_ACCURACY, "ensemble accuracy {e_acc}");
}

const LISTING_PYTHON_ANSWER: &str = r#"def get_last_two_digits_of_factorial(n):
    fact = 1
    for i in range(2, n+1):
        fact *= i
    return str(fact)[-2:]
# Test cases
assert get_last_two_digits_of_factorial(1) == "1"
assert get_last_two_digits_of_factorial(10) == "4"
assert get_last_two_digits_of_factorial(100) == "7"
"#;

#[test]
fn parse_discrimination() {
    let grammars = GrammarRegistry::builtin();
    for (l, path, code) in snippets() {
        let out = grammars.validate_syntax(&code, &l).unwrap();
        assert!(out.ok, "{path} does not parse as {l}: {:?}", out.first_error);
    }
    assert!(grammars.validate_syntax(LISTING_PYTHON_ANSWER, &lang("python")).unwrap().ok);
    let java = grammars.validate_syntax(LISTING_PYTHON_ANSWER, &lang("java")).unwrap();
    assert!(!java.ok);
    assert!(java.error_count >= 1);
}

// ---------------------------------------------------------------------------
// reports

fn plc(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_plc")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn report_golden_files() {
    let fixture = manifest_dir().join("tests/fixtures/report");
    let evaluations = fixture.join("evaluations.jsonl");
    let tmp = tempfile::tempdir().unwrap();
    for (format, ext) in [("markdown", "md"), ("csv", "csv")] {
        let out = tmp.path().join(ext);
        let (code, _, err) = plc(&[
            "report",
            "--evaluations",
            evaluations.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--format",
            format,
        ]);
        assert_eq!(code, 0, "{err}");
        for report in ["summary", "nl"] {
            let got = fs::read(out.join(format!("livecodebench_all_{report}.{ext}"))).unwrap();
            let want = fs::read(fixture.join(format!("golden/{report}.{ext}"))).unwrap();
            assert_eq!(
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(&want),
                "{report}.{ext} differs from golden"
            );
        }
    }

    let md = fs::read_to_string(fixture.join("golden/summary.md")).unwrap();
    assert!(md.starts_with("| LLMs | Dataset | LCPR | CPPR non confuse % | CPPR confuse % | DMR % |\n"));
    // a model that never drifted has nothing to put in the confused columns
    assert!(md.contains("| gpt-4o | livecodebench | 100.00 | 95.00 | - | - |"));
    // 27 of 29 confused samples went to C++
    assert!(md.contains("| 93.10 (cpp) |"));
    let dmr_cell = regex_lite_dmr();
    for line in md.lines().skip(2) {
        let last = line.trim_end_matches(" |").rsplit(" | ").next().unwrap();
        assert!(last == "-" || dmr_cell(last), "bad DMR cell {last:?}");
    }
}

/// Matches `NN.NN (lang)` without pulling in a regex engine.
fn regex_lite_dmr() -> impl Fn(&str) -> bool {
    |s: &str| {
        let Some((num, rest)) = s.split_once(' ') else { return false };
        let Some((int, frac)) = num.split_once('.') else { return false };
        !int.is_empty()
            && int.chars().all(|c| c.is_ascii_digit())
            && frac.len() == 2
            && frac.chars().all(|c| c.is_ascii_digit())
            && rest.starts_with('(')
            && rest.ends_with(')')
            && rest.len() > 2
    }
}

// ---------------------------------------------------------------------------
// migration

#[test]
fn migration_consistency() {
    let langs = registry().languages();
    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    for _ in 0..MIGRATION_CORPORA {
        let samples = random_corpus(&mut rng, &langs, false);
        let m = build_matrix(&samples);
        let n_confused = samples.iter().filter(|s| s.confused).count() as u64;

        let key = plc_core::metrics::GroupKey {
            model_id: "all".into(),
            dataset: "all".into(),
            nl_bucket: None,
        };
        let chord = emit_chord(&m, key.clone(), false);
        assert_eq!(chord.flows.iter().map(|f| f.count).sum::<u64>(), n_confused);
        assert_eq!(chord.n_confused, n_confused);
        let summary_confused: u64 = summarize(&samples, GroupBy::ModelDataset).iter().map(|s| s.n_confused).sum();
        assert_eq!(summary_confused, n_confused);

        let mut per_expected: BTreeMap<LanguageId, u64> = BTreeMap::new();
        for s in &samples {
            *per_expected.entry(s.expected.clone()).or_insert(0) += 1;
        }
        assert_eq!(m.row_sums(), per_expected);
        assert_eq!(m.n_total, samples.len() as u64);
        assert_eq!(m.diagonal_sum(), samples.len() as u64 - n_confused);

        // order does not matter
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(build_matrix(&shuffled), m);

        // the source-axis chord covers exactly the confused translation samples
        let src = build_matrix_on(&samples, MatrixAxis::Source);
        let confused_translations =
            samples.iter().filter(|s| s.confused && s.source_language.is_some()).count() as u64;
        let flows: u64 = emit_chord(&src, key, false).flows.iter().map(|f| f.count).sum();
        assert_eq!(flows, confused_translations);
    }
}

// ---------------------------------------------------------------------------
// end to end

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
    }
    out
}

#[test]
fn end_to_end_determinism_and_speed() {
    let fixture = manifest_dir().join("tests/fixtures/e2e");
    let n_completions = fs::read_to_string(fixture.join("completions.jsonl")).unwrap().lines().count();
    assert_eq!(n_completions, 200);
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for jobs in E2E_JOBS {
        let out = tmp.path().join(format!("jobs{jobs}"));
        let started = Instant::now();
        let (code, _, err) = plc(&[
            "evaluate",
            "--tasks",
            fixture.join("tasks.jsonl").to_str().unwrap(),
            "--completions",
            fixture.join("completions.jsonl").to_str().unwrap(),
            "--functional",
            fixture.join("functional.jsonl").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            &jobs.to_string(),
        ]);
        assert_eq!(code, 0, "{err}");
        let (code, _, err) = plc(&[
            "report",
            "--evaluations",
            out.join("evaluations.jsonl").to_str().unwrap(),
            "--out",
            out.join("report").to_str().unwrap(),
            "--chord",
        ]);
        assert_eq!(code, 0, "{err}");
        let elapsed = started.elapsed();
        eprintln!("evaluate+report with {jobs} jobs: {elapsed:?}");
        if jobs == 1 {
            assert!(elapsed < E2E_TIME_LIMIT, "single-threaded run took {elapsed:?}");
        }
        let evaluations = fs::read(out.join("evaluations.jsonl")).unwrap();
        assert_eq!(evaluations.iter().filter(|&&b| b == b'\n').count(), 200);
        outputs.push((evaluations, read_tree(&out.join("report"))));
    }
    for other in &outputs[1..] {
        assert!(other.0 == outputs[0].0, "evaluations differ across job counts");
        assert!(other.1 == outputs[0].1, "reports differ across job counts");
    }
}

// ---------------------------------------------------------------------------
// live endpoint (manual)

const LIVE_PROBLEMS: &[&str] = &[
    "returns the sum of the even numbers in a list of integers",
    "reverses the order of words in a sentence",
    "returns the n-th Fibonacci number",
    "checks whether a string is a palindrome, ignoring case",
    "counts the vowels in a string",
    "returns the largest element of a non-empty list of integers",
    "returns the factorial of a non-negative integer",
    "checks whether an integer is prime",
    "removes duplicate elements from a list while keeping the first occurrence order",
    "returns the greatest common divisor of two positive integers",
    "converts a string to title case",
    "returns the second largest distinct value in a list, or nothing if there is none",
    "merges two sorted lists into one sorted list",
    "counts how many times each character occurs in a string",
    "rotates a list to the right by k positions",
    "returns the running sums of a list of integers",
    "checks whether two strings are anagrams",
    "returns the indices of two numbers in a list that add up to a target",
    "flattens a list of lists of integers",
    "returns the binary representation of a non-negative integer as a string",
];

/// Needs `PLC_LIVE_BASE_URL` and `PLC_LIVE_MODEL` (and optionally
/// `PLC_LIVE_API_KEY_ENV` naming the variable that holds a token). Run with
/// `cargo test -p plc-cli --test acceptance -- --ignored live`.
#[test]
#[ignore = "needs a live chat-completions endpoint"]
fn live_endpoint_sanity() {
    let (Ok(base_url), Ok(model)) = (std::env::var("PLC_LIVE_BASE_URL"), std::env::var("PLC_LIVE_MODEL")) else {
        eprintln!("PLC_LIVE_BASE_URL / PLC_LIVE_MODEL not set; nothing to check");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let mut tasks = String::new();
    let mut n = 0;
    for (lang_name, display) in [("python", "Python"), ("java", "Java"), ("cpp", "C++")] {
        for (i, problem) in LIVE_PROBLEMS.iter().enumerate() {
            let t = serde_json::json!({
                "task_id": format!("{lang_name}/{i:02}"),
                "dataset": "live",
                "kind": "generation",
                "prompt": format!("Write a {display} function that {problem}."),
                "expected_language": lang_name,
                "natural_language": "en",
            });
            tasks.push_str(&t.to_string());
            tasks.push('\n');
            n += 1;
        }
    }
    assert!(n >= LIVE_MIN_TASKS);
    fs::write(tmp.path().join("tasks.jsonl"), tasks).unwrap();
    let mut config = format!(
        "out_dir = \"out\"\ncache_dir = \"cache\"\njobs = 4\n\n[[endpoints]]\nmodel_id = {model:?}\nbase_url = {base_url:?}\n"
    );
    if let Ok(var) = std::env::var("PLC_LIVE_API_KEY_ENV") {
        config.push_str(&format!("api_key_env = {var:?}\n"));
    }
    fs::write(tmp.path().join("run.toml"), config).unwrap();
    let cfg = tmp.path().join("run.toml");
    let tasks = tmp.path().join("tasks.jsonl");
    let (code, _, err) = plc(&["--config", cfg.to_str().unwrap(), "generate", "--tasks", tasks.to_str().unwrap()]);
    assert_ne!(code, 1, "{err}");
    let completions = tmp.path().join("out/completions.jsonl");
    let (code, _, err) = plc(&[
        "--config",
        cfg.to_str().unwrap(),
        "evaluate",
        "--tasks",
        tasks.to_str().unwrap(),
        "--completions",
        completions.to_str().unwrap(),
    ]);
    assert_ne!(code, 1, "{err}");
    let evaluations: Vec<SampleEvaluation> = fs::read_to_string(tmp.path().join("out/evaluations.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let s = &summarize(&evaluations, GroupBy::ModelDataset)[0];
    let l = s.lcpr.unwrap();
    eprintln!("live LCPR {l:.4}, dominant destination {:?}", s.dmr_dominant);
    assert!(l > 0.5 && l <= 1.0, "LCPR {l}");
    if let Some(d) = &s.dmr_dominant {
        assert_eq!(d.language, lang("python"), "confused samples did not lean towards python");
    }
}
