//! Golden judgments and reports for the example corpus.

mod common;

use strictness::cli;

#[test]
fn corpus_judgments_match_their_headers() {
    let corpus = common::load_corpus();
    assert!(!corpus.is_empty());
    let failures: Vec<String> = corpus
        .iter()
        .filter_map(|c| common::judgment_matches(c).err())
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn corpus_reports_match_their_headers() {
    for case in common::load_corpus() {
        common::report_matches(&case).unwrap();
    }
}

#[test]
fn check_output_prints_the_expected_judgment() {
    for case in common::load_corpus() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli::run(
            ["strictness", "check", case.path.to_str().unwrap()],
            &mut out,
            &mut err,
        );
        assert_eq!(code, cli::EXIT_OK, "{}", String::from_utf8_lossy(&err));
        let out = String::from_utf8(out).unwrap();
        let line = out
            .lines()
            .find_map(|l| l.strip_prefix("⊢ main :^"))
            .expect("a main judgment line");
        let close = line.find("} ").expect("an effect vector");
        let printed = common::Case {
            effect: line[..=close].to_string(),
            ty: line[close + 2..].to_string(),
            ..case
        };
        common::judgment_matches(&printed).unwrap();
    }
}
