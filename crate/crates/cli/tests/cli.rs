use std::collections::BTreeSet;
use std::io::Cursor;
use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["qrec"];
    argv.extend_from_slice(args);
    let code = qrec_cli::run(argv, &mut input, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn recommend_prints_five_blocks() {
    let (db, log) = (fixture("toy.sqlite"), fixture("refs.json"));
    let (code, out, err) = run(&["recommend", "--db", &db, "--log", &log], "");
    assert_eq!(code, 0, "{err}");
    let blocks: Vec<&str> = out.trim_end().split("\n\n").collect();
    assert_eq!(blocks.len(), 5);
    let mut sqls = BTreeSet::new();
    for (i, block) in blocks.iter().enumerate() {
        let lines: Vec<&str> = block.lines().collect();
        assert_eq!(lines.len(), 3, "{block}");
        assert!(lines[0].starts_with(&format!("[{i}] ")));
        assert!(lines[1].trim_start().starts_with("score "));
        assert!(lines[2].trim_start().starts_with("SELECT "));
        sqls.insert(lines[2]);
    }
    assert_eq!(sqls.len(), 5);

    let (code, out, _) = run(
        &["recommend", "--db", &db, "--log", &log, "--top-k", "2"],
        "",
    );
    assert_eq!(code, 0);
    assert_eq!(out.trim_end().split("\n\n").count(), 2);
}

#[test]
fn usage_errors_exit_two() {
    let log = fixture("refs.json");
    let (code, out, err) = run(&["recommend", "--log", &log], "");
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("--db") && err.contains("Usage"), "{err}");

    let (code, _, err) = run(&["recommend", "--db", &fixture("toy.sqlite")], "");
    assert_eq!(code, 2);
    assert!(err.contains("--log"), "{err}");

    let (code, _, err) = run(&["serve", "--log", &log], "");
    assert_eq!(code, 2);
    assert!(err.contains("--db"), "{err}");

    let (code, _, _) = run(&["frobnicate"], "");
    assert_eq!(code, 2);
    let (code, out, _) = run(&["--help"], "");
    assert_eq!(code, 0);
    assert!(out.contains("recommend"));
}

#[test]
fn runtime_errors_exit_one() {
    let (code, _, err) = run(
        &[
            "recommend",
            "--db",
            &fixture("toy.sqlite"),
            "--log",
            &fixture("missing.json"),
        ],
        "",
    );
    assert_eq!(code, 1);
    assert!(err.starts_with("error: "), "{err}");
}

/// Maximal frequent itemsets via closure: every closed set is an
/// intersection of transactions, and every maximal frequent set is closed.
fn maximal_by_closure(
    transactions: &[BTreeSet<String>],
    min_count: usize,
) -> BTreeSet<BTreeSet<String>> {
    let mut closed: BTreeSet<BTreeSet<String>> = BTreeSet::new();
    for t in transactions {
        let grown: Vec<BTreeSet<String>> = closed
            .iter()
            .map(|c| c.intersection(t).cloned().collect())
            .collect();
        closed.insert(t.clone());
        closed.extend(grown);
    }
    let support = |s: &BTreeSet<String>| transactions.iter().filter(|t| s.is_subset(t)).count();
    let frequent: Vec<BTreeSet<String>> = closed
        .into_iter()
        .filter(|s| !s.is_empty() && support(s) >= min_count)
        .collect();
    frequent
        .iter()
        .filter(|s| !frequent.iter().any(|o| o.len() > s.len() && s.is_subset(o)))
        .cloned()
        .collect()
}

#[test]
fn mine_report_matches_closure_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let log = fixture("refs.json");
    let (code, _, err) = run(
        &["mine", "--log", &log, "--out", path.to_str().unwrap()],
        "",
    );
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["min_support"], 0.1);
    assert_eq!(report["binarization_threshold"], 0.5);
    let domains = report["domains"].as_array().unwrap();
    assert_eq!(domains.len(), 6);
    let strings = |v: &Value| -> BTreeSet<String> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().to_string())
            .collect()
    };
    let mut mined_any = false;
    for d in domains {
        let transactions: Vec<BTreeSet<String>> = d["transactions"]
            .as_array()
            .unwrap()
            .iter()
            .map(strings)
            .collect();
        let n = transactions.len();
        let min_count = ((0.1 * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let want = maximal_by_closure(&transactions, min_count);
        let mut got = BTreeSet::new();
        for set in d["itemsets"].as_array().unwrap() {
            let cols = strings(&set["columns"]);
            let support = transactions.iter().filter(|t| cols.is_subset(t)).count();
            assert_eq!(set["support"].as_u64().unwrap() as usize, support);
            let rel = set["relative_support"].as_f64().unwrap();
            assert!((rel - support as f64 / n as f64).abs() < 1e-12);
            got.insert(cols);
        }
        assert_eq!(got, want, "{}", d["domain_label"]);
        mined_any |= !got.is_empty();
        let columns = strings(&d["columns"]);
        assert!(transactions.iter().all(|t| t.is_subset(&columns)));
    }
    assert!(mined_any);
}

#[test]
fn binary_output_is_byte_identical_across_runs() {
    let exe = env!("CARGO_BIN_EXE_qrec");
    let (db, log) = (fixture("toy.sqlite"), fixture("refs.json"));
    let once = |args: &[&str]| {
        let o = Command::new(exe).args(args).output().unwrap();
        assert!(o.status.success());
        o.stdout
    };
    let rec = ["recommend", "--db", db.as_str(), "--log", log.as_str()];
    assert_eq!(once(&rec), once(&rec));
    let mine = ["mine", "--log", log.as_str()];
    assert_eq!(once(&mine), once(&mine));
}

#[test]
fn repl_session() {
    let (db, log) = (fixture("toy.sqlite"), fixture("refs.json"));
    let script = "\
:pick 0
SELECT order_status FROM
SELECT products.product_details FROM products
:pick 9
:bogus
:history
:quit
";
    let (code, out, err) = run(&["repl", "--db", &db, "--log", &log], script);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("commands: "));
    assert!(out.contains("#0 What is the total order quantity for each order status?"));
    assert!(out.contains("    chart: bar"));
    assert!(out.contains("parse error at 24"));
    assert!(out.contains("#1 What are the product details?"));
    assert!(out.contains("no recommendation 9"));
    assert!(out.contains("unknown command `:bogus`"));
    let history_listing = out.rsplit("qrec> ").nth(1).unwrap();
    assert!(history_listing.starts_with("#0 ") && history_listing.contains("\n#1 "));
    // initial set plus one per executed query
    assert_eq!(out.lines().filter(|l| l.starts_with("[0] ")).count(), 3);

    let (code, out, _) = run(&["repl", "--db", &db, "--log", &log], "");
    assert_eq!(code, 0);
    assert!(out.ends_with("qrec> \n"));
}
