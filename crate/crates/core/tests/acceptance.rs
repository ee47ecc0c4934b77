//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails if any
//! criterion failed. Criterion 10 needs a live endpoint and lives in an ignored test.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use dcflow::agent::{run_pipeline, CompletionBackend, HttpBackend, HttpConfig, PipelineConfig, ScriptedBackend};
use dcflow::benchmark::{inject_errors, validate_case, ErrorProfile, Mix, Suite};
use dcflow::evaluation::{eval_answer, eval_columns, eval_workflow, similarity};
use dcflow::ops::{apply_regexr_transform, parse_transform_expr, MassEdit, MassEditSpec, OpKind};
use dcflow::query::{answer_to_canonical_text, execute_purpose, Answer};
use dcflow::workflow::{OpSpec, Workflow};
use dcflow::{CellValue, Table};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

type Outcome = Result<String, String>;

const REPLAY_DUMP_ENV: &str = "DCFLOW_ACCEPTANCE_REPLAY_DUMP";

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/suite")
}

fn suite() -> Suite {
    Suite::load(&data_dir().join("suite.json")).expect("bundled suite loads")
}

fn scripted(name: &str, case: &str) -> ScriptedBackend {
    ScriptedBackend::from_path(&data_dir().join("scripts").join(name).join(format!("{case}.json"))).unwrap()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn answer_set(a: &Answer) -> BTreeSet<String> {
    match a {
        Answer::Scalar(c) => BTreeSet::from([c.render()]),
        Answer::ValueList(v) => v.iter().map(CellValue::render).collect(),
        Answer::Records(r) => r.iter().map(|rec| format!("{rec:?}")).collect(),
    }
}

// 1

fn high_risk_fixture() -> Outcome {
    let suite = suite();
    let case = suite.load_case(suite.find("cfi-high-risk").unwrap()).map_err(|e| e.to_string())?;
    let purpose = case.purpose();
    let raw_answer = execute_purpose(&purpose.query, &case.raw).map_err(|e| e.to_string())?;
    let raw_expected: BTreeSet<String> =
        ["SCHOOOL", "RESTUARANT", "school", "GROCRY STORE"].iter().map(|s| s.to_string()).collect();
    check(answer_set(&raw_answer) == raw_expected, || format!("raw answer {raw_answer:?}"))?;

    let start = Instant::now();
    let backend = scripted("high-risk", "cfi-high-risk");
    let out = run_pipeline(&backend, &case.raw, purpose, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let answer = execute_purpose(&purpose.query, &out.final_table).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let want: BTreeSet<String> = ["SCHOOL", "RESTAURANT", "GROCERY STORE"].iter().map(|s| s.to_string()).collect();
    check(answer_set(&answer) == want, || format!("cleaned answer {answer:?}"))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:?}", answer_to_canonical_text(&answer)))
}

// 2

fn per_column_stats(wf: &Workflow) -> BTreeMap<(String, OpKind), usize> {
    let mut m = BTreeMap::new();
    for s in wf.steps() {
        *m.entry((s.column.clone(), s.op)).or_insert(0) += 1;
    }
    m
}

fn busiest_type_run(script: &str) -> Result<Workflow, String> {
    let suite = suite();
    let case = suite.load_case(suite.find("cfi-busiest-type").unwrap()).map_err(|e| e.to_string())?;
    let backend = scripted(script, "cfi-busiest-type");
    let out = run_pipeline(&backend, &case.raw, case.purpose(), &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let replayed = out.workflow.replay(&case.raw).map_err(|e| e.to_string())?.into_final();
    let answer = execute_purpose(&case.purpose().query, &replayed).map_err(|e| e.to_string())?;
    check(
        answer == Answer::ValueList(vec![CellValue::from("RESTAURANT")]),
        || format!("{script}: replay answered {answer:?}"),
    )?;
    Ok(out.workflow)
}

fn busiest_type_fixture() -> Outcome {
    let start = Instant::now();
    let llama = busiest_type_run("llama")?;
    let gemma = busiest_type_run("gemma")?;
    let elapsed = start.elapsed();

    let key = |c: &str, op| (c.to_string(), op);
    let want_llama = BTreeMap::from([
        (key("Facility Type", OpKind::Trim), 1),
        (key("Facility Type", OpKind::MassEdit), 2),
        (key("Inspection ID", OpKind::MassEdit), 1),
        (key("Inspection Date", OpKind::ToDate), 1),
    ]);
    let want_gemma = BTreeMap::from([
        (key("Facility Type", OpKind::MassEdit), 1),
        (key("Inspection Date", OpKind::ToDate), 1),
    ]);
    check(per_column_stats(&llama) == want_llama, || format!("llama stats {:?}", per_column_stats(&llama)))?;
    check(per_column_stats(&gemma) == want_gemma, || format!("gemma stats {:?}", per_column_stats(&gemma)))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("llama {} steps, gemma {} steps, both RESTAURANT, {elapsed:?}", llama.len(), gemma.len()))
}

// 3

fn cell_pool() -> Vec<CellValue> {
    let date = |d| CellValue::Date(Utc.with_ymd_and_hms(2023, 5, d, 0, 0, 0).unwrap());
    let mut pool: Vec<CellValue> = [
        "Restaurant", "RESTAURANT", "restaurant", "School", "school ", "1000", "1000.", "1000.0", "12.5", "12.50",
        "-3", "N/A", "abc", "ABC", "", "2023-05-10T00:00:00Z",
    ]
    .iter()
    .map(|s| CellValue::from(*s))
    .collect();
    pool.extend([
        CellValue::Missing,
        CellValue::Number(Decimal::new(1000, 0)),
        CellValue::Number(Decimal::new(1250, 2)),
        CellValue::Number(Decimal::new(-3, 0)),
        date(10),
        date(11),
    ]);
    pool
}

fn oracle_text(c: &CellValue) -> String {
    match c {
        CellValue::Text(s) => s.clone(),
        CellValue::Number(d) => d.to_string(),
        CellValue::Date(t) => t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        CellValue::Missing => String::new(),
    }
}

fn oracle_delta(t: &CellValue, g: &CellValue) -> f64 {
    match (t, g) {
        (CellValue::Missing, CellValue::Missing) => return 1.0,
        (CellValue::Missing, _) | (_, CellValue::Missing) => return 0.0,
        _ => {}
    }
    let (a, b) = (oracle_text(t), oracle_text(g));
    if let (Ok(x), Ok(y)) = (a.parse::<f64>(), b.parse::<f64>()) {
        if x == y {
            return 1.0;
        }
    }
    if a.to_lowercase() == b.to_lowercase() {
        1.0
    } else {
        0.0
    }
}

fn random_table(rng: &mut ChaCha8Rng, pool: &[CellValue], rows: usize, cols: usize) -> Table {
    let names = (0..cols).map(|j| format!("c{j}")).collect();
    let data = (0..rows).map(|_| (0..cols).map(|_| pool.choose(rng).unwrap().clone()).collect()).collect();
    Table::new(names, data).unwrap()
}

fn column_metric_oracle() -> Outcome {
    let pool = cell_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let rows = rng.gen_range(1..=10);
        let cols = rng.gen_range(1..=6);
        let gold = random_table(&mut rng, &pool, rows, cols);
        let mut pred = gold.clone();
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(0.4) {
                    pred = pred.with_cell(r, c, pool.choose(&mut rng).unwrap().clone());
                }
            }
        }
        let mut targets: Vec<String> = gold.columns().iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        if targets.is_empty() {
            targets.push(gold.columns()[0].clone());
        }
        let mut total = 0.0;
        for t in &targets {
            let j = gold.column_index(t).unwrap();
            let mut per = 0.0;
            for r in 0..rows {
                per += oracle_delta(pred.cell(r, j), gold.cell(r, j));
            }
            total += per / rows as f64;
        }
        let want = total / targets.len() as f64;
        let got = eval_columns(&pred, &gold, &targets).map_err(|e| e.to_string())?.ratio;
        let diff = (got - want).abs();
        worst = worst.max(diff);
        check(diff <= 1e-12, || format!("pair {i}: got {got}, oracle {want}"))?;
    }
    Ok(format!("1000 pairs, max |diff| = {worst:e}"))
}

// 4

/// Tries every block length from longest down, every start in `a`, then
/// every start in `b`; the first hit is the longest, earliest block.
fn exhaustive_matched(a: &[char], b: &[char]) -> usize {
    for len in (1..=a.len().min(b.len())).rev() {
        for i in 0..=a.len() - len {
            for j in 0..=b.len() - len {
                if a[i..i + len] == b[j..j + len] {
                    return len
                        + exhaustive_matched(&a[..i], &b[..j])
                        + exhaustive_matched(&a[i + len..], &b[j + len..]);
                }
            }
        }
    }
    0
}

fn similarity_oracle() -> Outcome {
    check(similarity("abcd", "bcde") == 0.75, || "(abcd, bcde) != 0.75".into())?;
    check(similarity("SCHOOL", "SCHOOL") == 1.0, || "identity != 1".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet: Vec<char> = "abcAB -".chars().collect();
    for i in 0..500 {
        let gen = |rng: &mut ChaCha8Rng| -> String {
            let n = rng.gen_range(0..=20);
            (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
        };
        let (a, b) = (gen(&mut rng), gen(&mut rng));
        // Pairs are compared in lexicographic order.
        let (lo, hi) = if a <= b { (&a, &b) } else { (&b, &a) };
        let (ac, bc): (Vec<char>, Vec<char>) = (lo.chars().collect(), hi.chars().collect());
        let total = ac.len() + bc.len();
        let want = if total == 0 { 1.0 } else { 2.0 * exhaustive_matched(&ac, &bc) as f64 / total as f64 };
        let got = similarity(&a, &b);
        check(got == want, || format!("pair {i} ({a:?}, {b:?}): got {got}, oracle {want}"))?;
    }
    Ok("500 pairs exact, fixed cases ok".into())
}

// 5

fn workflow_metric() -> Outcome {
    let llama = busiest_type_run("llama")?;
    let suite = suite();
    let gold = suite.load_case(suite.find("cfi-busiest-type").unwrap()).map_err(|e| e.to_string())?.silver;

    // Independent transcription of both sequences.
    let ft = "Facility Type";
    let id = "Inspection ID";
    let dt = "Inspection Date";
    let pred_t = [(ft, "trim"), (ft, "mass_edit"), (ft, "mass_edit"), (id, "mass_edit"), (dt, "date")];
    let gold_t = [
        (ft, "trim"), (ft, "upper"), (ft, "mass_edit"), (ft, "mass_edit"), (ft, "mass_edit"),
        (id, "regexr_transform"), (id, "numeric"), (dt, "date"),
    ];
    let pairs = |wf: &Workflow| -> Vec<(String, String)> {
        wf.steps().iter().map(|s| (s.column.clone(), s.op.name().to_string())).collect()
    };
    let own = |t: &[(&str, &str)]| -> Vec<(String, String)> {
        t.iter().map(|(c, o)| (c.to_string(), o.to_string())).collect()
    };
    check(pairs(&llama) == own(&pred_t), || format!("llama workflow {:?}", pairs(&llama)))?;
    check(pairs(&gold) == own(&gold_t), || format!("gold workflow {:?}", pairs(&gold)))?;

    // Multiset intersection by repeated removal.
    let mut remaining = own(&gold_t);
    let mut matched = 0;
    for p in own(&pred_t) {
        if let Some(k) = remaining.iter().position(|g| *g == p) {
            remaining.remove(k);
            matched += 1;
        }
    }
    let p = matched as f64 / pred_t.len() as f64;
    let r = matched as f64 / gold_t.len() as f64;
    let f1 = 2.0 * p * r / (p + r);

    let s = eval_workflow(&llama, &gold);
    check((s.precision - 0.8).abs() < 1e-9 && (s.precision - p).abs() < 1e-12, || format!("P = {}", s.precision))?;
    check((s.recall - 0.5).abs() < 1e-9 && (s.recall - r).abs() < 1e-12, || format!("R = {}", s.recall))?;
    check((s.f1 - 8.0 / 13.0).abs() < 1e-9 && (s.f1 - f1).abs() < 1e-12, || format!("F1 = {}", s.f1))?;
    check(!s.exact, || "exact should be false".into())?;
    Ok(format!("P={} R={} F1={:.9}", s.precision, s.recall, s.f1))
}

// 6

const SNIPPETS: [&str; 4] = [
    "jython: import re\nmatch = re.search(r'\\d+', value)\nif match:\n    return match.group(0)\nreturn value",
    "jython: return value.strip()",
    "jython: import re\nreturn re.sub(r'\\s+', ' ', value)",
    "jython: return value.lower()",
];

const REPLAY_VALUES: [&str; 14] = [
    "Restaurant", " RESTAURANT", "restaurant ", "SCHOOOL", "school", "ID-2345", "#77", "12.50", "1,000",
    "05/10/2023", "May 9, 2023", "2023-05-08", "07:10 AM", "",
];

fn random_workflow_case(rng: &mut ChaCha8Rng) -> (Table, Workflow) {
    let cols = rng.gen_range(1..=4);
    let rows = rng.gen_range(1..=8);
    let names: Vec<String> = (0..cols).map(|j| format!("col {j}")).collect();
    let data: Vec<Vec<CellValue>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| match *REPLAY_VALUES.choose(rng).unwrap() {
                    "" => CellValue::Missing,
                    s => CellValue::from(s),
                })
                .collect()
        })
        .collect();
    let table = Table::new(names.clone(), data).unwrap();
    let n = rng.gen_range(0..=8);
    let steps = (0..n).map(|_| {
        let column = names.choose(rng).unwrap().clone();
        match rng.gen_range(0..6) {
            0 => OpSpec::simple(OpKind::Upper, column),
            1 => OpSpec::simple(OpKind::Trim, column),
            2 => OpSpec::simple(OpKind::ToNumeric, column),
            3 => OpSpec::simple(OpKind::ToDate, column),
            4 => {
                let mut from: Vec<String> = REPLAY_VALUES.choose_multiple(rng, 2).map(|s| s.to_string()).collect();
                from.retain(|s| !s.is_empty());
                from.push("unused".into());
                let to = REPLAY_VALUES.choose(rng).unwrap().to_string();
                let to = if to.is_empty() { "BLANK".to_string() } else { to };
                OpSpec::mass_edit(column, MassEditSpec::new(vec![MassEdit { from, to }]).unwrap())
            }
            _ => OpSpec::regexr(column, *SNIPPETS.choose(rng).unwrap()),
        }
    });
    let wf = Workflow::from_steps("random", steps.collect::<Vec<_>>()).unwrap();
    (table, wf)
}

fn replay_dump() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut out = String::new();
    for i in 0..100 {
        let (table, wf) = random_workflow_case(&mut rng);
        let wf = Workflow::deserialize(wf.serialize().as_bytes()).unwrap();
        let history = wf.replay(&table).unwrap();
        out.push_str(&format!("== case {i}: {} steps ==\n", wf.len()));
        out.push_str(&history.final_table().to_csv());
    }
    out
}

#[test]
fn replay_child() {
    if let Ok(path) = std::env::var(REPLAY_DUMP_ENV) {
        std::fs::write(path, replay_dump()).unwrap();
    }
}

fn replay_determinism() -> Outcome {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let dir = std::env::temp_dir().join(format!("dcflow-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut dumps = Vec::new();
    for k in 0..2 {
        let path = dir.join(format!("replay-{k}.csv"));
        let status = Command::new(&exe)
            .args(["replay_child", "--exact", "--test-threads=1"])
            .env(REPLAY_DUMP_ENV, &path)
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || format!("child {k} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        dumps.push(std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    check(!dumps[0].is_empty(), || "empty dump".into())?;
    check(dumps[0] == dumps[1], || "two processes produced different CSV bytes".into())?;
    check(dumps[0] == replay_dump().into_bytes(), || "child output differs from in-process replay".into())?;
    Ok(format!("100 workflows, {} bytes identical across 2 processes", dumps[0].len()))
}

// 7

fn injection_calibration() -> Outcome {
    let rates = [0.0636, 0.1480, 0.2584, 0.3451, 0.1463, 0.2307];
    let n = 50;
    let columns = vec!["name".to_string(), "amount".to_string(), "city".to_string()];
    let names = ["Hotel Astor", "Union Club", "Delmonico's", "Waldorf Hotel", "Lobster Newburg"];
    let cities = ["CHICAGO", "Boston", "new york", "Dothan"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for (ri, &rate) in rates.iter().enumerate() {
        for t in 0..50 {
            let rows: Vec<Vec<CellValue>> = (0..n)
                .map(|i| {
                    vec![
                        CellValue::from(i.to_string().as_str()),
                        CellValue::from(*names.choose(&mut rng).unwrap()),
                        CellValue::from(format!("{}.{:02}", rng.gen_range(1..500), rng.gen_range(0..100)).as_str()),
                        CellValue::from(*cities.choose(&mut rng).unwrap()),
                    ]
                })
                .collect();
            let table = Table::new(vec!["id".into(), "name".into(), "amount".into(), "city".into()], rows).unwrap();
            let profile = ErrorProfile {
                rate,
                mix: Mix::default(),
                seed: (ri * 1000 + t) as u64,
                columns: columns.clone(),
            };
            let (dirty, log) = inject_errors(&table, &profile).map_err(|e| e.to_string())?;
            let target = rate * (n * columns.len()) as f64;
            let got = log.entries.len() as f64;
            check((got - target).abs() <= 1.0, || format!("rate {rate} table {t}: {got} entries vs {target}"))?;
            check(dirty.columns() == table.columns() && dirty.row_count() == n, || "shape changed".into())?;
            for e in &log.entries {
                let j = table.column_index(&e.column).unwrap();
                check(
                    table.cell(e.row, j) == &e.original && dirty.cell(e.row, j) == &e.corrupted && e.original != e.corrupted,
                    || format!("rate {rate} table {t}: bad entry {e:?}"),
                )?;
            }
            let (dirty2, log2) = inject_errors(&table, &profile).map_err(|e| e.to_string())?;
            check(
                dirty2.to_csv() == dirty.to_csv() && log2 == log,
                || format!("rate {rate} table {t}: same seed gave different output"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} tables of {n} rows, all within one cell, seed-stable"))
}

// 8

fn transform_grammar_gate() -> Outcome {
    let snippet = "jython: import re\nmatch = re.search(r'\\b\\d{4}\\b', value)\nif match:\n    return match.group(0)";
    let expr = parse_transform_expr(snippet).map_err(|e| e.to_string())?;
    let table = Table::new(
        vec!["Year".into()],
        ["Feyerabend,1975,", "Collins,1985", "Stanford,2006"].iter().map(|s| vec![CellValue::from(*s)]).collect(),
    )
    .unwrap();
    let out = apply_regexr_transform(&table, "Year", &expr).map_err(|e| e.to_string())?;
    let years: Vec<String> = out.rows().iter().map(|r| r[0].render()).collect();
    check(years == ["1975", "1985", "2006"], || format!("mapped to {years:?}"))?;

    let bad = [
        "import re\nreturn value",
        "jython:",
        "jython: while True: pass",
        "jython: for c in value: return c",
        "jython: import os\nreturn value",
        "jython: return eval(value)",
        "jython: return __import__('os').system('ls')",
        "jython: return open('/etc/passwd').read()",
        "jython: x = 1\nreturn value",
        "jython: match = re.search(r'(\\d+', value)\nif match: return match.group(0)",
        "jython: match = re.search(r'\\d{4}', value)\nif match: return match.group(1)",
        "jython: return match.group(0)",
        "jython: return value\nreturn value",
        "jython: return value.replace('a', 'b')",
        "jython: return value +",
        "jython: def f(v): return v",
        "jython: match = re.search(r'(?<=a)b', value)\nif match: return match.group(0)",
        "jython: lambda v: v",
        "jython: return value[0:4]",
        "jython: match = re.search(r'\\d', value)",
    ];
    for src in bad {
        check(parse_transform_expr(src).is_err(), || format!("accepted {src:?}"))?;
        let step = OpSpec::regexr("Year", src);
        check(Workflow::from_steps("t", [step.clone()]).is_err(), || format!("workflow accepted {src:?}"))?;
        let rec = Workflow::new("t").record(&table, step);
        check(rec.is_err(), || format!("record accepted {src:?}"))?;
    }
    check(table.rows()[0][0] == CellValue::from("Feyerabend,1975,"), || "input table changed".into())?;
    Ok(format!("Year -> {years:?}, {} bad snippets rejected", bad.len()))
}

// 9

fn suite_self_consistency() -> Outcome {
    let suite = suite();
    let mut topics = BTreeSet::new();
    for entry in &suite.cases {
        let case = suite.load_case(entry).map_err(|e| format!("{}: {e}", entry.id))?;
        let findings = validate_case(&case);
        check(findings.is_empty(), || format!("{}: {findings:?}", entry.id))?;
        let replayed = case.silver.replay(&case.raw).map_err(|e| e.to_string())?.into_final();
        let ratio = eval_columns(&replayed, &case.gold, &case.purpose().target_columns_gold)
            .map_err(|e| e.to_string())?
            .ratio;
        check(ratio == 1.0, || format!("{}: ratio {ratio}", entry.id))?;
        let answer = execute_purpose(&case.purpose().query, &case.gold).map_err(|e| e.to_string())?;
        check(eval_answer(&answer, &case.purpose().gold_answer).f1 == 1.0, || format!("{}: gold answer", entry.id))?;
        topics.insert(entry.topic.clone());
    }
    Ok(format!("{} cases over topics {topics:?}", suite.cases.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("high-risk facility fixture", high_risk_fixture),
        ("busiest facility type scripted runs", busiest_type_fixture),
        ("column metric vs per-cell oracle", column_metric_oracle),
        ("similarity vs exhaustive oracle", similarity_oracle),
        ("workflow overlap metric", workflow_metric),
        ("replay determinism across processes", replay_determinism),
        ("injection calibration", injection_calibration),
        ("transform grammar gate", transform_grammar_gate),
        ("suite self-consistency", suite_self_consistency),
    ];
    // Written to the real stdout so the lines show up without --nocapture.
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout).unwrap();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => writeln!(stdout, "PASS {n:>2} {name}: {detail}").unwrap(),
            Err(detail) => {
                writeln!(stdout, "FAIL {n:>2} {name}: {detail}").unwrap();
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

/// Live smoke run against a configured chat-completion endpoint.
#[test]
#[ignore]
fn live_smoke() {
    let config = HttpConfig::from_env().expect("DCFLOW_LLM_URL must be set");
    let backend = HttpBackend::new(config).unwrap();
    let suite = suite();
    let (mut raw_f1, mut clean_f1) = (0.0, 0.0);
    for entry in &suite.cases {
        let case = suite.load_case(entry).unwrap();
        let out = run_pipeline(&backend, &case.raw, case.purpose(), &PipelineConfig::default()).unwrap();
        assert!(!out.trace.calls.is_empty(), "{}: empty trace", entry.id);
        let score = |t: &Table| {
            execute_purpose(&case.purpose().query, t)
                .map(|a| eval_answer(&a, &case.purpose().gold_answer).f1)
                .unwrap_or(0.0)
        };
        raw_f1 += score(&case.raw);
        clean_f1 += score(&out.final_table);
        println!("{} via {}: {:?}", entry.id, backend.name(), out.status);
    }
    let n = suite.cases.len() as f64;
    println!("answer F1 raw {:.3} cleaned {:.3}", raw_f1 / n, clean_f1 / n);
}
