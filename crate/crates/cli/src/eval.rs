use anyhow::Result;
use dcflow::benchmark::{Case, Suite};
use dcflow::evaluation::{aggregate, score_case, CaseScores, MatchGranularity};
use dcflow::workflow::Workflow;
use rayon::prelude::*;
use serde_json::json;

use crate::io::{read_table, write_atomic, write_json};
use crate::{EvalArgs, Granularity, Outcome};

enum CaseResult {
    Scored { system: CaseScores, baseline: Option<CaseScores> },
    Skipped(String),
}

fn score(args: &EvalArgs, case: &Case, granularity: MatchGranularity) -> Result<CaseResult> {
    let dir = args.results.join(&case.id);
    let table_path = dir.join("cleaned.csv");
    let wf_path = dir.join("workflow.json");
    for p in [&table_path, &wf_path] {
        if !p.exists() {
            return Ok(CaseResult::Skipped(format!("missing result file {}", p.display())));
        }
    }
    let pred = read_table(&table_path)?;
    let wf = Workflow::deserialize(&std::fs::read(&wf_path)?)?;
    let system = score_case(
        &case.id,
        &case.topic,
        case.purpose(),
        &case.gold,
        &pred,
        Some((&wf, &case.silver)),
        granularity,
    )?;
    let baseline = if args.no_baseline {
        None
    } else {
        Some(score_case(&case.id, &case.topic, case.purpose(), &case.gold, &case.raw, None, granularity)?)
    };
    Ok(CaseResult::Scored { system, baseline })
}

pub fn run(args: &EvalArgs) -> Result<Outcome> {
    let suite = Suite::load(&args.suite)?;
    let granularity = match args.granularity {
        Granularity::ColumnAndOp => MatchGranularity::ColumnAndOp,
        Granularity::OpOnly => MatchGranularity::OpOnly,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<(String, Result<CaseResult>)> = pool.install(|| {
        suite
            .cases
            .par_iter()
            .map(|entry| {
                let r = suite
                    .load_case(entry)
                    .map_err(anyhow::Error::from)
                    .and_then(|case| score(args, &case, granularity));
                (entry.id.clone(), r)
            })
            .collect()
    });
    let mut cases = Vec::new();
    let mut baseline = Vec::new();
    let mut findings = Vec::new();
    for (id, r) in results {
        match r {
            Ok(CaseResult::Scored { system, baseline: b }) => {
                cases.push(system);
                baseline.extend(b);
            }
            Ok(CaseResult::Skipped(msg)) => findings.push(json!({"case_id": id, "finding": msg})),
            Err(e) => findings.push(json!({"case_id": id, "finding": format!("{e:#}")})),
        }
    }
    for f in &findings {
        eprintln!("skipped {}: {}", f["case_id"].as_str().unwrap_or(""), f["finding"].as_str().unwrap_or(""));
    }
    let report = aggregate(cases, baseline, &args.label)?;
    let text = report.to_text_table();
    write_json(
        &args.out.join("report.json"),
        &json!({ "report": report, "findings": findings }),
    )?;
    write_atomic(&args.out.join("report.txt"), text.as_bytes())?;
    write_atomic(&args.out.join("cases.csv"), report.cases_csv().as_bytes())?;
    write_atomic(&args.out.join("op_stats.csv"), report.op_stats_csv().as_bytes())?;
    print!("{text}");
    Ok(if findings.is_empty() { Outcome::Ok } else { Outcome::Degraded })
}
