use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dcflow::agent::{
    run_direct, run_pipeline, CompletionBackend, HttpBackend, HttpConfig, PipelineConfig, RunStatus, ScriptedBackend,
    Templates,
};
use dcflow::benchmark::{Case, Suite};
use dcflow::query::execute_purpose;
use rayon::prelude::*;
use serde_json::json;

use crate::io::{read_table, write_atomic, write_json};
use crate::{BackendKind, CleanArgs, Mode, Outcome};

fn pipeline_config(args: &CleanArgs) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    if let Some(n) = args.max_iters {
        config.max_iters_per_column = n;
    }
    if let Some(n) = args.sample_size {
        config.sample_size = n;
    }
    if let Some(dir) = &args.templates {
        config.templates =
            Templates::from_dir(dir).with_context(|| format!("reading templates from {}", dir.display()))?;
    }
    config.validate()?;
    Ok(config)
}

enum BackendSource {
    Http(Arc<HttpBackend>),
    ScriptFile(std::path::PathBuf),
    ScriptDir(std::path::PathBuf),
}

impl BackendSource {
    fn from_args(args: &CleanArgs) -> Result<Self> {
        match args.backend {
            BackendKind::Http => {
                let cfg = HttpConfig::from_env().context("http backend configuration")?;
                Ok(BackendSource::Http(Arc::new(HttpBackend::new(cfg)?)))
            }
            BackendKind::Scripted => {
                let Some(path) = &args.script else {
                    bail!("configuration error: the scripted backend requires --script");
                };
                if path.is_dir() {
                    Ok(BackendSource::ScriptDir(path.clone()))
                } else if path.is_file() {
                    Ok(BackendSource::ScriptFile(path.clone()))
                } else {
                    bail!("configuration error: script {} does not exist", path.display())
                }
            }
        }
    }

    fn for_case(&self, id: &str) -> Result<Box<dyn CompletionBackend>> {
        Ok(match self {
            BackendSource::Http(b) => Box::new(SharedHttp(Arc::clone(b))),
            BackendSource::ScriptFile(p) => Box::new(ScriptedBackend::from_path(p)?),
            BackendSource::ScriptDir(d) => Box::new(ScriptedBackend::from_path(&d.join(format!("{id}.json")))?),
        })
    }
}

struct SharedHttp(Arc<HttpBackend>);

impl CompletionBackend for SharedHttp {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn complete(
        &self,
        request: &dcflow::agent::CompletionRequest<'_>,
    ) -> Result<String, dcflow::agent::BackendError> {
        self.0.complete(request)
    }
}

pub fn run(args: &CleanArgs) -> Result<Outcome> {
    let config = pipeline_config(args)?;
    let source = BackendSource::from_args(args)?;
    let suite = Suite::load(&args.suite)?;
    let entries: Vec<_> = if args.cases.is_empty() {
        suite.cases.iter().collect()
    } else {
        args.cases
            .iter()
            .map(|id| suite.find(id).with_context(|| format!("no case {id:?} in suite")))
            .collect::<Result<_>>()?
    };
    if args.table.is_some() && entries.len() != 1 {
        bail!("--table needs exactly one --case");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let outcomes: Vec<(String, Result<Outcome>)> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let result = suite
                    .load_case(entry)
                    .map_err(anyhow::Error::from)
                    .and_then(|case| clean_case(args, &config, &source, &case));
                (entry.id.clone(), result)
            })
            .collect()
    });
    let mut worst = Outcome::Ok;
    for (id, result) in outcomes {
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                eprintln!("{id}: error: {e:#}");
                Outcome::Failed
            }
        };
        worst = worst.max(outcome);
    }
    Ok(worst)
}

fn clean_case(args: &CleanArgs, config: &PipelineConfig, source: &BackendSource, case: &Case) -> Result<Outcome> {
    let backend = source.for_case(&case.id)?;
    let table = match &args.table {
        Some(p) => read_table(p)?,
        None => case.raw.clone(),
    };
    let output = match args.mode {
        Mode::Iterative => run_pipeline(backend.as_ref(), &table, case.purpose(), config)?,
        Mode::Direct => run_direct(backend.as_ref(), &table, case.purpose(), config)?,
    };
    let dir = args.out.join(&case.id);
    write_atomic(&dir.join("workflow.json"), output.workflow.serialize().as_bytes())?;
    write_atomic(&dir.join("cleaned.csv"), output.final_table.to_csv().as_bytes())?;
    write_atomic(&dir.join("trace.jsonl"), output.trace.calls_jsonl().as_bytes())?;
    if args.history {
        write_history(&dir.join("history"), &output.workflow, &table)?;
    }
    let answer = execute_purpose(&case.purpose().query, &output.final_table)
        .map(|a| a.to_json())
        .unwrap_or_else(|e| json!({ "error": e.to_string() }));
    let run = json!({
        "case_id": case.id,
        "backend": backend.name(),
        "mode": format!("{:?}", args.mode).to_lowercase(),
        "seed": args.seed,
        "status": output.status,
        "target_columns": output.target_columns,
        "steps": output.workflow.len(),
        "backend_calls": output.trace.calls.len(),
        "errors": output.errors.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "events": output.trace.events,
        "answer": answer,
        "config": {
            "max_iters_per_column": config.max_iters_per_column,
            "sample_size": config.sample_size,
            "max_retries_per_call": config.max_retries_per_call,
        },
    });
    write_json(&dir.join("run.json"), &run)?;
    let outcome = match output.status {
        RunStatus::Completed => Outcome::Ok,
        RunStatus::Degraded => Outcome::Degraded,
        RunStatus::Aborted => Outcome::Failed,
    };
    let status = format!("{:?}", output.status).to_lowercase();
    println!("{}: {status}, {} steps", case.id, output.workflow.len());
    for e in &output.errors {
        eprintln!("{}: {e}", case.id);
    }
    Ok(outcome)
}

fn write_history(dir: &Path, workflow: &dcflow::workflow::Workflow, table: &dcflow::Table) -> Result<()> {
    let hist = workflow.replay(table)?;
    for (i, t) in hist.tables.iter().enumerate() {
        write_atomic(&dir.join(format!("step_{i:03}.csv")), t.to_csv().as_bytes())?;
    }
    Ok(())
}
