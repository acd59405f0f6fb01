use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use proofsynth::checker::{self, Checker, EmbeddedChecker, Endpoint, ProofBackend, RemoteChecker};
use proofsynth::corpus::{self, filter_pseudo_theorems, split, Corpus, Subset};
use proofsynth::dataset::{
    build_context_example, build_generation_example, build_repair_dataset, write_examples, Flavor, LengthConfig,
    RepairDatasetOptions,
};
use proofsynth::eval::{self, CurvePoint, EvalCurve, TopicTable};
use proofsynth::generator::{MockConfig, MockGenerator, ProofGenerator, RemoteGenerator, RepairSkill, SamplingParams, Temperature};
use proofsynth::pipeline::{self, AttemptRecord, InputFlavor, Pipeline, PipelineOptions, RunManifest, SkipCause};
use proofsynth::{Rational, Scalar};

use crate::config::{
    config_hash, log_file_name, read_json, sha256_hex, usage, write_json, CheckerConfig, GeneratorConfig, Lengths, Mode,
    RunConfig, Sampling, SplitArtifact, Workspace, EXAMPLES_DIR, RUNS_DIR,
};
use crate::{BuildArgs, CheckerArgs, CheckerKind, Cmd, EvalArgs, FlavorArg, GeneratorArgs, GeneratorKind, IngestArgs, RunArgs, ServeArgs, SplitArgs, TuneOn};

pub fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Ingest(a) => ingest(a),
        Cmd::Split(a) => split_cmd(a),
        Cmd::BuildExamples(a) => build_examples(a),
        Cmd::Run(a) => run(a),
        Cmd::Eval(a) => eval_cmd(a),
        Cmd::ServeChecker(a) => serve_checker(a),
    }
}

#[derive(Serialize)]
struct IngestManifest {
    corpus_id: String,
    files: usize,
    theorems: usize,
    pseudo_theorems_removed: usize,
    topics: BTreeMap<String, BTreeSet<String>>,
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut corpus = corpus::load_corpus(&a.corpus)?;
    // archive paths relative to the manifest so archives do not depend on where the corpus lives
    let base = a.corpus.parent().unwrap_or(Path::new("."));
    for f in &mut corpus.files {
        if let Ok(rel) = Path::new(&f.source_path).strip_prefix(base) {
            f.source_path = rel.display().to_string();
        }
    }
    let topics_path = a.topics.clone().unwrap_or_else(|| base.join("topics.txt"));
    let topics = if a.topics.is_some() || topics_path.exists() { corpus::read_topics(&topics_path)? } else { BTreeMap::new() };
    corpus.assign_topics(&topics);
    let before = corpus.theorems.len();
    if !a.keep_pseudo {
        corpus = filter_pseudo_theorems(&corpus);
    }
    let ws = Workspace::new(&a.out_dir);
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut bytes = serde_json::to_vec(&corpus).expect("corpus serializes");
    bytes.push(b'\n');
    fs::write(ws.corpus_path(), &bytes).with_context(|| format!("writing {}", ws.corpus_path().display()))?;
    let manifest = IngestManifest {
        corpus_id: sha256_hex(&bytes),
        files: corpus.files.len(),
        theorems: corpus.theorems.len(),
        pseudo_theorems_removed: before - corpus.theorems.len(),
        topics,
    };
    write_json(&a.out_dir.join("corpus.manifest.json"), &manifest)?;
    println!(
        "ingested {} files, {} theorems ({} pseudo-theorems removed) -> {}",
        manifest.files,
        manifest.theorems,
        manifest.pseudo_theorems_removed,
        ws.corpus_path().display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SplitManifest {
    split_id: String,
    corpus_id: String,
    spec: corpus::SplitSpec,
    sizes: [usize; 3],
}

fn split_cmd(a: SplitArgs) -> Result<()> {
    let ws = Workspace::new(&a.out_dir);
    let (corpus, corpus_id) = ws.load_corpus()?;
    let spec = corpus::SplitSpec { policy: a.split_policy, fractions: a.fractions, seed: a.seed };
    let s = split(&corpus, &spec)?;
    let artifact = SplitArtifact { corpus_id: corpus_id.clone(), spec, split: s };
    write_json(&ws.split_path(), &artifact)?;
    let (_, split_id) = ws.load_split()?;
    let (tr, va, te) = artifact.split.sizes();
    write_json(&a.out_dir.join("split.manifest.json"), &SplitManifest { split_id, corpus_id, spec, sizes: [tr, va, te] })?;
    println!("split {tr}/{va}/{te} (train/valid/test) -> {}", ws.split_path().display());
    Ok(())
}

fn generator_config(a: &GeneratorArgs) -> Result<GeneratorConfig> {
    Ok(match a.generator {
        GeneratorKind::Mock => {
            for (name, v) in [("--mock-recall", a.mock_recall), ("--mock-fuzzy", a.mock_fuzzy), ("--mock-mutation", a.mock_mutation)] {
                if !(0.0..=1.0).contains(&v) {
                    usage!("{name} must be in [0, 1]");
                }
            }
            if a.mock_recall + a.mock_fuzzy > 1.0 {
                usage!("--mock-recall + --mock-fuzzy must not exceed 1");
            }
            GeneratorConfig::Mock { recall: a.mock_recall, fuzzy: a.mock_fuzzy, mutation_rate: a.mock_mutation, seed: a.mock_seed }
        }
        GeneratorKind::Remote => {
            let Some(url) = a.generator_url.clone() else {
                usage!("--generator remote needs --generator-url (or GENERATOR_URL)");
            };
            let repair_url = a.repair_generator_url.clone().unwrap_or_else(|| url.clone());
            GeneratorConfig::Remote { url, repair_url, timeout_ms: a.generator_timeout_ms }
        }
    })
}

fn checker_config(a: &CheckerArgs) -> Result<CheckerConfig> {
    if a.step_timeout_ms == 0 {
        usage!("--step-timeout-ms must be positive");
    }
    Ok(match a.checker {
        CheckerKind::Embedded => CheckerConfig::Embedded { step_timeout_ms: a.step_timeout_ms, proof_timeout_ms: a.proof_timeout_ms },
        CheckerKind::Remote => {
            let Some(addr) = a.checker_addr.clone() else {
                usage!("--checker remote needs --checker-addr (or CHECKER_ADDR)");
            };
            if let Err(e) = addr.parse::<Endpoint>() {
                usage!("--checker-addr: {e}");
            }
            CheckerConfig::Remote { addr, step_timeout_ms: a.step_timeout_ms }
        }
    })
}

type Generators = (Arc<dyn ProofGenerator>, Arc<dyn ProofGenerator>);

fn build_generators(cfg: &GeneratorConfig, corpus: &Corpus, parallelism: usize) -> Generators {
    match cfg {
        GeneratorConfig::Mock { recall, fuzzy, mutation_rate, seed } => {
            let mock_cfg = MockConfig {
                recall: *recall,
                fuzzy: *fuzzy,
                mutation_rate: *mutation_rate,
                repair: RepairSkill::StepFix,
                seed: *seed,
            };
            let g: Arc<dyn ProofGenerator> = Arc::new(MockGenerator::from_corpus(corpus, &[], mock_cfg));
            (g.clone(), g)
        }
        GeneratorConfig::Remote { url, repair_url, timeout_ms } => {
            let t = Duration::from_millis(*timeout_ms);
            let g: Arc<dyn ProofGenerator> = Arc::new(RemoteGenerator::new(url.clone(), t, parallelism));
            let r: Arc<dyn ProofGenerator> = if repair_url == url {
                g.clone()
            } else {
                Arc::new(RemoteGenerator::new(repair_url.clone(), t, parallelism))
            };
            (g, r)
        }
    }
}

fn build_checker(cfg: &CheckerConfig, parallelism: usize) -> Checker {
    let backend: Arc<dyn ProofBackend> = match cfg {
        CheckerConfig::Embedded { proof_timeout_ms, .. } => {
            let mut e = EmbeddedChecker::new();
            if let Some(ms) = proof_timeout_ms {
                e = e.with_proof_timeout(Duration::from_millis(*ms));
            }
            Arc::new(e)
        }
        CheckerConfig::Remote { addr, .. } => {
            Arc::new(RemoteChecker::new(addr.parse().expect("validated endpoint"), parallelism.max(1)))
        }
    };
    Checker::new(backend)
}

#[derive(Serialize)]
struct ExamplesConfig {
    corpus_id: String,
    split_id: String,
    flavor: Flavor,
    subset: Subset,
    lengths: LengthConfig,
    context_statements: usize,
    repair: Option<(GeneratorConfig, CheckerConfig, u64, u32)>,
}

#[derive(Serialize)]
struct ExamplesManifest {
    config_hash: String,
    flavor: Flavor,
    subset: Subset,
    examples: usize,
    skipped: Vec<String>,
}

fn build_examples(a: BuildArgs) -> Result<()> {
    let flavor = match a.flavor {
        FlavorArg::Generate => Flavor::Generate,
        FlavorArg::Context => Flavor::GenerateWithContext,
        FlavorArg::Repair => Flavor::Repair,
    };
    let defaults = LengthConfig::for_flavor(flavor);
    let lengths = LengthConfig {
        max_input: a.max_input.unwrap_or(defaults.max_input),
        max_target: a.max_target.unwrap_or(defaults.max_target),
    };
    if lengths.max_input == 0 || lengths.max_target == 0 {
        usage!("length limits must be positive");
    }
    let backends = if flavor == Flavor::Repair {
        Some((generator_config(&a.generator)?, checker_config(&a.checker)?))
    } else {
        None
    };
    let ws = Workspace::new(&a.out_dir);
    let (corpus, corpus_id) = ws.load_corpus()?;
    let (split, split_id) = ws.load_split()?;
    let ids = split.split.subset(a.subset);
    let mut skipped = Vec::new();
    let examples = match &backends {
        None => {
            let mut out = Vec::new();
            for id in ids {
                let thm = corpus.theorem(id).ok_or_else(|| anyhow!("split names unknown theorem {id}"))?;
                let ex = match flavor {
                    Flavor::Generate => build_generation_example(thm, &lengths),
                    _ => build_context_example(&corpus, thm, &lengths, a.max_context_statements),
                };
                match ex {
                    Ok(e) => out.push(e),
                    Err(e) => skipped.push(format!("{id}: {e}")),
                }
            }
            out
        }
        Some((gcfg, ccfg)) => {
            let (g, _) = build_generators(gcfg, &corpus, a.parallelism);
            let chk = build_checker(ccfg, a.parallelism);
            let opts = RepairDatasetOptions {
                seed: a.seed,
                max_new_tokens: a.max_new_tokens,
                generation_lengths: LengthConfig::GENERATION,
                repair_lengths: lengths,
                step_timeout_ms: ccfg.step_timeout_ms(),
                parallelism: a.parallelism,
            };
            build_repair_dataset(&corpus, ids, g.as_ref(), &chk, &opts)?
        }
    };
    let cfg = ExamplesConfig {
        corpus_id,
        split_id,
        flavor,
        subset: a.subset,
        lengths,
        context_statements: a.max_context_statements,
        repair: backends.map(|(g, c)| (g, c, a.seed, a.max_new_tokens)),
    };
    let stem = format!("{}.{}", flavor_slug(flavor), a.subset);
    let dir = a.out_dir.join(EXAMPLES_DIR);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{stem}.jsonl"));
    write_examples(&path, &examples)?;
    let manifest = ExamplesManifest { config_hash: config_hash(&cfg), flavor, subset: a.subset, examples: examples.len(), skipped };
    write_json(&dir.join(format!("{stem}.manifest.json")), &manifest)?;
    println!("{} {} examples ({} skipped) -> {}", examples.len(), stem, manifest.skipped.len(), path.display());
    Ok(())
}

fn flavor_slug(f: Flavor) -> &'static str {
    match f {
        Flavor::Generate => "generate",
        Flavor::GenerateWithContext => "context",
        Flavor::Repair => "repair",
    }
}

fn default_run_name(a: &RunArgs) -> String {
    match a.mode {
        Mode::Generate => format!("generate-n{}", a.n_samples),
        Mode::GenerateContext => format!("context-n{}", a.n_samples),
        Mode::GenerateRepair if a.no_error_message => format!("repair-nomsg-n{}", a.n_samples),
        Mode::GenerateRepair => format!("repair-n{}", a.n_samples),
        Mode::IteratedRepair if a.no_error_message => format!("iterated-nomsg-r{}", a.rounds),
        Mode::IteratedRepair => format!("iterated-r{}", a.rounds),
    }
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() || name.starts_with('.') || !name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '+')) {
        usage!("run name `{name}` must use only letters, digits, `-`, `_`, `.`, `+`");
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    // flag validation first
    if a.n_samples == 0 {
        usage!("--n-samples must be positive");
    }
    if a.parallelism == 0 {
        usage!("--parallelism must be positive");
    }
    let temperatures: Vec<Temperature> = match (&a.temperature, &a.temperature_grid) {
        (Some(_), Some(_)) => usage!("--temperature and --temperature-grid are mutually exclusive"),
        (Some(t), None) => vec![*t],
        (None, Some(grid)) => grid.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        (None, None) => vec![Temperature::ZERO],
    };
    if temperatures.is_empty() {
        usage!("--temperature-grid is empty");
    }
    if a.mode == Mode::IteratedRepair {
        if a.rounds == 0 {
            usage!("--rounds must be at least 1");
        }
        if a.n_samples != 1 || temperatures != [Temperature::ZERO] {
            usage!("iterated-repair samples once at temperature 0; drop --n-samples/--temperature");
        }
    }
    if a.subsets.is_empty() {
        usage!("--subsets is empty");
    }
    let name = a.name.clone().unwrap_or_else(|| default_run_name(&a));
    validate_name(&name)?;
    let generator = generator_config(&a.generator)?;
    let checker_cfg = checker_config(&a.checker)?;

    let ws = Workspace::new(&a.out_dir);
    let (corpus, corpus_id) = ws.load_corpus()?;
    let (split, split_id) = ws.load_split()?;
    if split.corpus_id != corpus_id {
        bail!("{} was made from a different corpus archive; re-run `split`", ws.split_path().display());
    }
    let mut subsets = Vec::new();
    for s in &a.subsets {
        if !subsets.contains(s) {
            subsets.push(*s);
        }
    }
    let ids: Vec<String> = subsets.iter().flat_map(|s| split.split.subset(*s).iter().cloned()).collect();
    let config = RunConfig {
        corpus_id,
        split_id: split_id.clone(),
        split: split.spec,
        mode: a.mode,
        subsets: subsets.clone(),
        lengths: Lengths {
            generate: LengthConfig::GENERATION,
            repair: LengthConfig::REPAIR,
            context_statements: a.max_context_statements,
        },
        sampling: Sampling {
            n_samples: a.n_samples,
            temperatures: temperatures.clone(),
            top_k: a.top_k,
            max_new_tokens: a.max_new_tokens,
            seed: a.seed,
        },
        rounds: if a.mode == Mode::IteratedRepair { a.rounds } else { u32::from(a.mode == Mode::GenerateRepair) },
        short_circuit: a.short_circuit,
        error_message: !a.no_error_message,
        repair_temperature: a.repair_temperature,
        checker: checker_cfg.clone(),
        generator: generator.clone(),
    };
    let hash = config_hash(&config);

    let (gen, rep) = build_generators(&generator, &corpus, a.parallelism);
    let chk = build_checker(&checker_cfg, a.parallelism);
    let opts = PipelineOptions {
        flavor: if a.mode == Mode::GenerateContext { InputFlavor::GenerateWithContext } else { InputFlavor::Generate },
        generation_lengths: config.lengths.generate,
        repair_lengths: config.lengths.repair,
        context_statements: a.max_context_statements,
        short_circuit: a.short_circuit,
        error_message: !a.no_error_message,
        repair_temperature: a.repair_temperature,
        step_timeout_ms: checker_cfg.step_timeout_ms(),
        parallelism: a.parallelism,
    };
    let p = Pipeline::new(&corpus, gen.as_ref(), &chk).with_repairer(rep.as_ref()).with_options(opts);
    let thms = p.theorems(&ids);

    let dir = ws.run_dir(&name);
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), &config)?;
    let (mut records, mut skips, mut backend_failures) = (0, 0, 0);
    for &t in &temperatures {
        let params = SamplingParams { n_samples: a.n_samples, temperature: t, top_k: a.top_k, max_new_tokens: a.max_new_tokens, seed: a.seed };
        let log = match a.mode {
            Mode::Generate | Mode::GenerateContext => p.run_generate(&thms, &params),
            Mode::GenerateRepair => p.generate_and_repair(&thms, &params),
            Mode::IteratedRepair => p.iterated_repair(&thms, a.seed, a.top_k, a.max_new_tokens, a.rounds)?,
        };
        records += pipeline::attempts(&log).count();
        skips += pipeline::skips(&log).count();
        backend_failures += pipeline::skips(&log).filter(|s| s.cause == SkipCause::Backend).count();
        pipeline::write_log(&dir.join(log_file_name(t)), &log)?;
    }
    let manifest = RunManifest {
        config_hash: hash,
        mode: a.mode.as_str().to_string(),
        split_id,
        seeds: vec![a.seed],
        temperatures,
        generator: gen.id(),
        repair_generator: matches!(a.mode, Mode::GenerateRepair | Mode::IteratedRepair).then(|| rep.id()),
        checker: chk.backend_id(),
        records,
        skips,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    if backend_failures > 0 {
        bail!("{backend_failures} backend failures during run {name}; see skip entries in {}", dir.display());
    }
    println!("run {name}: {} theorems, {records} records, {skips} skipped -> {}", thms.len(), dir.display());
    Ok(())
}

struct LoadedRun {
    name: String,
    config: RunConfig,
    logs: BTreeMap<Temperature, Vec<AttemptRecord>>,
}

fn load_run(ws: &Workspace, name: &str) -> Result<LoadedRun> {
    let dir = ws.run_dir(name);
    let config: RunConfig = read_json(&dir.join("config.json")).with_context(|| format!("run {name}"))?;
    let mut logs = BTreeMap::new();
    for &t in &config.sampling.temperatures {
        let log = pipeline::read_log(&dir.join(log_file_name(t)))?;
        logs.insert(t, pipeline::attempts(&log).cloned().collect());
    }
    Ok(LoadedRun { name: name.to_string(), config, logs })
}

fn default_budgets(n: u32) -> Vec<u64> {
    let n = u64::from(n);
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |b| Some(b * 2)).take_while(|&b| b < n).collect();
    out.push(n);
    out
}

struct Evaluated<S> {
    curve: EvalCurve<S>,
    proven: BTreeSet<String>,
    table: TopicTable<S>,
}

fn evaluate_run<S: Scalar>(
    run: &LoadedRun,
    budgets: &[u64],
    tune: &BTreeSet<String>,
    test: &BTreeSet<String>,
    topics: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Evaluated<S>> {
    let (curve, t, proven) = match run.config.mode {
        Mode::Generate | Mode::GenerateContext => {
            let budgets = if budgets.is_empty() { default_budgets(run.config.sampling.n_samples) } else { budgets.to_vec() };
            let curve: EvalCurve<S> = eval::curve_tuned(&run.name, &run.logs, tune, &run.logs, test, &budgets)
                .with_context(|| format!("run {}", run.name))?;
            let last = curve.points.last().expect("budgets are non-empty");
            let t = last.temperature;
            let max_b = *budgets.last().expect("budgets are non-empty");
            let proven = eval::proven_within(&run.logs[&t], test, max_b, t)?;
            (curve, t, proven)
        }
        Mode::GenerateRepair | Mode::IteratedRepair => {
            let aligned = match run.config.mode {
                Mode::GenerateRepair => 2 * u64::from(run.config.sampling.n_samples),
                _ => 1 + u64::from(run.config.rounds),
            };
            let mut best: Option<(usize, Temperature)> = None;
            for (&t, recs) in &run.logs {
                let n = eval::proven_set(recs, tune).len();
                if best.is_none_or(|(m, _)| n > m) {
                    best = Some((n, t));
                }
            }
            let (_, t) = best.ok_or_else(|| anyhow!("run {} has no logs", run.name))?;
            let point: CurvePoint<S> = eval::aligned_point(&run.logs[&t], test, aligned, t);
            let proven = eval::proven_set(&run.logs[&t], test);
            (EvalCurve { label: run.name.clone(), points: vec![point] }, t, proven)
        }
    };
    let table = eval::topic_breakdown(&run.name, run.logs[&t].iter().filter(|r| proven.contains(&r.theorem_id)), test, topics);
    Ok(Evaluated { curve, proven, table })
}

#[derive(Serialize)]
struct ReportManifest {
    corpus_id: String,
    split_id: String,
    tune_on: &'static str,
    exact: bool,
    runs: Vec<(String, String)>,
    files: Vec<String>,
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    if a.budgets.first() == Some(&0) || a.budgets.windows(2).any(|w| w[0] >= w[1]) {
        usage!("--budgets must be positive and strictly increasing");
    }
    let ws = Workspace::new(&a.out_dir);
    let (corpus, corpus_id) = ws.load_corpus()?;
    let (split, split_id) = ws.load_split()?;
    let names: Vec<String> = if a.runs.is_empty() {
        let dir = a.out_dir.join(RUNS_DIR);
        let mut v: Vec<String> = fs::read_dir(&dir)
            .with_context(|| format!("reading {} (run `run` first)", dir.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("config.json").exists())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    } else {
        a.runs.clone()
    };
    if names.is_empty() {
        bail!("no runs under {}", a.out_dir.join(RUNS_DIR).display());
    }
    let test: BTreeSet<String> = split.split.test.iter().cloned().collect();
    let tune: BTreeSet<String> = match a.tune_on {
        TuneOn::Test => test.clone(),
        TuneOn::Valid => {
            if split.split.valid.is_empty() {
                usage!("the validation subset is empty; use --tune-on test");
            }
            split.split.valid.iter().cloned().collect()
        }
    };
    let mut runs = Vec::new();
    for n in &names {
        let r = load_run(&ws, n)?;
        if r.config.split_id != split_id {
            bail!("run {n} was made with a different split; re-run it");
        }
        let covers = |s: Subset| r.config.subsets.contains(&s);
        if !covers(Subset::Test) {
            bail!("run {n} did not cover the test subset");
        }
        if a.tune_on == TuneOn::Valid && !covers(Subset::Valid) {
            bail!("run {n} did not cover the valid subset; re-run with --subsets valid,test or use --tune-on test");
        }
        runs.push(r);
    }
    let report_dir = a.report_dir.clone().unwrap_or_else(|| a.out_dir.join("report"));
    let topics = corpus.topic_map();
    let files = if a.exact {
        write_report::<Rational>(&runs, &a, &tune, &test, &topics, &report_dir)?
    } else {
        write_report::<f64>(&runs, &a, &tune, &test, &topics, &report_dir)?
    };
    let manifest = ReportManifest {
        corpus_id,
        split_id,
        tune_on: match a.tune_on {
            TuneOn::Valid => "valid",
            TuneOn::Test => "test",
        },
        exact: a.exact,
        runs: runs.iter().map(|r| (r.name.clone(), config_hash(&r.config))).collect(),
        files: files.iter().filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect(),
    };
    write_json(&report_dir.join("manifest.json"), &manifest)?;
    print!("{}", fs::read_to_string(report_dir.join("summary.txt")).unwrap_or_default());
    Ok(())
}

fn write_report<S: Scalar>(
    runs: &[LoadedRun],
    a: &EvalArgs,
    tune: &BTreeSet<String>,
    test: &BTreeSet<String>,
    topics: &BTreeMap<String, BTreeSet<String>>,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    let mut curves = Vec::new();
    let mut tables = Vec::new();
    let mut members = Vec::new();
    for r in runs {
        let e = evaluate_run::<S>(r, &a.budgets, tune, test, topics)?;
        curves.push(e.curve);
        tables.push(e.table);
        members.push((r.name.clone(), e.proven));
    }
    let ensembles = if a.ensemble && members.len() > 1 { vec![eval::ensemble::<S>(&members, test)] } else { vec![] };
    Ok(eval::report(&curves, &ensembles, &tables, test.len(), dir)?)
}

fn serve_checker(a: ServeArgs) -> Result<()> {
    let mut backend = EmbeddedChecker::new();
    if let Some(ms) = a.step_latency_ms {
        backend = backend.with_step_latency(Duration::from_millis(ms));
    }
    if a.stdio {
        let stdin = io::stdin();
        checker::serve_connection(&backend, BufReader::new(stdin.lock()), io::stdout().lock())?;
        return Ok(());
    }
    let addr = a.listen.expect("clap requires --listen without --stdio");
    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    eprintln!("serving checker on {}", listener.local_addr()?);
    checker::serve_tcp(listener, Arc::new(backend))?;
    Ok(())
}
