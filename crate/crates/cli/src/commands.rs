use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use temprel::io::{
    load_constraints, read_json, to_json_string, trace_jsonl, ConstraintFile, Corpus, CountsFile, PredictionFile,
    SolverConfig,
};
use temprel::lr::{constraint_gaps, inner_map, solve, HyperParams, MultiplierState, Scope};
use temprel::metrics::{
    corpus_micro, corpus_tempeval, flatten, gap_report, gold_vector, mcnemar, render_breakdown, render_gap_report,
    ClosureRules, McNemar, MicroReport, TempEvalScore,
};
use temprel::oracle::{brute_constrained, brute_lagrangian, raw_objective, satisfies_bands};
use temprel::select::{
    greedy_select, kept_constraints, stability_filter, GreedyStep, StabilityOptions, StabilityVerdict,
};
use temprel::stats::{
    candidate_constraints_by_threshold, count_triplets, default_triplets, rank_type_pairs, LabelSource, Triplet,
    TripletCounts,
};
use temprel::synth::{calibrate_bias, generate, GeneratorSpec};
use temprel::{Assignment, Constraint, Instance, LabelSet};

use crate::scenario::planted_spec;
use crate::{Cli, Command, Metric, Mode, Outcome};

pub fn run(cli: &Cli) -> Result<Outcome> {
    let ctx = RunContext::new(cli)?;
    match &cli.command {
        Command::Stats { corpus, pred, .. } => stats(&ctx, corpus, *pred),
        Command::Select { train, dev, mode } => select(&ctx, train, dev, *mode),
        Command::Infer { corpus, constraints } => infer(&ctx, corpus, constraints),
        Command::Verify {
            corpus,
            constraints,
            max_pairs,
        } => verify(&ctx, corpus, constraints, *max_pairs),
        Command::Eval {
            gold,
            pred,
            pred_b,
            metric,
            rules,
        } => eval(&ctx, gold, pred, pred_b.as_deref(), *metric, rules.as_deref()),
        Command::Synth { spec } => synth(&ctx, spec),
        Command::Pipeline { spec, target_gap } => pipeline(&ctx, spec.as_deref(), *target_gap),
    }
}

/// Settings shared by every command.
struct RunContext {
    config: SolverConfig,
    config_path: Option<PathBuf>,
    out_dir: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

impl RunContext {
    fn new(cli: &Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(p) => SolverConfig::load(p).with_context(|| format!("config {}", p.display()))?,
            // the pipeline scenario solves the test split as one batch
            None if matches!(cli.command, Command::Pipeline { .. }) => SolverConfig {
                scope: Scope::Corpus,
                ..SolverConfig::default()
            },
            None => SolverConfig::default(),
        };
        Ok(Self {
            config,
            config_path: cli.config.clone(),
            out_dir: cli.out_dir.clone(),
            seed: cli.seed,
            quiet: cli.quiet,
        })
    }

    fn hyper(&self) -> Result<HyperParams> {
        Ok(self.config.hyper()?)
    }

    fn say(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json_string(value)?)
    }

    fn manifest(&self, command: &str, inputs: &[&Path], constraints: Option<&Path>) -> Result<()> {
        let manifest = RunManifest {
            command,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config: self.config_path.as_ref().map(|p| p.display().to_string()),
            constraints: constraints.map(|p| p.display().to_string()),
            out_dir: self.out_dir.display().to_string(),
            scope: self.config.scope,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
        };
        self.write_json(&format!("{command}.manifest.json"), &manifest)
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    inputs: Vec<String>,
    config: Option<String>,
    constraints: Option<String>,
    out_dir: String,
    scope: Scope,
    seed: Option<u64>,
    version: &'a str,
}

/// Loads a corpus and rejects it when any instance is malformed.
fn load_corpus(path: &Path) -> Result<Corpus> {
    let corpus = Corpus::load(path).with_context(|| format!("corpus {}", path.display()))?;
    let violations = corpus.violations();
    if !violations.is_empty() {
        let mut msg = format!("{}: {} invalid entries", path.display(), violations.len());
        for (doc, v) in violations.iter().take(10) {
            match v.pair {
                Some(i) => msg.push_str(&format!("\n  document `{doc}`, pair {i}, {}: {}", v.field, v.reason)),
                None => msg.push_str(&format!("\n  document `{doc}`, {}: {}", v.field, v.reason)),
            }
        }
        bail!(msg);
    }
    Ok(corpus)
}

fn load_predictions(path: &Path, corpus: &Corpus) -> Result<Vec<Assignment>> {
    let file: PredictionFile = read_json(path).with_context(|| format!("predictions {}", path.display()))?;
    file.align(corpus)
        .with_context(|| format!("aligning {} with the gold corpus", path.display()))
}

fn baseline(instances: &[Instance]) -> Vec<Assignment> {
    instances.iter().map(Instance::baseline).collect()
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Ranked type-pair table with count and share of all pairs, then per-label
/// priors within each pair.
fn render_counts(counts: &TripletCounts, labels: &LabelSet) -> String {
    let total = counts.total_pairs();
    let ranked = rank_type_pairs(counts, total);
    let w = ranked
        .iter()
        .map(|p| p.source_type.len() + p.target_type.len() + 2)
        .max()
        .unwrap_or(0)
        .max("type pair".len());
    let mut out = format!("{:<w$} {:>7} {:>6}\n", "type pair", "count", "%");
    for p in &ranked {
        out.push_str(&format!(
            "{:<w$} {:>7} {:>6}\n",
            format!("{}, {}", p.source_type, p.target_type),
            p.count,
            pct(p.share)
        ));
    }
    out.push_str(&format!("{:<w$} {:>7}\n\n", "total", total));
    for p in &ranked {
        let probs: Vec<String> = (0..labels.len())
            .map(|r| {
                let c = counts.triplet_count(&Triplet::new(p.source_type.clone(), p.target_type.clone(), r));
                format!("{} {:.3}", labels.name(r), c as f64 / p.count as f64)
            })
            .collect();
        out.push_str(&format!("{}, {}: {}\n", p.source_type, p.target_type, probs.join("  ")));
    }
    out
}

fn stats(ctx: &RunContext, path: &Path, predicted: bool) -> Result<Outcome> {
    let corpus = load_corpus(path)?;
    let source = if predicted {
        LabelSource::Predicted
    } else {
        LabelSource::Gold
    };
    ctx.manifest("stats", &[path], None)?;
    let counts = count_triplets(&corpus.instances, source)?;
    if counts.is_empty() {
        eprintln!("warning: {} contains no pairs; writing empty counts", path.display());
    }
    ctx.write_json("counts.json", &CountsFile::new(&counts, &corpus.labels))?;
    let table = render_counts(&counts, &corpus.labels);
    ctx.write("stats.txt", &table)?;
    ctx.say(&table);
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct GreedyReport<'a> {
    mode: &'static str,
    default_relation: &'a str,
    candidates: Vec<String>,
    baseline_f1: f64,
    best_f1: f64,
    steps: &'a [GreedyStep],
}

#[derive(Serialize)]
struct StabilityReport<'a> {
    mode: &'static str,
    default_relation: &'a str,
    verdicts: &'a [StabilityVerdict],
}

/// Relation used for candidate triplets.
fn default_relation(config: &SolverConfig, labels: &LabelSet, train: &TripletCounts) -> Result<usize> {
    if let Some(name) = &config.selection.default_relation {
        return Ok(labels.require(name)?);
    }
    if let Some(v) = labels.index_of("vague") {
        return Ok(v);
    }
    let mut totals = vec![0u64; labels.len()];
    for (t, &c) in &train.triplet_counts {
        totals[t.relation] += c;
    }
    // most frequent, lowest index on ties
    let mut best = 0;
    for (r, &c) in totals.iter().enumerate() {
        if c > totals[best] {
            best = r;
        }
    }
    Ok(best)
}

/// Dev micro F1 under `constraints`, optionally maximized over the grid.
fn dev_f1(config: &SolverConfig, dev: &Corpus, constraints: &[Constraint]) -> temprel::Result<f64> {
    let hyper = config.hyper()?;
    let single = |h: &HyperParams, cs: &[Constraint]| -> temprel::Result<f64> {
        let sol = solve(&dev.instances, cs, h, config.scope)?;
        Ok(corpus_micro(&dev.instances, &sol.assignments, &dev.labels)?.f1)
    };
    match (&config.selection.grid, config.selection.regrid) {
        (Some(grid), true) => {
            let mut best = f64::NEG_INFINITY;
            for &a in &grid.alpha {
                for &g in &grid.gamma {
                    for &t in &grid.theta {
                        let h = HyperParams::new(a, g, t, hyper.max_iter())?;
                        let cs: Vec<Constraint> = constraints
                            .iter()
                            .map(|c| Constraint::new(c.triplet.clone(), c.p_star, Some(t)))
                            .collect::<temprel::Result<_>>()?;
                        best = best.max(single(&h, &cs)?);
                    }
                }
            }
            Ok(best)
        }
        _ => single(&hyper, constraints),
    }
}

struct Selection {
    constraints: Vec<Constraint>,
    report: String,
}

fn greedy(config: &SolverConfig, train: &Corpus, dev: &Corpus) -> Result<Selection> {
    let train_counts = count_triplets(&train.instances, LabelSource::Gold)?;
    let dev_counts = count_triplets(&dev.instances, LabelSource::Predicted)?;
    let relation = default_relation(config, &train.labels, &train_counts)?;
    let ranked = candidate_constraints_by_threshold(&dev_counts, dev_counts.total_pairs(), config.selection.threshold);
    let pairs: Vec<_> = ranked.iter().map(|p| p.type_pair()).collect();
    let candidates = default_triplets(pairs.iter(), relation);
    let hyper = config.hyper()?;
    let outcome = greedy_select(&candidates, &train_counts, &hyper, |cs| dev_f1(config, dev, cs))?;
    let report = GreedyReport {
        mode: "greedy",
        default_relation: train.labels.name(relation),
        candidates: candidates.iter().map(|t| t.describe(&train.labels)).collect(),
        baseline_f1: outcome.baseline_f1,
        best_f1: outcome.best_f1,
        steps: &outcome.steps,
    };
    Ok(Selection {
        report: to_json_string(&report)?,
        constraints: outcome.selected,
    })
}

fn stability(config: &SolverConfig, train: &Corpus, dev: &Corpus, seed: Option<u64>) -> Result<Selection> {
    let train_counts = count_triplets(&train.instances, LabelSource::Gold)?;
    let dev_counts = count_triplets(&dev.instances, LabelSource::Predicted)?;
    let relation = default_relation(config, &train.labels, &train_counts)?;
    let ranked = candidate_constraints_by_threshold(&dev_counts, dev_counts.total_pairs(), config.selection.threshold);
    let pairs: Vec<_> = ranked.iter().map(|p| p.type_pair()).collect();
    let candidates = default_triplets(pairs.iter(), relation);
    let sel = &config.selection;
    let options = StabilityOptions {
        splits: sel.splits,
        stability_tol: sel.stability_tol,
        gap_min: sel.gap_min,
        seed: seed.unwrap_or(sel.split_seed),
    };
    let verdicts = stability_filter(
        &train.instances,
        &candidates,
        &dev.instances,
        &baseline(&dev.instances),
        &options,
    )?;
    let constraints = kept_constraints(&verdicts, config.theta)?;
    let report = StabilityReport {
        mode: "stability",
        default_relation: train.labels.name(relation),
        verdicts: &verdicts,
    };
    Ok(Selection {
        report: to_json_string(&report)?,
        constraints,
    })
}

fn same_labels(a: &Corpus, b: &Corpus, what: &str) -> Result<()> {
    if a.labels != b.labels {
        bail!(
            "{what}: label sets differ ({:?} vs {:?})",
            a.labels.names(),
            b.labels.names()
        );
    }
    Ok(())
}

fn select(ctx: &RunContext, train_path: &Path, dev_path: &Path, mode: Mode) -> Result<Outcome> {
    let train = load_corpus(train_path)?;
    let dev = load_corpus(dev_path)?;
    same_labels(&train, &dev, "train and dev")?;
    ctx.manifest("select", &[train_path, dev_path], None)?;
    let selection = match mode {
        Mode::Greedy => greedy(&ctx.config, &train, &dev)?,
        Mode::Stability => stability(&ctx.config, &train, &dev, ctx.seed)?,
    };
    ctx.write_json(
        "constraints.json",
        &ConstraintFile::from_constraints(&selection.constraints, &train.labels),
    )?;
    ctx.write("selection.json", &selection.report)?;
    ctx.say(&format!("selected {} constraint(s)", selection.constraints.len()));
    for c in &selection.constraints {
        ctx.say(&format!(
            "  {}  p* = {:.4}",
            c.triplet.describe(&train.labels),
            c.p_star
        ));
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ConstraintSummary {
    constraint: String,
    p_star: f64,
    p_hat_before: Option<f64>,
    p_hat_after: Option<f64>,
}

#[derive(Serialize)]
struct InferSummary {
    status: &'static str,
    scope: Scope,
    solves: usize,
    converged_solves: usize,
    iterations: usize,
    constraints: Vec<ConstraintSummary>,
}

struct Inference {
    assignments: Vec<Assignment>,
    outcome: Outcome,
}

/// Solves `corpus` and writes predictions.json, trace.jsonl and infer.json.
fn run_inference(ctx: &RunContext, corpus: &Corpus, constraints: &[Constraint]) -> Result<Inference> {
    let hyper = ctx.hyper()?;
    let sol = solve(&corpus.instances, constraints, &hyper, ctx.config.scope)?;
    let before = constraint_gaps(&corpus.instances, &baseline(&corpus.instances), constraints);
    let after = constraint_gaps(&corpus.instances, &sol.assignments, constraints);
    let converged = sol.converged();
    let summary = InferSummary {
        status: if converged { "converged" } else { "max_iter_reached" },
        scope: ctx.config.scope,
        solves: sol.traces.len(),
        converged_solves: sol.traces.iter().filter(|t| t.converged()).count(),
        iterations: sol.traces.iter().map(|t| t.records.len()).sum(),
        constraints: constraints
            .iter()
            .zip(before.iter().zip(&after))
            .map(|(c, (b, a))| ConstraintSummary {
                constraint: c.triplet.describe(&corpus.labels),
                p_star: c.p_star,
                p_hat_before: b.p_hat,
                p_hat_after: a.p_hat,
            })
            .collect(),
    };
    ctx.write_json(
        "predictions.json",
        &PredictionFile::new(&corpus.instances, &sol.assignments, &corpus.labels),
    )?;
    ctx.write("trace.jsonl", &trace_jsonl(&sol.traces)?)?;
    ctx.write_json("infer.json", &summary)?;
    ctx.say(&format!(
        "{}: {} of {} solve(s) converged, {} iteration(s)",
        summary.status, summary.converged_solves, summary.solves, summary.iterations
    ));
    Ok(Inference {
        assignments: sol.assignments,
        outcome: if converged {
            Outcome::Success
        } else {
            Outcome::NotConverged
        },
    })
}

fn infer(ctx: &RunContext, corpus_path: &Path, constraints_path: &Path) -> Result<Outcome> {
    let corpus = load_corpus(corpus_path)?;
    let constraints = load_constraints(constraints_path, &corpus.labels)
        .with_context(|| format!("constraints {}", constraints_path.display()))?;
    ctx.hyper()?;
    ctx.manifest("infer", &[corpus_path], Some(constraints_path))?;
    Ok(run_inference(ctx, &corpus, &constraints)?.outcome)
}

#[derive(Serialize)]
struct InstanceCheck {
    doc_id: String,
    pairs: usize,
    skipped: Option<String>,
    snapshots: usize,
    max_abs_diff: f64,
    objectives_equal: bool,
    /// Oracle at the all-zero snapshot equals the baseline argmax.
    zero_snapshot_is_baseline: Option<bool>,
    feasible: Option<bool>,
    solver_satisfies_bands: Option<bool>,
    /// Raw objective of the solver's labels over the best feasible raw objective.
    objective_ratio: Option<f64>,
}

#[derive(Serialize)]
struct VerifyReport {
    max_pairs: usize,
    tolerance: f64,
    checked: usize,
    skipped: usize,
    snapshots: usize,
    all_equal: bool,
    instances: Vec<InstanceCheck>,
}

const VERIFY_TOLERANCE: f64 = 1e-9;

fn verify(ctx: &RunContext, corpus_path: &Path, constraints_path: &Path, max_pairs: usize) -> Result<Outcome> {
    let corpus = load_corpus(corpus_path)?;
    let constraints = load_constraints(constraints_path, &corpus.labels)
        .with_context(|| format!("constraints {}", constraints_path.display()))?;
    let hyper = ctx.hyper()?;
    ctx.manifest("verify", &[corpus_path], Some(constraints_path))?;
    let sol = solve(&corpus.instances, &constraints, &hyper, ctx.config.scope)?;

    let mut checks = Vec::with_capacity(corpus.instances.len());
    for (i, inst) in corpus.instances.iter().enumerate() {
        let trace = match ctx.config.scope {
            Scope::PerDocument => &sol.traces[i],
            Scope::Corpus => &sol.traces[0],
        };
        let mut check = InstanceCheck {
            doc_id: inst.doc_id.clone(),
            pairs: inst.len(),
            skipped: None,
            snapshots: 0,
            max_abs_diff: 0.0,
            objectives_equal: true,
            zero_snapshot_is_baseline: None,
            feasible: None,
            solver_satisfies_bands: None,
            objective_ratio: None,
        };
        if inst.len() > max_pairs {
            let note = format!("{} pairs exceeds --max-pairs {max_pairs}", inst.len());
            eprintln!("notice: skipping document `{}`: {note}", inst.doc_id);
            check.skipped = Some(note);
            checks.push(check);
            continue;
        }
        if let Err(e) = temprel::oracle::assignment_space(inst) {
            eprintln!("notice: skipping document `{}`: {e}", inst.doc_id);
            check.skipped = Some(e.to_string());
            checks.push(check);
            continue;
        }
        for record in &trace.records {
            let state = MultiplierState::with_lambdas(record.lambdas.clone(), &hyper);
            let (_, obj) = inner_map(inst, &constraints, &state);
            let brute = brute_lagrangian(inst, &constraints, &record.lambdas)?;
            let diff = (obj - brute.best_objective).abs();
            check.max_abs_diff = check.max_abs_diff.max(diff);
            check.objectives_equal &= diff <= VERIFY_TOLERANCE;
            check.snapshots += 1;
            if record.lambdas.iter().all(|&l| l == 0.0) && check.zero_snapshot_is_baseline.is_none() {
                check.zero_snapshot_is_baseline = Some(brute.best_assignment == inst.baseline());
            }
        }
        let exact = brute_constrained(inst, &constraints, hyper.theta_default())?;
        let labels = &sol.assignments[i].labels;
        check.feasible = Some(exact.feasible);
        check.solver_satisfies_bands = Some(satisfies_bands(inst, labels, &constraints, hyper.theta_default()));
        if exact.feasible && exact.best_objective != 0.0 {
            check.objective_ratio = Some(raw_objective(inst, labels) / exact.best_objective);
        }
        checks.push(check);
    }

    let checked: Vec<&InstanceCheck> = checks.iter().filter(|c| c.skipped.is_none()).collect();
    let all_equal = checked
        .iter()
        .all(|c| c.objectives_equal && c.zero_snapshot_is_baseline != Some(false));
    let report = VerifyReport {
        max_pairs,
        tolerance: VERIFY_TOLERANCE,
        checked: checked.len(),
        skipped: checks.len() - checked.len(),
        snapshots: checked.iter().map(|c| c.snapshots).sum(),
        all_equal,
        instances: checks,
    };
    ctx.write_json("verify.json", &report)?;
    ctx.say(&format!(
        "checked {} instance(s), skipped {}, {} snapshot(s): {}",
        report.checked,
        report.skipped,
        report.snapshots,
        if all_equal { "all objectives equal" } else { "MISMATCH" }
    ));
    Ok(if all_equal {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

#[derive(Serialize)]
struct SystemMicro {
    name: String,
    path: String,
    report: MicroReport,
}

#[derive(Serialize)]
struct SystemTempEval {
    name: String,
    path: String,
    score: TempEvalScore,
}

#[derive(Serialize)]
struct EvalReport<S> {
    metric: &'static str,
    systems: Vec<S>,
    mcnemar: Option<McNemar>,
}

fn render_mcnemar(m: &McNemar) -> String {
    if m.no_discordant_pairs {
        "McNemar: no discordant pairs, p = 1\n".to_string()
    } else {
        format!("McNemar: b = {}, c = {}, p = {:.6}\n", m.b, m.c, m.p_value)
    }
}

fn eval(
    ctx: &RunContext,
    gold_path: &Path,
    pred_path: &Path,
    pred_b_path: Option<&Path>,
    metric: Metric,
    rules_path: Option<&Path>,
) -> Result<Outcome> {
    let corpus = load_corpus(gold_path)?;
    let mut systems = vec![("A", pred_path, load_predictions(pred_path, &corpus)?)];
    if let Some(p) = pred_b_path {
        systems.push(("B", p, load_predictions(p, &corpus)?));
    }
    let rules = match rules_path {
        Some(p) => {
            ClosureRules::from_file(read_json(p)?, &corpus.labels).with_context(|| format!("rules {}", p.display()))?
        }
        None => ClosureRules::default_for(&corpus.labels),
    };
    let mut inputs = vec![gold_path, pred_path];
    inputs.extend(pred_b_path);
    inputs.extend(rules_path);
    ctx.manifest("eval", &inputs, None)?;

    let mcnemar = match &systems[..] {
        [(_, _, a), (_, _, b)] => Some(mcnemar(
            &gold_vector(&corpus.instances, &corpus.labels)?,
            &flatten(a),
            &flatten(b),
        )?),
        _ => None,
    };
    let (json, text) = match metric {
        Metric::Micro => {
            let reports: Vec<SystemMicro> = systems
                .iter()
                .map(|(name, path, asg)| {
                    Ok(SystemMicro {
                        name: name.to_string(),
                        path: path.display().to_string(),
                        report: corpus_micro(&corpus.instances, asg, &corpus.labels)?,
                    })
                })
                .collect::<Result<_>>()?;
            let table: Vec<(&str, &MicroReport)> = reports.iter().map(|s| (s.name.as_str(), &s.report)).collect();
            let mut text = render_breakdown(&table);
            if let Some(m) = &mcnemar {
                text.push_str(&render_mcnemar(m));
            }
            let report = EvalReport {
                metric: "micro",
                systems: reports,
                mcnemar,
            };
            (to_json_string(&report)?, text)
        }
        Metric::Tempeval => {
            let scores: Vec<SystemTempEval> = systems
                .iter()
                .map(|(name, path, asg)| {
                    Ok(SystemTempEval {
                        name: name.to_string(),
                        path: path.display().to_string(),
                        score: corpus_tempeval(&corpus.instances, asg, &corpus.labels, &rules)?,
                    })
                })
                .collect::<Result<_>>()?;
            let mut text = format!("{:<6} {:>6} {:>6} {:>6}\n", "system", "P", "R", "F1");
            for s in &scores {
                text.push_str(&format!(
                    "{:<6} {:>6} {:>6} {:>6}\n",
                    s.name,
                    pct(s.score.precision),
                    pct(s.score.recall),
                    pct(s.score.f1)
                ));
                if s.score.empty_system || s.score.empty_gold {
                    text.push_str(&format!(
                        "  note: {} graph empty, ratio set to 0\n",
                        if s.score.empty_system { "system" } else { "gold" }
                    ));
                }
            }
            if let Some(m) = &mcnemar {
                text.push_str(&render_mcnemar(m));
            }
            let report = EvalReport {
                metric: "tempeval",
                systems: scores,
                mcnemar,
            };
            (to_json_string(&report)?, text)
        }
    };
    ctx.write("eval.json", &json)?;
    ctx.write("eval.txt", &text)?;
    ctx.say(&text);
    Ok(Outcome::Success)
}

fn load_spec(path: &Path) -> Result<GeneratorSpec> {
    let spec: GeneratorSpec = read_json(path).with_context(|| format!("spec {}", path.display()))?;
    spec.validate().with_context(|| format!("spec {}", path.display()))?;
    Ok(spec)
}

fn synth(ctx: &RunContext, spec_path: &Path) -> Result<Outcome> {
    let mut spec = load_spec(spec_path)?;
    if let Some(seed) = ctx.seed {
        spec.seed = seed;
    }
    ctx.manifest("synth", &[spec_path], None)?;
    let corpus = Corpus::new(spec.labels()?, generate(&spec)?);
    ctx.write_json("corpus.json", &corpus.to_file())?;
    ctx.say(&format!(
        "{} instance(s), {} pair(s)",
        corpus.instances.len(),
        corpus.num_pairs()
    ));
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct PipelineSummary {
    seed: u64,
    dominant_bias: f64,
    train_pairs: usize,
    dev_pairs: usize,
    test_pairs: usize,
    selected: Vec<String>,
    status: &'static str,
    baseline_f1: f64,
    inferred_f1: f64,
}

/// Built-in pipeline corpus sizes: 400 train, 200 dev and 200 test
/// instances of 10 pairs each.
const PIPELINE_SIZES: (usize, usize, usize) = (400, 200, 200);

fn pipeline(ctx: &RunContext, spec_path: Option<&Path>, target_gap: f64) -> Result<Outcome> {
    let seed = ctx.seed.unwrap_or(0);
    let test_spec = match spec_path {
        Some(p) => {
            let mut s = load_spec(p)?;
            s.seed = seed.wrapping_add(2);
            s
        }
        None => {
            let base = planted_spec(seed.wrapping_add(2), PIPELINE_SIZES.2, 10, 0.0);
            let beta = calibrate_bias(&base, target_gap)?;
            planted_spec(seed.wrapping_add(2), PIPELINE_SIZES.2, 10, beta)
        }
    };
    let mut inputs: Vec<&Path> = Vec::new();
    inputs.extend(spec_path);
    ctx.manifest("pipeline", &inputs, None)?;
    let split = |offset: u64, instances: Option<usize>| {
        let mut s = test_spec.clone();
        s.seed = seed.wrapping_add(offset);
        if let Some(n) = instances {
            s.num_instances = n;
        }
        s
    };
    let (train_spec, dev_spec) = if spec_path.is_some() {
        (split(0, None), split(1, None))
    } else {
        (split(0, Some(PIPELINE_SIZES.0)), split(1, Some(PIPELINE_SIZES.1)))
    };
    let labels = test_spec.labels()?;
    let train = Corpus::new(labels.clone(), generate(&train_spec)?);
    let dev = Corpus::new(labels.clone(), generate(&dev_spec)?);
    let test = Corpus::new(labels.clone(), generate(&test_spec)?);
    ctx.write_json("train.json", &train.to_file())?;
    ctx.write_json("dev.json", &dev.to_file())?;
    ctx.write_json("test.json", &test.to_file())?;

    let train_counts = count_triplets(&train.instances, LabelSource::Gold)?;
    ctx.write_json("counts.json", &CountsFile::new(&train_counts, &labels))?;
    let dev_table = render_counts(&count_triplets(&dev.instances, LabelSource::Predicted)?, &labels);
    ctx.write("stats.txt", &dev_table)?;

    let selection = greedy(&ctx.config, &train, &dev)?;
    ctx.write_json(
        "constraints.json",
        &ConstraintFile::from_constraints(&selection.constraints, &labels),
    )?;
    ctx.write("selection.json", &selection.report)?;

    let inference = run_inference(ctx, &test, &selection.constraints)?;
    let base = baseline(&test.instances);
    ctx.write_json("baseline.json", &PredictionFile::new(&test.instances, &base, &labels))?;

    let micro_base = corpus_micro(&test.instances, &base, &labels)?;
    let micro_inf = corpus_micro(&test.instances, &inference.assignments, &labels)?;
    let gold = gold_vector(&test.instances, &labels)?;
    let test_mcnemar = mcnemar(&gold, &flatten(&inference.assignments), &flatten(&base))?;
    let mut text = render_breakdown(&[("baseline", &micro_base), ("inferred", &micro_inf)]);
    text.push_str(&render_mcnemar(&test_mcnemar));
    let report = EvalReport {
        metric: "micro",
        systems: vec![
            SystemMicro {
                name: "baseline".into(),
                path: "baseline.json".into(),
                report: micro_base.clone(),
            },
            SystemMicro {
                name: "inferred".into(),
                path: "predictions.json".into(),
                report: micro_inf.clone(),
            },
        ],
        mcnemar: Some(test_mcnemar),
    };
    ctx.write_json("eval.json", &report)?;
    ctx.write("eval.txt", &text)?;

    let hyper = ctx.hyper()?;
    let gaps = gap_report(
        &test.instances,
        &labels,
        &selection.constraints,
        &base,
        &inference.assignments,
        &hyper,
        ctx.config.scope,
    )?;
    let gap_text = render_gap_report(&gaps);
    ctx.write_json("gap_report.json", &gaps)?;
    ctx.write("gap_report.txt", &gap_text)?;

    let summary = PipelineSummary {
        seed,
        dominant_bias: test_spec.score_model.dominant_bias,
        train_pairs: train.num_pairs(),
        dev_pairs: dev.num_pairs(),
        test_pairs: test.num_pairs(),
        selected: selection
            .constraints
            .iter()
            .map(|c| c.triplet.describe(&labels))
            .collect(),
        status: if inference.outcome == Outcome::Success {
            "converged"
        } else {
            "max_iter_reached"
        },
        baseline_f1: micro_base.f1,
        inferred_f1: micro_inf.f1,
    };
    ctx.write_json("pipeline.json", &summary)?;
    ctx.say(&text);
    ctx.say(&gap_text);
    Ok(inference.outcome)
}
