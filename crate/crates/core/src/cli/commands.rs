use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AblateArgs, BenchArgs, Cli, CliError, Command, EvalArgs, GradcheckArgs, OptimizeArgs, RunConfig, SwarmFlags,
    SynthArgs, TrainArgs, TrainFlags,
};
use crate::data::{load_dataset_dir, split, synth_generate, write_dataset_dir, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::graph::{preorder_traverse, tree_to_dot, SpanningTree, TraversalSequence};
use crate::neural::gradcheck::{run_all, CheckOptions};
use crate::neural::Checkpoint;
use crate::pipeline::{
    ablate, bench_random_trees, evaluate, mean_layout, report, train, EvalReport, TrainedModel,
};
use crate::seed;
use crate::topology::{optimize_with, Evaluator, SNAPSHOT_ITERATIONS};

type CliResult = std::result::Result<(), CliError>;

pub(super) fn dispatch(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed.or(cfg.seed) {
        cfg.set_seed(s);
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, e.g. when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Synth(a) => synth(cfg, a),
        Command::Optimize(a) => optimize(cfg, a),
        Command::Train(a) => train_cmd(cfg, a),
        Command::Eval(a) => eval(cfg, a),
        Command::Ablate(a) => ablate_cmd(cfg, a),
        Command::BenchRandomTrees(a) => bench(cfg, a),
        Command::Gradcheck(a) => gradcheck(cfg, a),
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn apply_train(cfg: &mut RunConfig, f: &TrainFlags) -> CliResult {
    let t = &mut cfg.train;
    if let Some(v) = f.epochs {
        t.epochs = v;
    }
    if let Some(v) = f.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = f.lr {
        t.adam.lr = v;
    }
    if let Some(v) = f.hidden {
        t.hidden = v;
    }
    if let Some(v) = f.fusion_dim {
        t.fusion_dim = v;
    }
    t.validate().map_err(usage)
}

fn apply_swarm(cfg: &mut RunConfig, f: &SwarmFlags) -> CliResult {
    let s = &mut cfg.swarm;
    if let Some(v) = f.iterations {
        s.iterations = v;
    }
    if let Some(v) = f.swarm_size {
        s.swarm_size = v;
    }
    if let Some(v) = f.inner_epochs {
        s.inner_epochs = v;
    }
    if f.root.is_some() {
        cfg.root = f.root;
    }
    cfg.swarm.validate().map_err(usage)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn echo_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    create_dir(dir)?;
    write(dir, "effective-config.toml", &cfg.to_toml())
}

/// A frozen tree as stored in run directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    pub n: usize,
    pub root: usize,
    pub edges: Vec<(usize, usize)>,
    pub sequence: Vec<usize>,
    /// Objective of the tree when it came out of a search.
    pub j: Option<f64>,
}

impl TreeFile {
    fn new(tree: &SpanningTree, j: Option<f64>) -> Self {
        Self {
            n: tree.n(),
            root: tree.root(),
            edges: tree.edges().to_vec(),
            sequence: preorder_traverse(tree).tokens().to_vec(),
            j,
        }
    }

    fn load(path: &Path) -> Result<(SpanningTree, TraversalSequence)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TreeFile =
            serde_json::from_str(&text).map_err(|e| Error::format(Some(e.line()), format!("tree file: {e}")))?;
        let tree = SpanningTree::from_edges(file.n, &file.edges, file.root)?;
        let seq = preorder_traverse(&tree);
        if seq.tokens() != file.sequence {
            return Err(Error::format(None, "tree file sequence does not match its edges"));
        }
        Ok((tree, seq))
    }

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree file serializes");
        s.push('\n');
        s
    }
}

struct Splits {
    train: DatasetManifest,
    val: Option<DatasetManifest>,
    test: DatasetManifest,
}

/// Loads a dataset directory; untagged datasets are split with the
/// configured fractions.
fn load_splits(dir: &Path, cfg: &RunConfig) -> Result<(DatasetManifest, Splits)> {
    let mut data = load_dataset_dir(dir)?;
    if data.splits.iter().all(Option::is_none) {
        data = apply_split(&data, cfg)?;
    }
    let train = data.subset_of(Split::Train);
    if train.is_empty() {
        return Err(Error::invalid("dataset has no training samples"));
    }
    let val = Some(data.subset_of(Split::Val)).filter(|v| !v.is_empty());
    let test = data.subset_of(Split::Test);
    Ok((data, Splits { train, val, test }))
}

fn apply_split(data: &DatasetManifest, cfg: &RunConfig) -> Result<DatasetManifest> {
    let s = &cfg.split;
    split(
        data,
        &[(Split::Train, s.train), (Split::Val, s.val), (Split::Test, s.test)],
        seed::stream(cfg.train.seed, "split"),
    )
}

fn synth(mut cfg: RunConfig, a: SynthArgs) -> CliResult {
    let s = &mut cfg.synth;
    if let Some(v) = a.classes {
        s.classes = v;
    }
    if let Some(v) = a.landmarks {
        s.landmarks = v;
    }
    if let Some(v) = a.samples_per_class {
        s.samples_per_class = v;
    }
    if let Some(v) = a.noise {
        s.noise = v;
    }
    if let Some(v) = a.texture_amplitude {
        s.texture_amplitude = v;
    }
    if let Some(v) = a.image_size {
        s.image_size = v;
    }
    s.validate().map_err(usage)?;
    let data = apply_split(&synth_generate(&cfg.synth)?, &cfg)?;
    write_dataset_dir(&data, &a.out)?;
    echo_config(&a.out, &cfg)?;
    println!(
        "wrote {} samples ({} classes, {} landmarks) to {}",
        data.len(),
        data.classes,
        data.n_landmarks,
        a.out.display()
    );
    Ok(())
}

/// Runs the search on the training split and writes the history, snapshots
/// and the best tree into `out`.
fn search(cfg: &RunConfig, train_set: &DatasetManifest, out: &Path) -> Result<(SpanningTree, TraversalSequence)> {
    let evaluator = Evaluator::new(train_set, &cfg.swarm, &cfg.train, cfg.root)?;
    let result = optimize_with(&evaluator, &cfg.swarm, |r| {
        eprintln!("iteration {:>3}  best J {:.6}  distinct trees {}", r.iteration, r.best_j, r.evaluations);
    })?;
    let layout = mean_layout(train_set)?;
    write(out, "history.jsonl", &result.history.to_jsonl())?;
    for record in &result.history.records {
        if SNAPSHOT_ITERATIONS.contains(&record.iteration) {
            let tree = record.tree(train_set.n_landmarks)?;
            write(out, &format!("snapshot_iter{:02}.dot", record.iteration), &tree_to_dot(&tree, &layout)?)?;
        }
    }
    let tree = result.best.tree.clone();
    write(out, "tree.json", &TreeFile::new(&tree, Some(result.best.j)).to_json())?;
    write(out, "tree.dot", &tree_to_dot(&tree, &layout)?)?;
    println!("best J {} after {} iterations", result.best.j, cfg.swarm.iterations);
    println!("tree edges {:?}", tree.edges());
    Ok((tree, result.best.sequence))
}

fn tree_or_search(
    cfg: &RunConfig,
    path: Option<&Path>,
    train_set: &DatasetManifest,
    out: &Path,
) -> Result<(SpanningTree, TraversalSequence)> {
    match path {
        Some(p) => {
            let (tree, seq) = TreeFile::load(p)?;
            if tree.n() != train_set.n_landmarks {
                return Err(Error::invalid(format!(
                    "tree has {} nodes, dataset has {} landmarks",
                    tree.n(),
                    train_set.n_landmarks
                )));
            }
            write(out, "tree.json", &TreeFile::new(&tree, None).to_json())?;
            Ok((tree, seq))
        }
        None => search(cfg, train_set, out),
    }
}

fn optimize(mut cfg: RunConfig, a: OptimizeArgs) -> CliResult {
    apply_swarm(&mut cfg, &a.swarm)?;
    apply_train(&mut cfg, &a.train)?;
    let (_, s) = load_splits(&a.data, &cfg)?;
    echo_config(&a.out, &cfg)?;
    search(&cfg, &s.train, &a.out)?;
    Ok(())
}

fn print_eval(r: &EvalReport) {
    println!("RR {:.2}% on {} samples", r.recognition_rate, r.total);
    for m in &r.per_class {
        let flag = if m.is_empty() { "  (no support)" } else { "" };
        println!("class {}  F1 {:.4}  support {}{flag}", m.class, m.f1, m.support);
    }
    println!("confusion (rows true, columns predicted):");
    for row in &r.confusion {
        println!("  {}", row.iter().map(|v| format!("{v:>5}")).collect::<String>());
    }
}

fn write_eval(dir: &Path, prefix: &str, r: &EvalReport) -> Result<()> {
    write(dir, &format!("{prefix}eval_summary.csv"), &report::eval_summary_csv(r))?;
    write(dir, &format!("{prefix}per_class.csv"), &report::per_class_csv(r))?;
    write(dir, &format!("{prefix}confusion.csv"), &report::confusion_csv(r))
}

fn train_cmd(mut cfg: RunConfig, a: TrainArgs) -> CliResult {
    apply_train(&mut cfg, &a.train)?;
    apply_swarm(&mut cfg, &a.swarm)?;
    let (_, s) = load_splits(&a.data, &cfg)?;
    echo_config(&a.out, &cfg)?;
    let (tree, seq) = tree_or_search(&cfg, a.tree.as_deref(), &s.train, &a.out)?;
    let model = train(&s.train, s.val.as_ref(), &seq, &cfg.train)?;
    model.to_checkpoint().save(&a.out.join("checkpoint.json"))?;
    write(&a.out, "loss_curve.csv", &report::loss_curve_csv(&model.history))?;
    write(&a.out, "tree.dot", &tree_to_dot(&tree, &mean_layout(&s.train)?)?)?;
    let r = evaluate(&model, &s.train)?;
    write_eval(&a.out, "train_", &r)?;
    println!("trained {} epochs on {} samples; train RR {:.2}%", model.history.len(), s.train.len(), r.recognition_rate);
    Ok(())
}

fn eval(cfg: RunConfig, a: EvalArgs) -> CliResult {
    let model = TrainedModel::from_checkpoint(&Checkpoint::load(&a.checkpoint)?)?;
    let (data, _) = load_splits(&a.data, &cfg)?;
    let subset = match a.split.as_str() {
        "all" => data.clone(),
        name => {
            let tag = Split::parse(name).ok_or_else(|| CliError::Usage(format!("unknown split `{name}`")))?;
            data.subset_of(tag)
        }
    };
    if subset.is_empty() {
        return Err(Error::invalid(format!("split `{}` is empty", a.split)).into());
    }
    echo_config(&a.out, &cfg)?;
    let r = evaluate(&model, &subset)?;
    write_eval(&a.out, "", &r)?;
    print_eval(&r);
    Ok(())
}

fn ablate_cmd(mut cfg: RunConfig, a: AblateArgs) -> CliResult {
    apply_train(&mut cfg, &a.train)?;
    apply_swarm(&mut cfg, &a.swarm)?;
    let (_, s) = load_splits(&a.data, &cfg)?;
    if s.test.is_empty() {
        return Err(Error::invalid("ablation needs a test split").into());
    }
    echo_config(&a.out, &cfg)?;
    let (_, seq) = tree_or_search(&cfg, a.tree.as_deref(), &s.train, &a.out)?;
    let r = ablate(&s.train, s.val.as_ref(), &s.test, &seq, &cfg.train)?;
    write(&a.out, "ablation.csv", &report::ablation_csv(&r))?;
    println!("full model RR {:.2}% (stream and fusion ablations reuse the learned tree)", r.full_rr);
    for row in &r.rows {
        println!("{:<20} RR {:>6.2}%  drop {:>6.2}", row.variant.name(), row.rr, r.drop(row));
    }
    Ok(())
}

fn bench(mut cfg: RunConfig, a: BenchArgs) -> CliResult {
    apply_train(&mut cfg, &a.train)?;
    apply_swarm(&mut cfg, &a.swarm)?;
    if let Some(k) = a.trees {
        cfg.bench.trees = k;
    }
    if cfg.bench.trees == 0 {
        return Err(CliError::Usage("--trees must be positive".into()));
    }
    let (_, s) = load_splits(&a.data, &cfg)?;
    if s.test.is_empty() {
        return Err(Error::invalid("benchmark needs a test split").into());
    }
    echo_config(&a.out, &cfg)?;
    let evaluator = Evaluator::new(&s.train, &cfg.swarm, &cfg.train, cfg.root)?;
    let r = bench_random_trees(
        &s.train,
        &s.test,
        &cfg.train,
        &evaluator,
        cfg.bench.trees,
        seed::stream(cfg.train.seed, "bench"),
    )?;
    write(&a.out, "bench.csv", &report::bench_csv(&r))?;
    write(&a.out, "bench_summary.csv", &report::bench_summary_csv(&r))?;
    for row in &r.rows {
        println!("tree {:>3}  RR {:>6.2}%  J {:.6}", row.index, row.rr, row.j);
    }
    println!(
        "RR min {:.2}  median {:.2}  max {:.2}  spread {:.2}; median J {:.6}",
        r.min_rr(),
        r.median_rr(),
        r.max_rr(),
        r.spread(),
        r.median_j()
    );
    Ok(())
}

fn gradcheck(cfg: RunConfig, a: GradcheckArgs) -> CliResult {
    if !(a.eps.is_finite() && a.eps > 0.0) {
        return Err(CliError::Usage("--eps must be positive".into()));
    }
    echo_config(&a.out, &cfg)?;
    let reports = run_all(&CheckOptions {
        seed: cfg.train.seed,
        eps: a.eps,
        corrupt: a.corrupt,
    });
    let mut csv = String::from("component,eps,checked,max_relative_error,passed\n");
    println!("eps {}", a.eps);
    for r in &reports {
        csv.push_str(&format!("{},{},{},{},{}\n", r.component, r.eps, r.checked, r.max_relative_error, r.passed()));
        println!(
            "{:<12} max rel err {:.3e} over {} params  {}",
            r.component,
            r.max_relative_error,
            r.checked,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    write(&a.out, "gradcheck.csv", &csv)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.component.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Check(format!("gradient check failed for {}", failed.join(", "))).into())
    }
}
