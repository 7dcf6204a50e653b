use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cascademix::analysis::{
    assign_clusters, clustering_metrics, ecdf, evaluate_labelled_set, log_mean_delays,
    map_clusters_to_labels, stratified_holdout, structural_test, temporal_test, ClusterMapping,
    TestResult,
};
use cascademix::cascade::{dump_cascades, parse_cascades};
use cascademix::diffusion::{generate_synthetic_benchmark, BenchmarkBundle, BenchmarkConfig};
use cascademix::graph::{build_retweet_graph, weak_component_stats};
use cascademix::index::ActivationIndex;
use cascademix::inference::posterior_under;
use cascademix::inference::PosteriorAssignment;
use cascademix::influence::{appearance_stats, greedy_influencers, InfluencerRanking};
use cascademix::intervention::{
    edge_intervention_eval, edge_strategy_mic, edge_strategy_random, head_users,
    node_intervention_eval, node_strategy_mic, node_strategy_topu, EdgeEvalConfig,
    InterventionReport,
};
use cascademix::model_file::{component_name, load_model, model_to_json, ModelFile, ModelMeta};
use cascademix::{fit, rng, Cascade, DirectedGraph, Interner, Label, Window};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{ClusterArgs, Command, GenerateArgs, InfluencerArgs, InterveneArgs, SweepArgs};
use crate::config::RunConfig;
use crate::output::{pi_tag, OutDir};

pub fn run(command: &Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Generate(a) => generate(cfg, a),
        Command::Infer => infer(cfg),
        Command::Cluster(a) => cluster(cfg, a),
        Command::Stats => stats(cfg),
        Command::Influencers(a) => influencers(cfg, a),
        Command::Intervene(a) => intervene(cfg, a),
        Command::Dump => dump(cfg),
        Command::Sweep(a) => sweep(cfg, a),
    }
}

fn load_cascades(path: &Path, cfg: &RunConfig, names: &mut Interner) -> Result<Vec<Cascade>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading cascades {}", path.display()))?;
    let cascades = parse_cascades(&text, names, cfg.time_scale)
        .with_context(|| format!("cascade: parsing {}", path.display()))?;
    if cascades.is_empty() {
        bail!("cascade: {} holds no cascades", path.display());
    }
    Ok(cascades)
}

fn load(cfg: &RunConfig, names: &mut Interner) -> Result<ModelFile> {
    let path = cfg.require_model()?;
    load_model(path, names).with_context(|| format!("model_file: loading {}", path.display()))
}

/// The run's window, else the model's, else the default.
fn window_for(cfg: &RunConfig, model: Option<&ModelFile>) -> Window {
    if let (Some(w), Some(m)) = (cfg.window, model.and_then(|m| m.meta.window)) {
        if w != m {
            log::warn!("--window {w} overrides the model's fitted window {m}");
        }
    }
    cfg.window
        .or(model.and_then(|m| m.meta.window))
        .unwrap_or_default()
}

fn bench_config(cfg: &RunConfig, a: &GenerateArgs) -> Result<BenchmarkConfig> {
    if let Some(&bad) = a.mixtures.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        bail!("--mixtures value {bad} is outside [0, 1]");
    }
    Ok(BenchmarkConfig {
        n_nodes: a.nodes,
        n_edges: a.edges,
        mixtures: a.mixtures.iter().map(|&p| [p, 1.0 - p]).collect(),
        sample_sizes: a.sizes.clone(),
        seed_exponent: a.seed_exponent,
        rng_seed: cfg.seed,
    })
}

fn build_bundle(cfg: &RunConfig, a: &GenerateArgs) -> Result<BenchmarkBundle> {
    generate_synthetic_benchmark(&bench_config(cfg, a)?)
        .context("diffusion: generating the benchmark")
}

fn generate(cfg: &RunConfig, a: &GenerateArgs) -> Result<()> {
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let bundle = build_bundle(cfg, a)?;
    let names = bundle.graph.names();
    out.write("graph.tsv", &bundle.graph.to_edge_list())?;
    // v follows u whenever u can activate v
    let mut followers = String::new();
    for &(u, v) in bundle.graph.edges() {
        let _ = writeln!(followers, "{}\t{}", names.name(v), names.name(u));
    }
    out.write("followers.tsv", &followers)?;
    for &p in &a.mixtures {
        let truth = bundle.truth([p, 1.0 - p]);
        out.write(
            &format!("truth_{}.json", pi_tag(p)),
            &model_to_json(&truth, &ModelMeta::default(), names)?,
        )?;
    }
    for set in &bundle.sets {
        let name = format!("cascades_{}_n{}.jsonl", pi_tag(set.weights[0]), set.size);
        out.write(&name, &dump_cascades(&set.cascades, names))?;
    }
    let details = json!({
        "nodes": bundle.graph.node_count(),
        "edges": bundle.graph.edge_count(),
        "sets": bundle.sets.len(),
    });
    out.finish(cfg, details)
}

fn infer(cfg: &RunConfig) -> Result<()> {
    let mut names = Interner::new();
    let cascades = load_cascades(cfg.require_cascades()?, cfg, &mut names)?;
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let window = window_for(cfg, None);
    let index = ActivationIndex::build(&cascades, window).context("index: building activations")?;
    let res = fit(&index, &cfg.fit).context("inference: fitting the mixture")?;
    if !res.converged() {
        log::warn!(
            "EM stopped after {} iterations without converging",
            res.state.iteration()
        );
    }
    let meta = ModelMeta {
        window: Some(window),
        converged: Some(res.converged()),
        nll_trace: res.state.nll_trace().to_vec(),
    };
    out.write("model.json", &model_to_json(&res.params, &meta, &names)?)?;
    let details = json!({
        "cascades": cascades.len(),
        "edges": res.params.component(0).len(),
        "window": window.to_string(),
        "nll_per_cascade": res.nll(),
        "iterations": res.state.iteration(),
        "restart": res.restart,
        "weights": res.params.weights(),
        "warnings": res.state.warnings(),
    });
    out.finish(cfg, details)
}

/// Hard component of every cascade under the model.
fn model_clusters(
    cascades: &[Cascade],
    model: &ModelFile,
    window: Window,
    cfg: &RunConfig,
) -> Result<(Vec<usize>, PosteriorAssignment, f64)> {
    let index = ActivationIndex::build(cascades, window).context("index: building activations")?;
    let (post, nll) = posterior_under(&index, &model.params, cfg.fit.failure_rule)
        .context("inference: scoring cascades")?;
    let assignment = assign_clusters(&post);
    if assignment.tie_count() > 0 {
        log::warn!(
            "{} cascade(s) tie between components; assigned to the lower index",
            assignment.tie_count()
        );
    }
    Ok((assignment.clusters, post, nll))
}

fn true_fake(label: Option<Label>) -> Option<Label> {
    label.filter(|l| matches!(l, Label::True | Label::Fake))
}

#[derive(Serialize)]
struct ClusterRow<'a> {
    cascade_id: &'a str,
    gamma_true: f64,
    predicted: Label,
    truth: Option<Label>,
    holdout: bool,
}

fn cluster(cfg: &RunConfig, a: &ClusterArgs) -> Result<()> {
    let mut names = Interner::new();
    let cascades = load_cascades(cfg.require_cascades()?, cfg, &mut names)?;
    let model = load(cfg, &mut names)?;
    if model.params.k() != 2 {
        bail!(
            "cluster: labelling needs a two-component model, got k = {}",
            model.params.k()
        );
    }
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let window = window_for(cfg, Some(&model));
    let (clusters, post, nll) = model_clusters(&cascades, &model, window, cfg)?;

    let labels: Vec<Option<Label>> = cascades.iter().map(|c| true_fake(c.label())).collect();
    let both = labels.contains(&Some(Label::True)) && labels.contains(&Some(Label::Fake));
    let mut in_holdout = vec![false; cascades.len()];
    let mapping = if both {
        let holdout =
            stratified_holdout(&labels, a.holdout, cfg.seed).context("analysis: holdout")?;
        holdout.iter().for_each(|&s| in_holdout[s] = true);
        let pairs: Vec<(usize, Label)> = holdout.iter().map(|&s| (s, labels[s].unwrap())).collect();
        let m = map_clusters_to_labels(&clusters, &pairs).context("analysis: naming clusters")?;
        if m.tie {
            log::warn!("holdout does not separate the two cluster namings; kept component order");
        }
        m
    } else {
        log::warn!("cascades lack true and fake labels; component 0 is reported as true");
        ClusterMapping {
            labels: [Label::True, Label::Fake],
            holdout_correct: 0,
            holdout_size: 0,
            tie: false,
        }
    };
    let true_cluster = usize::from(mapping.labels[0] != Label::True);
    let rows: Vec<ClusterRow> = cascades
        .iter()
        .enumerate()
        .map(|(s, c)| ClusterRow {
            cascade_id: c.id(),
            gamma_true: post.row(s)[true_cluster],
            predicted: mapping.label_of(clusters[s]),
            truth: labels[s],
            holdout: in_holdout[s],
        })
        .collect();
    out.write_csv("cluster_report.csv", &rows)?;

    let scored: Vec<(Label, Label)> = rows
        .iter()
        .filter(|r| !r.holdout)
        .filter_map(|r| r.truth.map(|t| (r.predicted, t)))
        .collect();
    let metrics = if scored.is_empty() {
        None
    } else {
        let (pred, gold): (Vec<Label>, Vec<Label>) = scored.iter().copied().unzip();
        let w = model.params.weights();
        Some(
            clustering_metrics(&pred, &gold, [w[true_cluster], w[1 - true_cluster]])
                .context("analysis: metrics")?,
        )
    };
    out.write_json(
        "metrics.json",
        &json!({
            "window": window.to_string(),
            "nll_per_cascade": nll,
            "mapping": mapping,
            "scored": scored.len(),
            "metrics": metrics,
        }),
    )?;
    out.finish(cfg, json!({ "cascades": cascades.len() }))
}

/// Fake and true groups: labels when every cascade carries one, else the
/// model's hard assignment (component 0 true, component 1 fake).
fn split_groups(
    cascades: &[Cascade],
    model: Option<&ModelFile>,
    cfg: &RunConfig,
) -> Result<(Vec<Cascade>, Vec<Cascade>, &'static str)> {
    let labels: Vec<Option<Label>> = cascades.iter().map(|c| true_fake(c.label())).collect();
    let (fake, truth): (Vec<_>, Vec<_>) = if labels.iter().all(Option::is_some) {
        let pick = |l| {
            cascades
                .iter()
                .zip(&labels)
                .filter(|(_, x)| **x == Some(l))
                .map(|(c, _)| c.clone())
                .collect()
        };
        (pick(Label::Fake), pick(Label::True))
    } else if let Some(model) = model {
        if model.params.k() != 2 {
            bail!("grouping by model needs k = 2, got {}", model.params.k());
        }
        let (clusters, _, _) = model_clusters(cascades, model, window_for(cfg, Some(model)), cfg)?;
        let pick = |m| {
            cascades
                .iter()
                .zip(&clusters)
                .filter(|(_, c)| **c == m)
                .map(|(c, _)| c.clone())
                .collect()
        };
        (pick(1), pick(0))
    } else {
        bail!("cascades need true/fake labels, or pass --model to group them by component");
    };
    let source = if labels.iter().all(Option::is_some) {
        "labels"
    } else {
        "model"
    };
    log::info!(
        "{} fake and {} true cascades (from {source})",
        fake.len(),
        truth.len()
    );
    Ok((fake, truth, source))
}

#[derive(Serialize)]
struct StatRow {
    test: &'static str,
    statistic: f64,
    p_value: f64,
    n_fake: usize,
    n_true: usize,
    exact: bool,
    ties: bool,
}

impl From<&TestResult> for StatRow {
    fn from(r: &TestResult) -> Self {
        Self {
            test: r.test,
            statistic: r.statistic,
            p_value: r.p_value,
            n_fake: r.n1,
            n_true: r.n2,
            exact: r.exact,
            ties: r.ties,
        }
    }
}

#[derive(Serialize)]
struct EcdfRow {
    value: f64,
    cdf: f64,
}

fn ecdf_rows(values: &[f64]) -> Vec<EcdfRow> {
    ecdf(values)
        .into_iter()
        .map(|(value, cdf)| EcdfRow { value, cdf })
        .collect()
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let mut names = Interner::new();
    let cascades = load_cascades(cfg.require_cascades()?, cfg, &mut names)?;
    let model = cfg
        .model
        .is_some()
        .then(|| load(cfg, &mut names))
        .transpose()?;
    let followers = cfg
        .followers
        .as_deref()
        .map(|p| {
            DirectedGraph::read_edge_list(p, true, names.clone())
                .with_context(|| format!("graph: reading followers {}", p.display()))
        })
        .transpose()?;
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let (fake, truth, source) = split_groups(&cascades, model.as_ref(), cfg)?;
    let multi =
        |g: &[Cascade]| -> Vec<Cascade> { g.iter().filter(|c| c.len() >= 2).cloned().collect() };
    let (fake2, truth2) = (multi(&fake), multi(&truth));
    let dropped = fake.len() + truth.len() - fake2.len() - truth2.len();
    if dropped > 0 {
        log::warn!("temporal test ignores {dropped} single-engagement cascade(s)");
    }

    let mut rows = vec![StatRow::from(
        &temporal_test(&fake2, &truth2).context("analysis: temporal test")?,
    )];
    out.write_csv("ecdf_fake.csv", &ecdf_rows(&log_mean_delays(&fake2)?))?;
    out.write_csv("ecdf_true.csv", &ecdf_rows(&log_mean_delays(&truth2)?))?;

    if let Some(fg) = &followers {
        let r = |g: &[Cascade]| -> Result<Vec<f64>> {
            g.iter()
                .map(|c| {
                    let rg = build_retweet_graph(c, fg);
                    weak_component_stats(&rg, c.len())
                        .map(|s| s.proportion)
                        .with_context(|| format!("graph: components of cascade {}", c.id()))
                })
                .collect()
        };
        let (rf, rt) = (r(&fake)?, r(&truth)?);
        rows.push(StatRow::from(
            &structural_test(&rf, &rt).context("analysis: structural test")?,
        ));
        out.write_csv("ecdf_cc_fake.csv", &ecdf_rows(&rf))?;
        out.write_csv("ecdf_cc_true.csv", &ecdf_rows(&rt))?;
    } else {
        log::warn!("no --followers given; skipping the structural test");
    }
    out.write_csv("stats_report.csv", &rows)?;
    out.finish(
        cfg,
        json!({ "groups_from": source, "fake": fake.len(), "true": truth.len() }),
    )
}

#[derive(Serialize)]
struct InfluencerRow<'a> {
    rank: usize,
    node: &'a str,
    marginal_gain: f64,
    cumulative_sigma: f64,
}

#[derive(Serialize)]
struct AppearanceCsvRow<'a> {
    node: &'a str,
    fake: usize,
    #[serde(rename = "true")]
    truth: usize,
    fake_pct: Option<f64>,
}

fn rank_component(
    model: &ModelFile,
    m: usize,
    top: usize,
    cfg: &RunConfig,
    names: &Interner,
) -> Result<InfluencerRanking> {
    let name = component_name(m);
    let comp = model.params.component(m);
    let graph = comp.to_graph(names.clone())?;
    greedy_influencers(
        &graph,
        comp,
        top.min(graph.node_count()),
        cfg.rounds,
        rng::child_seed(cfg.seed, m as u64),
        &name,
    )
    .with_context(|| format!("influence: ranking component {name}"))
}

fn influencers(cfg: &RunConfig, a: &InfluencerArgs) -> Result<()> {
    let mut names = Interner::new();
    let cascades = match &cfg.cascades {
        Some(p) => Some(load_cascades(p, cfg, &mut names)?),
        None => None,
    };
    let model = load(cfg, &mut names)?;
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let mut summaries = serde_json::Map::new();
    for m in 0..model.params.k() {
        let ranking = rank_component(&model, m, a.top, cfg, &names)?;
        let rows: Vec<InfluencerRow> = ranking
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| InfluencerRow {
                rank: i + 1,
                node: names.name(e.node),
                marginal_gain: e.marginal_gain,
                cumulative_sigma: e.cumulative,
            })
            .collect();
        out.write_csv(&format!("influencers_{}.csv", ranking.component), &rows)?;
        if let Some(cascades) = &cascades {
            let stats = appearance_stats(&ranking.nodes(), cascades);
            let rows: Vec<AppearanceCsvRow> = stats
                .rows
                .iter()
                .map(|r| AppearanceCsvRow {
                    node: names.name(r.node),
                    fake: r.fake,
                    truth: r.truth,
                    fake_pct: r.fake_pct,
                })
                .collect();
            out.write_csv(&format!("appearance_{}.csv", ranking.component), &rows)?;
            summaries.insert(ranking.component.clone(), json!(stats.summary()));
        }
    }
    out.finish(cfg, json!({ "appearance_summary": summaries }))
}

/// Budgets no larger than `available`, sorted and deduplicated.
fn usable_budgets(budgets: &[usize], available: usize, what: &str) -> Result<Vec<usize>> {
    let mut ks: Vec<usize> = budgets.iter().copied().filter(|&k| k > 0).collect();
    ks.sort_unstable();
    ks.dedup();
    let kept: Vec<usize> = ks.iter().copied().filter(|&k| k <= available).collect();
    if kept.len() < ks.len() {
        log::warn!("{what}: dropping budgets above the {available} candidates");
    }
    if kept.is_empty() {
        bail!("{what}: no budget fits the {available} candidates");
    }
    Ok(kept)
}

#[derive(Serialize)]
struct InterventionCsvRow<'a> {
    strategy: &'a str,
    #[serde(rename = "K")]
    k: usize,
    mean_reduction_pct: f64,
    std_error: f64,
    n_eval: usize,
}

fn report_rows(reports: &[InterventionReport]) -> Vec<InterventionCsvRow<'_>> {
    reports
        .iter()
        .flat_map(|r| {
            r.rows.iter().map(|row| InterventionCsvRow {
                strategy: &r.strategy,
                k: row.k,
                mean_reduction_pct: row.mean_reduction_pct,
                std_error: row.std_error,
                n_eval: row.n_eval,
            })
        })
        .collect()
}

fn intervene(cfg: &RunConfig, a: &InterveneArgs) -> Result<()> {
    let mut names = Interner::new();
    let cascades = load_cascades(cfg.require_cascades()?, cfg, &mut names)?;
    let model = load(cfg, &mut names)?;
    if model.params.k() != 2 {
        bail!(
            "intervene: needs a two-component model, got k = {}",
            model.params.k()
        );
    }
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let (fake, _, source) = split_groups(&cascades, Some(&model), cfg)?;
    if fake.is_empty() {
        bail!("intervene: no fake cascades to evaluate");
    }
    let max_k = a.budgets.iter().copied().max().unwrap_or(0);

    let ranking = rank_component(&model, 1, max_k, cfg, &names)?;
    let mic_nodes = node_strategy_mic(&ranking)?;
    let topu = node_strategy_topu(&fake);
    let mut node_reports = Vec::new();
    for (strategy, order) in [("MIC", &mic_nodes), ("TopU", &topu)] {
        let ks = usable_budgets(&a.budgets, order.len(), strategy)?;
        node_reports.push(
            node_intervention_eval(&fake, order, &ks, strategy)
                .with_context(|| format!("intervention: node strategy {strategy}"))?,
        );
    }
    out.write_csv("intervention_node.csv", &report_rows(&node_reports))?;

    let fake_params = model.params.component(1);
    let graph = fake_params.to_graph(names.clone())?;
    let pool = head_users(&fake);
    let sim = EdgeEvalConfig {
        rounds: cfg.rounds,
        seed_set_size: 1,
        rng_seed: cfg.seed,
    };
    let mut edge_reports = Vec::new();
    for (strategy, order) in [
        ("MIC", edge_strategy_mic(fake_params)),
        ("Random", edge_strategy_random(&graph, cfg.seed)),
    ] {
        let ks = usable_budgets(&a.budgets, order.len(), strategy)?;
        edge_reports.push(
            edge_intervention_eval(&graph, fake_params, &order, &ks, &pool, &sim, strategy)
                .with_context(|| format!("intervention: edge strategy {strategy}"))?,
        );
    }
    out.write_csv("intervention_edge.csv", &report_rows(&edge_reports))?;
    out.finish(
        cfg,
        json!({ "groups_from": source, "fake_cascades": fake.len() }),
    )
}

fn dump(cfg: &RunConfig) -> Result<()> {
    let mut names = Interner::new();
    let cascades = load_cascades(cfg.require_cascades()?, cfg, &mut names)?;
    let text = dump_cascades(&cascades, &names);
    if cfg.out_explicit {
        let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
        out.write("cascades.jsonl", &text)?;
        out.finish(cfg, json!({ "cascades": cascades.len() }))
    } else {
        use std::io::Write;
        std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("writing to stdout")
    }
}

#[derive(Serialize)]
struct RecoverabilityRow {
    sample_size: usize,
    mixture: f64,
    edge_mae: f64,
    pi_mae: f64,
}

#[derive(Serialize)]
struct SeparabilityRow {
    sample_size: usize,
    mixture: f64,
    accuracy: f64,
    f1: f64,
}

fn sweep(cfg: &RunConfig, a: &SweepArgs) -> Result<()> {
    if cfg.fit.k != 2 {
        bail!("sweep: the benchmark has two components; --k must be 2");
    }
    let mut out = OutDir::prepare(&cfg.out, cfg.force)?;
    let bundle = build_bundle(cfg, &a.bench)?;
    let window = window_for(cfg, None);
    let evals: Vec<_> = bundle
        .sets
        .par_iter()
        .map(|set| {
            let r = evaluate_labelled_set(
                &set.cascades,
                &bundle.truth(set.weights),
                window,
                &cfg.fit,
                a.holdout,
                cfg.seed,
            );
            (set, r)
        })
        .collect();
    let mut written = 0;
    for &p in &a.bench.mixtures {
        let mut rec = Vec::new();
        let mut sep = Vec::new();
        for (set, r) in evals.iter().filter(|(s, _)| s.weights[0] == p) {
            match r {
                Ok(e) => {
                    rec.push(RecoverabilityRow {
                        sample_size: set.size,
                        mixture: p,
                        edge_mae: e.edge_mae,
                        pi_mae: e.pi_mae,
                    });
                    sep.push(SeparabilityRow {
                        sample_size: set.size,
                        mixture: p,
                        accuracy: e.accuracy,
                        f1: e.f1,
                    });
                }
                Err(e) => log::warn!("skipping π = {p}, n = {}: {e}", set.size),
            }
        }
        if rec.is_empty() {
            log::warn!("no results for π = {p}; writing no curve files");
            continue;
        }
        out.write_csv(&format!("recoverability_{}.csv", pi_tag(p)), &rec)?;
        out.write_csv(&format!("separability_{}.csv", pi_tag(p)), &sep)?;
        written += 1;
    }
    if written == 0 {
        log::warn!("sweep produced no reports");
    }
    out.finish(
        cfg,
        json!({ "mixtures_written": written, "window": window.to_string() }),
    )
}
