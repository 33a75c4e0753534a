use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use mvdam::calibrank::{
    confidence_and_correct, expected_calibration_error, rank_sources, reliability_bins, reliability_csv,
    source_proportions, Calibrator,
};
use mvdam::corpus::{
    clean_corpus, load_corpus, load_corpus_with, split, synth_corpus, CleanConfig, Corpus, Ideology, SynthSpec,
    Vocabulary,
};
use mvdam::eval::{eval_metrics, run_ladder_with, LadderEntry, LadderOptions, MetricsReport, RunManifest};
use mvdam::graphembed::{build_graph, random_walks, train_embeddings, EmbeddingMatrix};
use mvdam::model::{gradcheck_suite, train, Model, PredictionRecord, Preset, Profile, TrainingConfig};
use mvdam::numerics::Rng;

use crate::{Cli, Command, Global, ProfileArg};

/// 2 for bad input (arguments, configs, records), 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<mvdam::Error>() {
            return match e {
                mvdam::Error::Io(_) | mvdam::Error::Checkpoint { .. } | mvdam::Error::NonFinite(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    // global flags are checked even by commands that do not use them
    training_config(&g, None)?;
    match cli.command {
        Command::Synth(a) => synth(&g, a),
        Command::Ingest(a) => ingest(a),
        Command::EmbedGraph(a) => embed_graph(&g, a),
        Command::Train(a) => train_cmd(&g, a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a, false),
        Command::ExportAttention(a) => predict(a, true),
        Command::Calibrate(a) => calibrate(a),
        Command::RankSources(a) => rank(a),
        Command::Ladder(a) => ladder(&g, a),
        Command::Gradcheck(a) => gradcheck(&g, a),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    load_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(mvdam::Error::from)
        .with_context(|| format!("parsing predictions {}", path.display()))
}

fn predictions_json(records: &[PredictionRecord]) -> String {
    serde_json::to_string_pretty(records).expect("predictions serialize") + "\n"
}

/// Profile, then config file, then preset, then `--views` and `--seed`.
fn training_config(g: &Global, preset: Option<Preset>) -> Result<TrainingConfig> {
    let profile = match g.profile {
        Some(ProfileArg::Paper) => Profile::Paper,
        _ => Profile::Desk,
    };
    let mut cfg = TrainingConfig::profile(profile);
    if let Some(path) = &g.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("config {}", path.display()))?;
    }
    if let Some(p) = preset {
        cfg = p.apply(&cfg);
    }
    if let Some(v) = &g.views {
        cfg.views = v.parse()?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_fractions(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| invalid(format!("bad split fraction {p:?}"))))
        .collect::<Result<_>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(invalid(format!("split needs three fractions, got {s:?}"))),
    }
}

pub fn metrics_table(r: &MetricsReport) -> String {
    let mut s = format!("{:<8} {:>9} {:>9} {:>9} {:>8}\n", "class", "precision", "recall", "f1", "support");
    for (l, c) in Ideology::ALL.iter().zip(&r.per_class) {
        s.push_str(&format!(
            "{:<8} {:>9.4} {:>9.4} {:>9.4} {:>8}\n",
            l.as_str(),
            c.precision,
            c.recall,
            c.f1,
            c.support
        ));
    }
    let n: usize = r.per_class.iter().map(|c| c.support).sum();
    s.push_str(&format!(
        "{:<8} {:>9.4} {:>9.4} {:>9.4} {:>8}\naccuracy {:.4}\n",
        "macro", r.macro_precision, r.macro_recall, r.macro_f1, n, r.accuracy
    ));
    s
}

fn score(records: &[PredictionRecord]) -> Result<MetricsReport> {
    let gold: Vec<Ideology> = records
        .iter()
        .map(|r| r.gold.ok_or_else(|| invalid(format!("article {:?} has no label", r.article_id))))
        .collect::<Result<_>>()?;
    let predicted: Vec<Ideology> = records.iter().map(|r| r.predicted).collect();
    Ok(eval_metrics(&predicted, &gold)?)
}

fn synth(g: &Global, a: crate::SynthArgs) -> Result<()> {
    let mut spec = SynthSpec {
        num_articles: a.articles,
        sources_per_block: a.sources_per_block,
        boilerplate: !a.no_boilerplate,
        ..SynthSpec::default()
    };
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    if let Some(v) = a.title_signal {
        spec.title_signal = v;
    }
    if let Some(v) = a.content_signal {
        spec.content_signal = v;
    }
    if let Some(v) = a.link_signal {
        spec.link_signal = v;
    }
    let corpus = synth_corpus(&spec)?;
    write(&a.out, &corpus.to_jsonl())?;
    println!("wrote {} articles from {} sources to {}", corpus.len(), corpus.sources().len(), a.out.display());
    Ok(())
}

fn ingest(a: crate::IngestArgs) -> Result<()> {
    let corpus = load_corpus_with(&a.input, a.raw).with_context(|| format!("reading corpus {}", a.input.display()))?;
    let cleaned = if a.no_clean { corpus.clone() } else { clean_corpus(&corpus, &CleanConfig::default()) };
    let count_links = |c: &Corpus| c.articles().iter().map(|x| x.links.len()).sum::<usize>();
    let count_sentences = |c: &Corpus| c.articles().iter().map(|x| x.sentences.len()).sum::<usize>();
    write(&a.out, &cleaned.to_jsonl())?;
    let (labels, unlabeled) = cleaned.label_counts();
    println!("articles   {}", cleaned.len());
    println!("sources    {}", cleaned.sources().len());
    println!("labels     left {} center {} right {} unlabeled {}", labels[0], labels[1], labels[2], unlabeled);
    println!("links      {} -> {}", count_links(&corpus), count_links(&cleaned));
    println!("sentences  {} -> {}", count_sentences(&corpus), count_sentences(&cleaned));
    println!("digest     {}", cleaned.digest());
    Ok(())
}

fn embed_graph(g: &Global, a: crate::EmbedGraphArgs) -> Result<()> {
    let cfg = training_config(g, None)?;
    let corpus = read_corpus(&a.corpus)?;
    let graph = build_graph(&corpus);
    if let Some(p) = &a.graph {
        write(p, &graph.to_tsv())?;
    }
    let walks = random_walks(&graph, &cfg.walks(), &mut Rng::stream(cfg.seed, 2))?;
    let emb = train_embeddings(&walks, &cfg.skipgram(), &mut Rng::stream(cfg.seed, 3))?;
    ensure_parent(&a.out)?;
    emb.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} nodes, {} edges, {} walks -> {} x {} embeddings in {}",
        graph.len(),
        graph.edge_count(),
        walks.len(),
        emb.len(),
        emb.dim(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(g: &Global, a: crate::TrainArgs) -> Result<()> {
    let start = Instant::now();
    let preset = a.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let cfg = training_config(g, preset)?;
    let corpus = read_corpus(&a.corpus)?;
    let (tr, va, te) = split(&corpus, parse_fractions(&a.split)?, cfg.seed)?;
    if let Some(dir) = &a.splits_dir {
        for (name, part) in [("train", &tr), ("val", &va), ("test", &te)] {
            write(&dir.join(format!("{name}.jsonl")), &part.to_jsonl())?;
        }
    }
    let mut model = match &a.embeddings {
        Some(p) if cfg.views.network => {
            let emb = EmbeddingMatrix::load(p).with_context(|| format!("reading embeddings {}", p.display()))?;
            let vocab = Vocabulary::build(&tr, cfg.min_count, Some(cfg.max_vocab))?;
            Model::new(cfg.clone(), vocab, Some(emb))?
        }
        _ => Model::from_corpus(&tr, cfg.clone())?,
    };
    let enc_tr = model.encode_all(tr.articles());
    let enc_va = model.encode_all(va.articles());
    let log = train(&mut model, &enc_tr, &enc_va)?;
    for e in &log.epochs {
        println!("epoch {:>3}  loss {:.5}  nll {:.5}  kl {:.5}  val_f1 {:.4}", e.epoch, e.loss, e.nll, e.kl, e.val_f1);
    }
    ensure_parent(&a.out)?;
    model.save(&a.out).with_context(|| format!("writing checkpoint {}", a.out.display()))?;
    if let Some(p) = &a.log {
        write(p, &log.to_csv())?;
    }
    let metrics = score(&model.predict_all(te.articles())?)?;
    println!("best epoch {:?}; test split:", log.best_epoch);
    print!("{}", metrics_table(&metrics));
    if let Some(p) = &a.manifest {
        let m = RunManifest {
            command: "train".into(),
            config: cfg.to_text(),
            seeds: vec![cfg.seed],
            corpus_digest: corpus.digest(),
            checkpoint: Some(a.out.display().to_string()),
            metrics: Some(metrics),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        };
        write(p, &(m.to_json() + "\n"))?;
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn eval(a: crate::EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let corpus = read_corpus(&a.corpus)?;
    let mut records = model.predict_all(corpus.articles())?;
    let metrics = score(&records)?;
    print!("{}", metrics_table(&metrics));
    if let Some(p) = &a.metrics {
        write(p, &metrics.to_csv())?;
    }
    if let Some(p) = &a.predictions {
        records.iter_mut().for_each(|r| r.attention = None);
        write(p, &predictions_json(&records))?;
    }
    Ok(())
}

fn predict(a: crate::PredictArgs, attention: bool) -> Result<()> {
    let model = load_model(&a.model)?;
    let corpus = read_corpus(&a.corpus)?;
    let mut records = model.predict_all(corpus.articles())?;
    if attention {
        if !model.config().views.content {
            bail!(invalid("attention export needs a model with the content view"));
        }
        let attn: Vec<_> = records.into_iter().filter_map(|r| r.attention).collect();
        write(&a.out, &(serde_json::to_string_pretty(&attn)? + "\n"))?;
        println!("wrote attention for {} articles to {}", attn.len(), a.out.display());
    } else {
        records.iter_mut().for_each(|r| r.attention = None);
        write(&a.out, &predictions_json(&records))?;
        println!("wrote {} predictions to {}", records.len(), a.out.display());
    }
    Ok(())
}

fn calibrate(a: crate::CalibrateArgs) -> Result<()> {
    let fit_on = read_predictions(&a.fit)?;
    let mut target = read_predictions(&a.apply)?;
    let cal = Calibrator::fit(&fit_on)?;
    cal.apply_all(&mut target);
    write(&a.out, &predictions_json(&target))?;
    if let Some(p) = &a.calibrator {
        write(p, &(serde_json::to_string_pretty(&cal)? + "\n"))?;
    }
    if target.iter().all(|r| r.gold.is_some()) {
        let (conf_raw, ok_raw) = confidence_and_correct(&target, false)?;
        let (conf_cal, ok_cal) = confidence_and_correct(&target, true)?;
        let before = expected_calibration_error(&conf_raw, &ok_raw, a.bins)?;
        let after = expected_calibration_error(&conf_cal, &ok_cal, a.bins)?;
        println!("ECE ({} bins) before {before:.5} after {after:.5}", a.bins);
        if let Some(p) = &a.reliability {
            write(p, &reliability_csv(&reliability_bins(&conf_cal, &ok_cal, a.bins)?))?;
        }
        if let Some(p) = &a.reliability_raw {
            write(p, &reliability_csv(&reliability_bins(&conf_raw, &ok_raw, a.bins)?))?;
        }
    } else if a.reliability.is_some() || a.reliability_raw.is_some() {
        bail!(invalid("reliability bins need gold labels on every calibrated prediction"));
    }
    println!("calibrated {} predictions into {}", target.len(), a.out.display());
    Ok(())
}

fn rank(a: crate::RankArgs) -> Result<()> {
    let ideology: Ideology = a.ideology.parse()?;
    let records = read_predictions(&a.predictions)?;
    let ranking = rank_sources(&source_proportions(&records)?, ideology, a.k)?;
    print!("{}", ranking.to_table());
    if let Some(p) = &a.csv {
        write(p, &ranking.to_csv())?;
    }
    Ok(())
}

fn ladder(g: &Global, a: crate::LadderArgs) -> Result<()> {
    let start = Instant::now();
    let base = training_config(g, None)?;
    let corpus = read_corpus(&a.corpus)?;
    let seeds: Vec<u64> = a
        .seeds
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| invalid(format!("bad seed {s:?}"))))
        .collect::<Result<_>>()?;
    let mut opts = LadderOptions { fractions: parse_fractions(&a.split)?, ..LadderOptions::default() };
    if let Some(list) = &a.entries {
        opts.entries = list.split(',').map(|e| e.trim().parse::<LadderEntry>()).collect::<Result<_, _>>()?;
    }
    let report = run_ladder_with(&corpus, &seeds, &base, &opts, &mut |step| {
        let r = step.run;
        eprintln!("seed {:>3}  {:<11} F1 {:.4}  ({:.1} s)", r.seed, r.entry.name(), r.metrics.macro_f1, r.seconds);
    })?;
    let table = report.to_table();
    print!("{table}");
    if let Some(dir) = &a.out_dir {
        write(&dir.join("ladder.csv"), &report.to_csv())?;
        write(&dir.join("ladder.txt"), &table)?;
        let m = RunManifest {
            command: "ladder".into(),
            config: base.to_text(),
            seeds,
            corpus_digest: corpus.digest(),
            checkpoint: None,
            metrics: report.runs.last().map(|r| r.metrics.clone()),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        };
        write(&dir.join("manifest.json"), &(m.to_json() + "\n"))?;
    }
    Ok(())
}

fn gradcheck(g: &Global, a: crate::GradcheckArgs) -> Result<()> {
    let cases = gradcheck_suite(g.seed.unwrap_or(1))?;
    for c in &cases {
        let worst = c.worst.as_ref().map(|(n, i)| format!("{n}[{i}]")).unwrap_or_default();
        println!(
            "{:<24} {:>6} elements  max rel err {:.3e}  {}  {}",
            c.name,
            c.checked,
            c.max_rel_error,
            if c.passes() { "ok" } else { "FAIL" },
            worst
        );
    }
    if let Some(p) = &a.json {
        write(p, &(serde_json::to_string_pretty(&cases)? + "\n"))?;
    }
    if let Some(c) = cases.iter().find(|c| !c.passes()) {
        return Err(anyhow!("gradient check failed for {}", c.name));
    }
    Ok(())
}
