use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use mvdam::calibrank::fit_isotonic;
use mvdam::graphembed::{build_graph, random_walks, train_embeddings};
use mvdam::model::{EncodedArticle, Model, Stochastic};
use mvdam::numerics::{Graph, Rng};
use mvdam_bench::{config, corpus};

fn graph_embedding(c: &mut Criterion) {
    let cfg = config();
    let graph = build_graph(&corpus(1000));
    c.bench_function("random_walks", |b| b.iter(|| random_walks(&graph, &cfg.walks(), &mut Rng::new(1)).unwrap()));
    let walks = random_walks(&graph, &cfg.walks(), &mut Rng::new(1)).unwrap();
    c.bench_function("skipgram_epoch", |b| {
        b.iter(|| train_embeddings(&walks, &cfg.skipgram(), &mut Rng::new(2)).unwrap())
    });
}

fn model(c: &mut Criterion) {
    let data = corpus(400);
    let model = Model::from_corpus(&data, config()).unwrap();
    let enc = model.encode_all(data.articles());
    let batch: Vec<&EncodedArticle> = enc.iter().take(32).collect();

    c.bench_function("predict_64", |b| b.iter(|| model.predict_encoded(&enc[..64]).unwrap()));
    c.bench_function("train_step_32", |b| {
        let mut rng = Rng::new(3);
        b.iter(|| {
            let mut g = Graph::new(model.store());
            let (mut drop, mut noise) = (rng.fork(), rng.fork());
            let fwd = model
                .forward(&mut g, &batch, Stochastic { dropout: Some(&mut drop), noise: Some(&mut noise) })
                .unwrap();
            let loss = model.loss_nodes(&mut g, &fwd, &batch, 1e-3).unwrap();
            g.backward(loss.total).unwrap()
        })
    });
}

fn isotonic(c: &mut Criterion) {
    let mut rng = Rng::new(4);
    c.bench_function("isotonic_fit_10k", |b| {
        b.iter_batched(
            || {
                let scores: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
                let targets: Vec<f64> = scores.iter().map(|&s| f64::from(u8::from(rng.uniform() < s))).collect();
                (scores, targets)
            },
            |(s, t)| fit_isotonic(&s, &t).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, graph_embedding, model, isotonic);
criterion_main!(benches);
