use super::batch::TitleBatch;
use super::{EncoderConfig, WORD_EMBEDDING};
use crate::corpus::PAD;
use crate::error::Result;
use crate::numerics::{init, Graph, NodeId, ParamStore, Rng, Tensor};

/// Dropout is applied only in training mode.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}

pub fn init_title(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut Rng) {
    for &w in &cfg.windows {
        store.insert(format!("title.conv{w}.weight"), init::xavier(w * cfg.emb_dim, cfg.feature_maps, rng));
        store.insert(format!("title.conv{w}.bias"), Tensor::zeros(&[1, cfg.feature_maps]));
    }
    let pooled = cfg.windows.len() * cfg.feature_maps;
    store.insert("title.fc.weight", init::xavier(pooled, cfg.dim, rng));
    store.insert("title.fc.bias", Tensor::zeros(&[1, cfg.dim]));
}

/// Convolution with every window, ReLU, max-over-time pooling, dropout and a
/// fully connected layer. Returns `batch x dim`.
///
/// Positions whose window runs past a title's (padded) length are zeroed
/// before pooling, which cannot change the maximum of ReLU outputs.
pub fn title_forward(g: &mut Graph, cfg: &EncoderConfig, batch: &TitleBatch, mode: Mode) -> Result<NodeId> {
    let (b, e) = (batch.size, cfg.emb_dim);
    let table = g.param_by_name(WORD_EMBEDDING)?;
    let emb = g.embedding(table, &batch.ids, Some(PAD))?;
    let mut pooled = Vec::with_capacity(cfg.windows.len());
    for &w in &cfg.windows {
        let positions = batch.len + 1 - w;
        let shifted: Vec<NodeId> = (0..w).map(|k| g.slice(emb, k * b, positions * b, 0, e)).collect::<Result<_>>()?;
        let cols = g.concat_cols(&shifted)?;
        let weight = g.param_by_name(&format!("title.conv{w}.weight"))?;
        let bias = g.param_by_name(&format!("title.conv{w}.bias"))?;
        let conv = g.matmul(cols, weight)?;
        let conv = g.add(conv, bias)?;
        let mut act = g.relu(conv);
        if batch.effective.iter().any(|&l| l < batch.len) {
            let mask: Vec<f64> = (0..positions)
                .flat_map(|p| batch.effective.iter().map(move |&l| if p + w <= l { 1.0 } else { 0.0 }))
                .collect();
            let m = g.constant(Tensor::matrix(positions * b, 1, mask)?);
            act = g.mul_col(act, m)?;
        }
        pooled.push(g.block_max(act, positions)?);
    }
    let mut features = g.concat_cols(&pooled)?;
    if let Mode::Train(rng) = mode {
        if cfg.dropout > 0.0 {
            let keep = 1.0 - cfg.dropout;
            let (r, c) = g.value(features).dims2();
            let mask = (0..r * c).map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 }).collect();
            let m = g.constant(Tensor::matrix(r, c, mask)?);
            features = g.mul(features, m)?;
        }
    }
    let fc = g.param_by_name("title.fc.weight")?;
    let fc_b = g.param_by_name("title.fc.bias")?;
    let out = g.matmul(features, fc)?;
    g.add(out, fc_b)
}

/// Encodes one title of token ids.
pub fn encode_title(ids: &[usize], store: &ParamStore, cfg: &EncoderConfig, mode: Mode) -> Result<Vec<f64>> {
    let batch = TitleBatch::new(&[ids], cfg.max_window())?;
    let mut g = Graph::new(store);
    let z = title_forward(&mut g, cfg, &batch, mode)?;
    Ok(g.value(z).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{tiny_config, tiny_store};
    use super::*;
    use crate::numerics::fd_check;

    #[test]
    fn output_has_view_width() {
        let cfg = EncoderConfig { dim: 128, feature_maps: 100, ..tiny_config() };
        let store = tiny_store(&cfg, 1);
        let z = encode_title(&[2, 3, 4, 5, 6, 7, 8], &store, &cfg, Mode::Eval).unwrap();
        assert_eq!(z.len(), 128);
        let g_feature_width = cfg.windows.len() * cfg.feature_maps;
        assert_eq!(g_feature_width, 300);
        assert_eq!(store.get("title.fc.weight").unwrap().shape(), &[300, 128]);
    }

    #[test]
    fn zero_filters_give_fc_bias() {
        let cfg = tiny_config();
        let mut store = tiny_store(&cfg, 2);
        for &w in &cfg.windows {
            let id = store.id(&format!("title.conv{w}.weight")).unwrap();
            store.value_mut(id).data_mut().fill(0.0);
        }
        let bias_id = store.id("title.fc.bias").unwrap();
        store.value_mut(bias_id).data_mut().copy_from_slice(&[0.1, -0.2, 0.3, 0.4, 0.5, -0.6]);
        let z = encode_title(&[2, 3, 4], &store, &cfg, Mode::Eval).unwrap();
        assert_eq!(z, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]);
    }

    #[test]
    fn short_title_is_padded() {
        let cfg = tiny_config();
        let store = tiny_store(&cfg, 3);
        let z = encode_title(&[4, 9], &store, &cfg, Mode::Eval).unwrap();
        assert!(z.iter().all(|x| x.is_finite()));
        assert_eq!(z, encode_title(&[4, 9, PAD, PAD, PAD], &store, &cfg, Mode::Eval).unwrap());
    }

    #[test]
    fn trailing_padding_is_invisible() {
        let cfg = tiny_config();
        let store = tiny_store(&cfg, 4);
        let base = encode_title(&[2, 3, 4, 5, 6, 7], &store, &cfg, Mode::Eval).unwrap();
        for extra in 1..6 {
            let mut ids = vec![2, 3, 4, 5, 6, 7];
            ids.extend(std::iter::repeat_n(PAD, extra));
            assert_eq!(encode_title(&ids, &store, &cfg, Mode::Eval).unwrap(), base);
        }
    }

    #[test]
    fn batched_matches_single() {
        let cfg = tiny_config();
        let store = tiny_store(&cfg, 5);
        let titles: [&[usize]; 3] = [&[2, 3], &[4, 5, 6, 7, 8, 9, 10], &[11, 2, 3, 4, 5]];
        let batch = TitleBatch::new(&titles, cfg.max_window()).unwrap();
        let mut g = Graph::new(&store);
        let z = title_forward(&mut g, &cfg, &batch, Mode::Eval).unwrap();
        for (b, t) in titles.iter().enumerate() {
            let single = encode_title(t, &store, &cfg, Mode::Eval).unwrap();
            for (x, y) in g.value(z).row_slice(b).iter().zip(&single) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_title_is_a_title_error() {
        let cfg = tiny_config();
        let store = tiny_store(&cfg, 6);
        let err = encode_title(&[], &store, &cfg, Mode::Eval).unwrap_err();
        assert!(err.to_string().starts_with("title view"), "{err}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = EncoderConfig { dropout: 0.0, ..tiny_config() };
        let store = tiny_store(&cfg, 7);
        let titles: [&[usize]; 2] = [&[2, 3, 4], &[5, 6, 7, 8, 9, 10, 11]];
        let batch = TitleBatch::new(&titles, cfg.max_window()).unwrap();
        let report = fd_check(&store, 1e-4, |g| {
            let z = title_forward(g, &cfg, &batch, Mode::Eval)?;
            let sq = g.mul(z, z)?;
            Ok(g.sum_all(sq))
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
        // padding row never moves
        let emb = store.id(WORD_EMBEDDING).unwrap();
        let mut g = Graph::new(&store);
        let z = title_forward(&mut g, &cfg, &batch, Mode::Eval).unwrap();
        let s = g.sum_all(z);
        let grads = g.backward(s).unwrap();
        assert!(grads.by_id(emb).row_slice(PAD).iter().all(|&x| x == 0.0));
    }
}
