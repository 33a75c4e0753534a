use crate::corpus::PAD;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Titles laid out position-major: row `t * size + b` holds token `t` of title `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TitleBatch {
    pub(crate) ids: Vec<usize>,
    pub(crate) len: usize,
    pub(crate) size: usize,
    /// Per title, the number of positions that count: its length after
    /// trailing padding is trimmed, raised to `min_len`.
    pub(crate) effective: Vec<usize>,
}

impl TitleBatch {
    /// Trailing padding is trimmed and every title is right-padded to at
    /// least `min_len` (the widest convolution window).
    pub fn new(titles: &[&[usize]], min_len: usize) -> Result<Self> {
        if titles.is_empty() {
            return Err(Error::invalid("empty title batch"));
        }
        let mut trimmed = Vec::with_capacity(titles.len());
        for t in titles {
            let end = t.iter().rposition(|&id| id != PAD).map_or(0, |i| i + 1);
            if end == 0 {
                return Err(Error::View { view: "title", message: "title has no tokens".into() });
            }
            trimmed.push(&t[..end]);
        }
        let effective: Vec<usize> = trimmed.iter().map(|t| t.len().max(min_len)).collect();
        let len = *effective.iter().max().expect("non-empty");
        let size = titles.len();
        let mut ids = vec![PAD; len * size];
        for (b, t) in trimmed.iter().enumerate() {
            for (p, &id) in t.iter().enumerate() {
                ids[p * size + b] = id;
            }
        }
        Ok(Self { ids, len, size, effective })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Sentences of a batch of articles.
///
/// Word level: every sentence of every article is one row, words laid out
/// position-major (`t * sentences + s`). Sentence level: article `b`'s `j`-th
/// sentence sits at row `j * size + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentBatch {
    pub(crate) word_ids: Vec<usize>,
    pub(crate) max_words: usize,
    pub(crate) sentence_lens: Vec<usize>,
    /// Sentence rows belonging to each article, in order.
    pub(crate) articles: Vec<Vec<usize>>,
    pub(crate) max_sentences: usize,
}

impl ContentBatch {
    /// Keeps at most `max_sentences` non-empty sentences per article and
    /// `max_words` words per sentence.
    pub fn new(articles: &[&[Vec<usize>]], max_sentences: usize, max_words: usize) -> Result<Self> {
        if articles.is_empty() {
            return Err(Error::invalid("empty content batch"));
        }
        let mut sentences: Vec<&[usize]> = Vec::new();
        let mut rows = Vec::with_capacity(articles.len());
        for a in articles {
            let mut mine = Vec::new();
            for s in a.iter().filter(|s| !s.is_empty()).take(max_sentences) {
                mine.push(sentences.len());
                sentences.push(&s[..s.len().min(max_words)]);
            }
            if mine.is_empty() {
                return Err(Error::View { view: "content", message: "article has no sentences".into() });
            }
            rows.push(mine);
        }
        let n = sentences.len();
        let width = sentences.iter().map(|s| s.len()).max().expect("non-empty");
        let mut word_ids = vec![PAD; width * n];
        for (s, words) in sentences.iter().enumerate() {
            for (t, &id) in words.iter().enumerate() {
                word_ids[t * n + s] = id;
            }
        }
        let max_sentences = rows.iter().map(Vec::len).max().expect("non-empty");
        Ok(Self {
            word_ids,
            max_words: width,
            sentence_lens: sentences.iter().map(|s| s.len()).collect(),
            articles: rows,
            max_sentences,
        })
    }

    pub fn size(&self) -> usize {
        self.articles.len()
    }

    pub fn sentences(&self) -> usize {
        self.sentence_lens.len()
    }

    /// Per word step, a sentences x 1 validity column, or `None` when every
    /// sentence is still running.
    pub(crate) fn word_masks(&self) -> Vec<Option<Tensor>> {
        step_masks(&self.sentence_lens, self.max_words)
    }

    pub(crate) fn sentence_masks(&self) -> Vec<Option<Tensor>> {
        let lens: Vec<usize> = self.articles.iter().map(Vec::len).collect();
        step_masks(&lens, self.max_sentences)
    }

    /// Source rows for the sentence-level sequence, position-major.
    pub(crate) fn sentence_gather(&self) -> Vec<Option<usize>> {
        let b = self.size();
        let mut idx = vec![None; self.max_sentences * b];
        for (a, rows) in self.articles.iter().enumerate() {
            for (j, &r) in rows.iter().enumerate() {
                idx[j * b + a] = Some(r);
            }
        }
        idx
    }
}

fn step_masks(lens: &[usize], steps: usize) -> Vec<Option<Tensor>> {
    (0..steps)
        .map(|t| {
            if lens.iter().all(|&l| t < l) {
                None
            } else {
                let col = lens.iter().map(|&l| if t < l { 1.0 } else { 0.0 }).collect();
                Some(Tensor::matrix(lens.len(), 1, col).expect("column"))
            }
        })
        .collect()
}

/// `rows x steps` additive mask: 0 where valid, a large negative number past
/// each row's length. `None` when nothing is masked.
pub(crate) fn score_mask(lens: &[usize], steps: usize) -> Option<Tensor> {
    if lens.iter().all(|&l| l == steps) {
        return None;
    }
    let data = lens.iter().flat_map(|&l| (0..steps).map(move |t| if t < l { 0.0 } else { -1e30 })).collect();
    Some(Tensor::matrix(lens.len(), steps, data).expect("mask shape"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_padding_and_trim() {
        let b = TitleBatch::new(&[&[5, 6], &[7, 8, 9, 2, 3, 4, 0, 0]], 5).unwrap();
        assert_eq!(b.len, 6);
        assert_eq!(b.effective, vec![5, 6]);
        assert_eq!(&b.ids[0..2], &[5, 7]);
        assert_eq!(&b.ids[10..12], &[0, 4]);
    }

    #[test]
    fn empty_title_names_view() {
        let err = TitleBatch::new(&[&[0, 0]], 5).unwrap_err();
        assert!(matches!(err, Error::View { view: "title", .. }));
    }

    #[test]
    fn content_layout() {
        let a: Vec<Vec<usize>> = vec![vec![2, 3], vec![4]];
        let b: Vec<Vec<usize>> = vec![vec![], vec![5, 6, 7]];
        let batch = ContentBatch::new(&[&a, &b], 10, 10).unwrap();
        assert_eq!(batch.sentence_lens, vec![2, 1, 3]);
        assert_eq!(batch.articles, vec![vec![0, 1], vec![2]]);
        assert_eq!(batch.sentence_gather(), vec![Some(0), Some(2), Some(1), None]);
        // position 1 across the three sentences
        assert_eq!(&batch.word_ids[3..6], &[3, 0, 6]);
        assert!(batch.word_masks()[0].is_none());
        assert_eq!(batch.word_masks()[1].as_ref().unwrap().data(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn caps_apply() {
        let a: Vec<Vec<usize>> = vec![vec![2, 3, 4, 5], vec![4], vec![6]];
        let batch = ContentBatch::new(&[&a], 2, 3).unwrap();
        assert_eq!(batch.sentence_lens, vec![3, 1]);
    }

    #[test]
    fn no_sentences_names_view() {
        let a: Vec<Vec<usize>> = vec![vec![]];
        let err = ContentBatch::new(&[&a], 5, 5).unwrap_err();
        assert!(matches!(err, Error::View { view: "content", .. }));
    }
}
