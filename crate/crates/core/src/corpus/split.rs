use std::collections::BTreeMap;

use super::article::{Corpus, Ideology};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Stratified train/validation/test partition.
///
/// Split sizes are apportioned from the global totals (largest remainder),
/// then distributed over labels so each split tracks the global label mix.
/// Deterministic given `seed`.
pub fn split(corpus: &Corpus, fractions: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|x| !(0.0..=1.0).contains(x)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions {f:?} must be in [0,1] and sum to 1")));
    }
    let n = corpus.len();
    let totals = apportion(n, &f);
    if totals.iter().any(|&t| t == 0) {
        return Err(Error::invalid(format!("split of {n} articles with fractions {f:?} leaves an empty part")));
    }

    // strata keyed by label; unlabeled articles form their own stratum
    let mut strata: BTreeMap<Option<Ideology>, Vec<usize>> = BTreeMap::new();
    for (i, a) in corpus.articles().iter().enumerate() {
        strata.entry(a.label).or_default().push(i);
    }
    let mut rng = Rng::new(seed);
    for members in strata.values_mut() {
        rng.shuffle(members);
    }

    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let cells = controlled_round(&sizes, &totals, &f);

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (members, row) in strata.values().zip(&cells) {
        let mut offset = 0;
        for (s, &count) in row.iter().enumerate() {
            parts[s].extend_from_slice(&members[offset..offset + count]);
            offset += count;
        }
    }
    let build = |mut idx: Vec<usize>| {
        idx.sort_unstable();
        Corpus::new(idx.into_iter().map(|i| corpus.articles()[i].clone()).collect())
    };
    let [a, b, c] = parts;
    Ok((build(a)?, build(b)?, build(c)?))
}

/// Largest-remainder rounding of `n * f` to integers summing to `n`.
fn apportion(n: usize, f: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = f.iter().map(|x| x * n as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest = n - out.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if f[i] > 0.0 {
            out[i] += 1;
            rest -= 1;
        }
    }
    out
}

/// Integer table with row sums `rows` and column sums `cols`, close to the
/// proportional table `rows[i] * f[j]`.
fn controlled_round(rows: &[usize], cols: &[usize], f: &[f64]) -> Vec<Vec<usize>> {
    let mut cells: Vec<Vec<usize>> =
        rows.iter().map(|&r| f.iter().map(|x| (r as f64 * x).floor() as usize).collect()).collect();
    let mut row_def: Vec<usize> = rows.iter().zip(&cells).map(|(r, c)| r - c.iter().sum::<usize>()).collect();
    let mut col_def: Vec<isize> = cols
        .iter()
        .enumerate()
        .map(|(j, &c)| c as isize - cells.iter().map(|row| row[j]).sum::<usize>() as isize)
        .collect();

    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        for (j, x) in f.iter().enumerate() {
            let q = r as f64 * x;
            candidates.push((i, j, q - q.floor()));
        }
    }
    candidates.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then((a.0, a.1).cmp(&(b.0, b.1))));
    for &(i, j, _) in &candidates {
        if row_def[i] > 0 && col_def[j] > 0 {
            cells[i][j] += 1;
            row_def[i] -= 1;
            col_def[j] -= 1;
        }
    }
    // anything left: first cell with both deficits open
    while let Some(i) = row_def.iter().position(|&d| d > 0) {
        let j = col_def.iter().position(|&d| d > 0).expect("deficits balance");
        cells[i][j] += 1;
        row_def[i] -= 1;
        col_def[j] -= 1;
    }
    cells
}
