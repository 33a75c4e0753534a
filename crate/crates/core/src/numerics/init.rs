use super::rng::Rng;
use super::tensor::Tensor;

/// `rows x cols` with entries uniform in `[-bound, bound]`.
pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::matrix(rows, cols, data).expect("length matches")
}

/// Glorot uniform: bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    uniform(rows, cols, (6.0 / (rows + cols) as f64).sqrt(), rng)
}
