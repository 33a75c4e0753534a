use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Axis, Graph, NodeId};

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;
/// Starting bias of every log-variance head, so stochastic units begin
/// almost deterministic (standard deviation about 0.02).
pub const LOGVAR_BIAS_INIT: f64 = -8.0;

/// Diagonal Gaussian given by its mean and log-variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDiag {
    pub mean: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl GaussianDiag {
    /// Log-variances are clamped to `[LOGVAR_MIN, LOGVAR_MAX]`.
    pub fn new(mean: Vec<f64>, logvar: Vec<f64>) -> Result<Self> {
        if mean.len() != logvar.len() {
            return Err(Error::shape(format!("mean {} vs logvar {}", mean.len(), logvar.len())));
        }
        if mean.iter().chain(&logvar).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        let logvar = logvar.into_iter().map(|l| l.clamp(LOGVAR_MIN, LOGVAR_MAX)).collect();
        Ok(Self { mean, logvar })
    }

    /// `N(0, I)`.
    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], logvar: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.logvar.iter().map(|l| l.exp()).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        x.iter()
            .zip(&self.mean)
            .zip(&self.logvar)
            .map(|((x, m), l)| -0.5 * (ln2pi + l + (x - m).powi(2) / l.exp()))
            .sum()
    }
}

/// Reparameterized draw `mean + exp(logvar / 2) * eps`.
pub fn sample_latent(q: &GaussianDiag, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != q.dim() {
        return Err(Error::shape(format!("noise {} vs dimension {}", eps.len(), q.dim())));
    }
    Ok(q.mean.iter().zip(&q.logvar).zip(eps).map(|((m, l), e)| m + (0.5 * l).exp() * e).collect())
}

/// `KL(a || b)` between diagonal Gaussians, in closed form.
pub fn kl_diag_gauss(a: &GaussianDiag, b: &GaussianDiag) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("KL between dimensions {} and {}", a.dim(), b.dim())));
    }
    let mut total = 0.0;
    for j in 0..a.dim() {
        let ratio = (a.logvar[j] - b.logvar[j]).exp();
        let diff = a.mean[j] - b.mean[j];
        total += -0.5 * (1.0 + (a.logvar[j] - b.logvar[j]) - ratio - diff * diff / b.logvar[j].exp());
    }
    // the closed form can round a hair below zero when a == b
    Ok(total.max(0.0))
}

/// Per-row `KL(N(mu, exp(logvar)) || N(0, I))` as an `n x 1` column.
pub fn kl_to_standard(g: &mut Graph, mu: NodeId, logvar: NodeId) -> Result<NodeId> {
    let var = g.exp(logvar);
    let mu2 = g.mul(mu, mu)?;
    let a = g.add(var, mu2)?;
    let b = g.sub(a, logvar)?;
    let c = g.add_scalar(b, -1.0);
    let s = g.sum(c, Axis::Cols);
    Ok(g.scale(s, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ParamStore, Rng, Tensor};

    fn gd(mean: &[f64], var: &[f64]) -> GaussianDiag {
        GaussianDiag::new(mean.to_vec(), var.iter().map(|v| v.ln()).collect()).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let a = gd(&[0.3, -1.0], &[2.0, 0.5]);
        assert_eq!(kl_diag_gauss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn shifted_mean() {
        let kl = kl_diag_gauss(&gd(&[1.0, 0.0], &[1.0, 1.0]), &gd(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!((kl - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wider_variance() {
        let kl = kl_diag_gauss(&gd(&[0.0], &[4.0]), &gd(&[0.0], &[1.0])).unwrap();
        let expect = -0.5 * (1.0 + 4f64.ln() - 4.0);
        assert!((kl - expect).abs() < 1e-12);
        assert!((kl - 0.80685).abs() < 1e-5);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(kl_diag_gauss(&GaussianDiag::standard(2), &GaussianDiag::standard(3)).is_err());
    }

    #[test]
    fn logvar_is_clamped() {
        let g = GaussianDiag::new(vec![0.0, 0.0], vec![-50.0, 50.0]).unwrap();
        assert_eq!(g.logvar, vec![LOGVAR_MIN, LOGVAR_MAX]);
    }

    #[test]
    fn sampling_cases() {
        let q = GaussianDiag::new(vec![0.7, -2.0], vec![1.3, 0.1]).unwrap();
        assert_eq!(sample_latent(&q, &[0.0, 0.0]).unwrap(), q.mean);
        let unit = GaussianDiag::standard(1);
        assert_eq!(sample_latent(&unit, &[1.0]).unwrap(), vec![1.0]);
        let q = GaussianDiag::new(vec![1.0], vec![2.0 * 2f64.ln()]).unwrap();
        assert!((sample_latent(&q, &[0.5]).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn graph_form_matches_closed_form() {
        let mut rng = Rng::new(3);
        let mut s = ParamStore::new();
        s.insert("mu", Tensor::matrix(2, 3, rng.normals(6)).unwrap());
        s.insert("lv", Tensor::matrix(2, 3, rng.normals(6)).unwrap());
        let mut g = Graph::new(&s);
        let mu = g.param_by_name("mu").unwrap();
        let lv = g.param_by_name("lv").unwrap();
        let kl = kl_to_standard(&mut g, mu, lv).unwrap();
        for r in 0..2 {
            let q = GaussianDiag::new(
                s.get("mu").unwrap().row_slice(r).to_vec(),
                s.get("lv").unwrap().row_slice(r).to_vec(),
            )
            .unwrap();
            let want = kl_diag_gauss(&q, &GaussianDiag::standard(3)).unwrap();
            assert!((g.value(kl).data()[r] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_monte_carlo() {
        let mut rng = Rng::new(17);
        for _ in 0..5 {
            let draw = |rng: &mut Rng| {
                let lv = (0..8).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                GaussianDiag::new(rng.normals(8), lv).unwrap()
            };
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            let n = 100_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let x = sample_latent(&a, &rng.normals(8)).unwrap();
                acc += a.log_density(&x) - b.log_density(&x);
            }
            let mc = acc / n as f64;
            let exact = kl_diag_gauss(&a, &b).unwrap();
            assert!((mc - exact).abs() / exact < 0.01, "{mc} vs {exact}");
        }
    }
}
