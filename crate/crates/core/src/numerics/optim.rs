use super::params::{Grads, ParamStore};
use crate::error::{Error, Result};

/// AdaDelta hyper-parameters. `lr` multiplies the computed update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaDelta {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
}

impl Default for AdaDelta {
    fn default() -> Self {
        Self { rho: 0.95, eps: 1e-6, lr: 1.0 }
    }
}

impl AdaDelta {
    /// Applies one update to every non-frozen parameter:
    ///
    /// ```text
    /// E[g^2]  <- rho E[g^2] + (1 - rho) g^2
    /// dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    /// E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
    /// x       <- x + lr dx
    /// ```
    pub fn step(&self, store: &mut ParamStore, grads: &Grads) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) || self.eps <= 0.0 {
            return Err(Error::invalid(format!(
                "adadelta needs 0 < rho < 1 and eps > 0 (rho={}, eps={})",
                self.rho, self.eps
            )));
        }
        if grads.len() != store.len() {
            return Err(Error::shape(format!("{} gradients for {} parameters", grads.len(), store.len())));
        }
        for id in store.ids().collect::<Vec<_>>() {
            if grads.by_id(id).shape() != store.value(id).shape() {
                return Err(Error::shape(format!(
                    "gradient for {} has shape {:?}, parameter {:?}",
                    store.name(id),
                    grads.by_id(id).shape(),
                    store.value(id).shape()
                )));
            }
        }
        let (rho, eps, lr) = (self.rho, self.eps, self.lr);
        for id in store.ids().collect::<Vec<_>>() {
            if store.is_frozen(id) {
                continue;
            }
            let g = grads.by_id(id).data();
            let (x, eg, edx) = store.entry_mut(id);
            for (((xi, egi), edxi), &gi) in x.data_mut().iter_mut().zip(eg.data_mut()).zip(edx.data_mut()).zip(g) {
                *egi = rho * *egi + (1.0 - rho) * gi * gi;
                let dx = -((*edxi + eps).sqrt() / (*egi + eps).sqrt()) * gi;
                *edxi = rho * *edxi + (1.0 - rho) * dx * dx;
                *xi += lr * dx;
            }
        }
        Ok(())
    }
}
