//! Adam optimizer state for the branched net.

use ndarray::{Array1, Array2};

use super::net::{BranchedAutoencoder, Gradients, Mlp, MlpGrads};

/// Step size and moment decay settings.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over a flat parameter slice.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &AdamConfig,
) {
    debug_assert!(t >= 1);
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

struct PairState {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

/// First and second moment estimates for every layer of one mlp.
pub struct MlpAdam {
    layers: Vec<PairState>,
    t: u64,
}

impl MlpAdam {
    pub fn new(mlp: &Mlp) -> Self {
        let layers = mlp
            .layers
            .iter()
            .map(|l| PairState {
                m_w: Array2::zeros(l.w.raw_dim()),
                v_w: Array2::zeros(l.w.raw_dim()),
                m_b: Array1::zeros(l.b.raw_dim()),
                v_b: Array1::zeros(l.b.raw_dim()),
            })
            .collect();
        MlpAdam { layers, t: 0 }
    }

    /// Applies one update with this state's own step counter.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &MlpGrads, cfg: &AdamConfig) {
        self.t += 1;
        self.step_at(mlp, grads, self.t, cfg);
    }

    fn step_at(&mut self, mlp: &mut Mlp, grads: &MlpGrads, t: u64, cfg: &AdamConfig) {
        debug_assert_eq!(grads.len(), mlp.layers.len());
        for ((layer, state), (gw, gb)) in mlp.layers.iter_mut().zip(&mut self.layers).zip(grads) {
            adam_update(
                layer.w.as_slice_mut().unwrap(),
                gw.as_slice().unwrap(),
                state.m_w.as_slice_mut().unwrap(),
                state.v_w.as_slice_mut().unwrap(),
                t,
                cfg,
            );
            adam_update(
                layer.b.as_slice_mut().unwrap(),
                gb.as_slice().unwrap(),
                state.m_b.as_slice_mut().unwrap(),
                state.v_b.as_slice_mut().unwrap(),
                t,
                cfg,
            );
        }
    }
}

/// Optimizer state covering the encoder and every decoder, advancing one
/// shared step counter per update.
pub struct FullAdam {
    enc: MlpAdam,
    dec: Vec<MlpAdam>,
    t: u64,
}

impl FullAdam {
    pub fn new(net: &BranchedAutoencoder) -> Self {
        FullAdam {
            enc: MlpAdam::new(&net.encoder),
            dec: net.decoders.iter().map(MlpAdam::new).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut BranchedAutoencoder, grads: &Gradients, cfg: &AdamConfig) {
        self.t += 1;
        self.enc.step_at(&mut net.encoder, &grads.enc, self.t, cfg);
        for ((dec, state), g) in net.decoders.iter_mut().zip(&mut self.dec).zip(&grads.dec) {
            state.step_at(dec, g, self.t, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// On the first step the bias-corrected update reduces to a signed step
    /// of size lr regardless of the gradient magnitude (up to epsilon).
    #[test]
    fn first_step_moves_by_lr_in_gradient_direction() {
        let cfg = AdamConfig::default();
        let mut p = [1.0, -2.0, 0.5];
        let g = [10.0, -0.01, 3.0];
        let mut m = [0.0; 3];
        let mut v = [0.0; 3];
        adam_update(&mut p, &g, &mut m, &mut v, 1, &cfg);
        assert!((p[0] - (1.0 - cfg.lr)).abs() < 1e-6);
        assert!((p[1] - (-2.0 + cfg.lr)).abs() < 1e-5);
        assert!((p[2] - (0.5 - cfg.lr)).abs() < 1e-6);
    }

    /// Adam on a separable quadratic converges toward the minimum.
    #[test]
    fn drives_a_quadratic_toward_its_minimum() {
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let target = [3.0, -1.5];
        let mut p = [0.0, 0.0];
        let mut m = [0.0; 2];
        let mut v = [0.0; 2];
        for t in 1..=2000 {
            let g = [p[0] - target[0], p[1] - target[1]];
            adam_update(&mut p, &g, &mut m, &mut v, t, &cfg);
        }
        assert!((p[0] - target[0]).abs() < 1e-2, "p0 {}", p[0]);
        assert!((p[1] - target[1]).abs() < 1e-2, "p1 {}", p[1]);
    }

    #[test]
    fn zero_gradient_leaves_parameters_fixed() {
        let cfg = AdamConfig::default();
        let mut p = [0.7];
        let mut m = [0.0];
        let mut v = [0.0];
        adam_update(&mut p, &[0.0], &mut m, &mut v, 1, &cfg);
        assert_eq!(p[0], 0.7);
    }
}
