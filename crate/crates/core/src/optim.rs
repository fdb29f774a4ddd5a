//! Adam with bias correction, shared by the quantum and classical trainers.

#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One update of `params` against `grad` with step size `lr`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Step-decayed learning rate: `lr * factor^(epoch / every)`.
pub fn step_decay(lr: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    if every == 0 {
        return lr;
    }
    lr * factor.powi((epoch / every) as i32)
}

/// Binary cross-entropy of probability `p` against target `t` in {0, 1}.
pub fn bce(p: f64, t: f64) -> f64 {
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // bias correction makes the first step exactly lr * sign(g)
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[0.5, -3.0], 0.01);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(1);
        let mut p = vec![5.0];
        for _ in 0..5000 {
            let g = vec![2.0 * (p[0] - 2.0)];
            adam.step(&mut p, &g, 0.01);
        }
        assert!((p[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn decay_schedule() {
        assert_eq!(step_decay(0.01, 0.5, 30, 0), 0.01);
        assert_eq!(step_decay(0.01, 0.5, 30, 29), 0.01);
        assert_eq!(step_decay(0.01, 0.5, 30, 30), 0.005);
        assert_eq!(step_decay(0.01, 0.5, 30, 95), 0.00125);
        assert_eq!(step_decay(0.01, 0.5, 0, 95), 0.01);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        assert!((bce(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
