use alloc::vec::Vec;

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: alloc::vec![0.0; num_params],
            v: alloc::vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(self.t));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (libm::sqrt(vh) + self.eps);
        }
    }
}
