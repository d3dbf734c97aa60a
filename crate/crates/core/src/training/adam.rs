/// Adam with fixed `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`, one moment pair and
/// step counter per parameter block.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: Vec<u64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    pub fn new(lr: f64, block_sizes: &[usize]) -> Self {
        Self {
            lr,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: vec![0; block_sizes.len()],
        }
    }

    /// Updates every block whose `active` flag is set.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, active: impl Fn(usize) -> bool) {
        assert_eq!(params.len(), self.m.len(), "parameter block count");
        assert_eq!(grads.len(), self.m.len(), "gradient block count");
        for (b, (p, g)) in params.into_iter().zip(grads).enumerate() {
            if !active(b) {
                continue;
            }
            self.t[b] += 1;
            let t = self.t[b] as i32;
            let c1 = 1.0 - BETA1.powi(t);
            let c2 = 1.0 - BETA2.powi(t);
            let (m, v) = (&mut self.m[b], &mut self.v[b]);
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + EPS);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(0.1, &[2]);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(vec![&mut x], vec![&g], |_| true);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut x = vec![1.0];
        let mut opt = Adam::new(0.01, &[1]);
        opt.step(vec![&mut x], vec![&[5.0]], |_| true);
        assert!((x[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn inactive_blocks_are_untouched() {
        let mut a = vec![1.0];
        let mut b = vec![1.0];
        let mut opt = Adam::new(0.5, &[1, 1]);
        opt.step(vec![&mut a, &mut b], vec![&[1.0], &[1.0]], |i| i == 0);
        assert_ne!(a[0], 1.0);
        assert_eq!(b[0], 1.0);
    }
}
