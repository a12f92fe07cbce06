use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Eigenvalue floor applied when the covariance loses definiteness.
const EIG_FLOOR: f64 = 1e-12;

/// Strategy parameters derived from dimension and elite count.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, mu: usize) -> Self {
        assert!(dim >= 1 && mu >= 1);
        let n = dim as f64;
        let raw: Vec<f64> = (0..mu).map(|i| ((mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).max(0.0)).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = if sum > 0.0 { raw.iter().map(|w| w / sum).collect() } else { vec![1.0] };
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self { dim, mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }
}

/// CMA-ES search distribution over the unit box `[0, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: u64,
    pub seed: u64,
    pub params: CmaParams,
    /// Number of eigenvalue-floor repairs so far.
    pub repairs: u64,
}

/// Seed for generation `gen` of a run seeded with `seed` (splitmix64 finalizer).
pub fn generation_seed(seed: u64, gen: u64) -> u64 {
    let mut z = seed ^ gen.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CmaState {
    pub fn new(mean: Vec<f64>, sigma: f64, mu: usize, seed: u64) -> Self {
        let n = mean.len();
        Self {
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            seed,
            params: CmaParams::new(n, mu),
            repairs: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn eigen(&self) -> (DMatrix<f64>, DVector<f64>) {
        let e = SymmetricEigen::new(self.cov.clone());
        let d = e.eigenvalues.map(|v| v.max(EIG_FLOOR).sqrt());
        (e.eigenvectors, d)
    }

    /// Draws `n` points from `N(mean, sigma^2 C)` and clips them into the unit box.
    /// The draw depends only on `(seed, generation)`.
    pub fn sample(&self, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(generation_seed(self.seed, self.generation));
        let (b, d) = self.eigen();
        let dim = self.dim();
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                let y = &b * d.component_mul(&z);
                (0..dim).map(|i| (self.mean[i] + self.sigma * y[i]).clamp(0.0, 1.0)).collect()
            })
            .collect()
    }

    /// One CMA-ES update from elites sorted best first (at most `mu` are used).
    pub fn update(&mut self, elites: &[Vec<f64>]) {
        let p = self.params.clone();
        let dim = self.dim();
        let mu = elites.len().min(p.mu).max(1);
        let w: Vec<f64> = {
            let s: f64 = p.weights[..mu].iter().sum();
            p.weights[..mu].iter().map(|x| x / s).collect()
        };
        let mu_eff = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
        let old = self.mean.clone();
        let ys: Vec<DVector<f64>> =
            elites[..mu].iter().map(|e| (DVector::from_column_slice(e) - &old) / self.sigma).collect();
        let mut y_w = DVector::zeros(dim);
        for (wi, y) in w.iter().zip(&ys) {
            y_w += y * *wi;
        }
        self.mean = &old + &y_w * self.sigma;

        let (b, d) = self.eigen();
        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        self.p_sigma = &self.p_sigma * (1.0 - p.c_sigma) + (&inv_sqrt * &y_w) * (p.c_sigma * (2.0 - p.c_sigma) * mu_eff).sqrt();
        let gen = (self.generation + 1) as f64;
        let ps_norm = self.p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - p.c_sigma).powf(2.0 * gen)).sqrt() < (1.4 + 2.0 / (dim as f64 + 1.0)) * p.chi_n;
        let hs = if h_sigma { 1.0 } else { 0.0 };
        self.p_c = &self.p_c * (1.0 - p.c_c) + &y_w * (hs * (p.c_c * (2.0 - p.c_c) * mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(dim, dim);
        for (wi, y) in w.iter().zip(&ys) {
            rank_mu += (y * y.transpose()) * *wi;
        }
        let delta_h = (1.0 - hs) * p.c_c * (2.0 - p.c_c);
        self.cov = &self.cov * (1.0 - p.c_1 - p.c_mu + p.c_1 * delta_h)
            + (&self.p_c * self.p_c.transpose()) * p.c_1
            + rank_mu * p.c_mu;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        let e = SymmetricEigen::new(self.cov.clone());
        if e.eigenvalues.iter().any(|&v| v < EIG_FLOOR) {
            log::warn!("covariance repaired at generation {}", self.generation);
            self.repairs += 1;
            let vals = e.eigenvalues.map(|v| v.max(EIG_FLOOR));
            let c = &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose();
            self.cov = (&c + c.transpose()) * 0.5;
        }
        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        self.generation += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_samples_equal_mean() {
        let s = CmaState::new(vec![0.2, 1.3, 0.5], 0.0, 2, 1);
        for x in s.sample(5) {
            assert_eq!(x, vec![0.2, 1.0, 0.5]);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = CmaState::new(vec![0.5; 8], 0.3, 50, 42);
        assert_eq!(s.sample(100), s.sample(100));
    }

    #[test]
    fn sample_mean_statistics() {
        let s = CmaState::new(vec![0.5; 8], 0.05, 50, 9);
        let n = 10_000;
        let xs = s.sample(n);
        for k in 0..8 {
            let m = xs.iter().map(|x| x[k]).sum::<f64>() / n as f64;
            assert!((m - 0.5).abs() < 3.0 * 0.05 / (n as f64).sqrt(), "coord {k}: {m}");
        }
    }

    #[test]
    fn elites_at_mean_keep_mean() {
        let mut s = CmaState::new(vec![0.4; 8], 0.3, 4, 0);
        let elites = vec![vec![0.4; 8]; 4];
        s.update(&elites);
        for v in s.mean.iter() {
            assert!((v - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn covariance_stays_symmetric() {
        let mut s = CmaState::new(vec![0.5; 8], 0.3, 10, 5);
        for g in 0..100 {
            let mut xs = s.sample(20);
            xs.sort_by(|a, b| {
                let fa: f64 = a.iter().enumerate().map(|(i, v)| (v - 0.1 * (i + g % 3) as f64 / 3.0).powi(2)).sum();
                let fb: f64 = b.iter().enumerate().map(|(i, v)| (v - 0.1 * (i + g % 3) as f64 / 3.0).powi(2)).sum();
                fa.total_cmp(&fb)
            });
            s.update(&xs[..10]);
            let asym = (&s.cov - s.cov.transpose()).amax();
            assert!(asym < 1e-12);
        }
    }

    #[test]
    fn converges_on_sphere() {
        let opt = [0.3, 0.7, 0.5, 0.2, 0.8, 0.4, 0.6, 0.35];
        let f = |x: &Vec<f64>| x.iter().zip(&opt).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut s = CmaState::new(vec![0.5; 8], 0.3, 50, 7);
        let mut gens = 0;
        while gens < 300 {
            let mut xs = s.sample(100);
            xs.sort_by(|a, b| f(a).total_cmp(&f(b)));
            s.update(&xs[..50]);
            gens += 1;
            let err = s.mean.iter().zip(&opt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if err < 1e-3 {
                break;
            }
        }
        assert!(gens < 300, "no convergence");
        assert!(s.sigma < 0.3);
    }
}
