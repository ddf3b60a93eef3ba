//! Large-scale path loss plus time-correlated Rayleigh fading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{PhyConfig, Topology};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// Mean power gain `10^(-L0/10) · d^(-n)` for distance `d` in metres.
pub fn path_gain(distance_m: f64, exponent: f64, reference_loss_db: f64) -> f64 {
    db_to_linear(-reference_loss_db) * distance_m.max(1.0).powf(-exponent)
}

/// Bessel function of the first kind, order zero, by its power series.
///
/// Accurate to ~1e-12 for |x| <= 20, far beyond the arguments used here.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// One complex Gaussian AR(1) process `h' = ρh + sqrt(1-ρ²)w`, stationary
/// with `E|h|² = 1`, so `|h|²` is Exponential(1).
#[derive(Debug, Clone)]
pub struct FadingProcess {
    re: f64,
    im: f64,
    rho: f64,
    innovation: f64,
    rng: ChaCha8Rng,
}

impl FadingProcess {
    /// `rho` is the lag-one correlation of the complex coefficient.
    pub fn new(rho: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = s * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let im = s * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let rho = rho.clamp(-1.0, 1.0);
        FadingProcess {
            re,
            im,
            rho,
            innovation: (1.0 - rho * rho).sqrt() * s,
            rng,
        }
    }

    /// Correlation calibrated to Clarke's `J0(2π f_d T)` at step `T`.
    pub fn jakes_rho(doppler_hz: f64, step_s: f64) -> f64 {
        bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * step_s)
    }

    pub fn step(&mut self) {
        let wr: f64 = StandardNormal.sample(&mut self.rng);
        let wi: f64 = StandardNormal.sample(&mut self.rng);
        self.re = self.rho * self.re + self.innovation * wr;
        self.im = self.rho * self.im + self.innovation * wi;
    }

    pub fn coefficient(&self) -> (f64, f64) {
        (self.re, self.im)
    }

    pub fn power(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Fading state for every unordered node pair, so `i→j` and `j→i` always see
/// the same gain.
#[derive(Debug, Clone)]
pub struct ChannelField {
    n: usize,
    mean_rx_mw: Vec<f64>,
    pairs: Vec<FadingProcess>,
}

impl ChannelField {
    pub fn new(topology: &Topology, phy: &PhyConfig, seed: u64) -> Self {
        let n = topology.nodes.len();
        let tx_mw = dbm_to_mw(phy.tx_power_dbm);
        let rho = FadingProcess::jakes_rho(phy.doppler_hz, phy.coherence_step_us as f64 * 1e-6);
        let mut mean_rx_mw = vec![0.0; n * n];
        let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let g = path_gain(
                        topology.distance(i, j),
                        phy.path_loss_exponent,
                        phy.reference_loss_db,
                    );
                    mean_rx_mw[i * n + j] = tx_mw * g;
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                // Stream 0 belongs to the MAC; pair streams start at 1.
                let stream = 1 + (i * n + j) as u64;
                pairs.push(FadingProcess::new(rho, seed, stream));
            }
        }
        ChannelField {
            n,
            mean_rx_mw,
            pairs,
        }
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // Row-major offset into the strict upper triangle.
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn fading(&self, i: usize, j: usize) -> f64 {
        self.pairs[self.pair_index(i, j)].power()
    }

    /// Instantaneous received power (mW) at `j` when `i` transmits.
    pub fn rx_power(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.mean_rx_mw[i * self.n + j] * self.fading(i, j)
    }

    pub fn mean_rx_power(&self, i: usize, j: usize) -> f64 {
        self.mean_rx_mw[i * self.n + j]
    }

    /// Received power of node `i` at every node.
    pub fn rx_row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.rx_power(i, j)).collect()
    }

    pub fn step(&mut self) {
        self.pairs.iter_mut().for_each(FadingProcess::step);
    }
}
