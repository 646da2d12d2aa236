use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A reproducible random stream addressed by
/// `(master_seed, scenario_id, replication_id)`.
///
/// The ChaCha key is derived from the master seed and scenario id, and the
/// replication id selects the cipher's stream, so every replication owns a
/// disjoint counter space no matter which thread runs it or in what order.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    scenario_id: u64,
    replication_id: u64,
    rng: ChaCha12Rng,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, scenario_id: u64, replication_id: u64) -> Self {
        let mut state =
            master_seed ^ splitmix64(&mut scenario_id.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(replication_id);
        Self {
            master_seed,
            scenario_id,
            replication_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn scenario_id(&self) -> u64 {
        self.scenario_id
    }

    pub fn replication_id(&self) -> u64 {
        self.replication_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        debug_assert!(sd > 0.0, "normal sd must be positive");
        let z: f64 = self.rng.sample(StandardNormal);
        mean + sd * z
    }

    pub fn bernoulli(&mut self, p: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&p), "bernoulli p outside [0, 1]");
        if self.uniform() < p {
            1.0
        } else {
            0.0
        }
    }

    /// Uniform integer in `0..upper`.
    pub fn index(&mut self, upper: usize) -> usize {
        self.rng.random_range(0..upper)
    }
}
