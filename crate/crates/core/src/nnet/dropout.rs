use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Predict,
}

/// Inverted dropout: in the training phase each unit is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`; the
/// prediction phase is the identity.
pub fn apply_dropout(h: &[f64], rate: f64, seed: u64, phase: Phase) -> Vec<f64> {
    if phase == Phase::Predict || rate == 0.0 {
        return h.to_vec();
    }
    let mut state = DropoutState::new(rate, seed);
    let keep = 1.0 / (1.0 - rate);
    h.iter()
        .map(|v| if state.keep() { v * keep } else { 0.0 })
        .collect()
}

/// Mask generator threaded through a training run.
#[derive(Debug, Clone)]
pub struct DropoutState {
    rate: f64,
    rng: ChaCha8Rng,
}

impl DropoutState {
    pub fn new(rate: f64, seed: u64) -> Self {
        Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn active(&self) -> bool {
        self.rate > 0.0
    }

    fn keep(&mut self) -> bool {
        self.rng.gen::<f64>() >= self.rate
    }

    /// A scaled keep-mask of the given shape, or `None` when inactive.
    pub fn mask(&mut self, rows: usize, cols: usize) -> Option<Array2<f64>> {
        if !self.active() {
            return None;
        }
        let keep = 1.0 / (1.0 - self.rate);
        Some(Array2::from_shape_fn((rows, cols), |_| {
            if self.keep() {
                keep
            } else {
                0.0
            }
        }))
    }
}
