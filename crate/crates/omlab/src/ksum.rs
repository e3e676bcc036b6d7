//! Compensated summation.
//!
//! Every integral in the crate is a finite sum of cell contributions
//! accumulated in a fixed order with Neumaier's variant of Kahan summation,
//! so results are bit-identical across runs and thread counts.

/// Neumaier (improved Kahan) accumulator for f64.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.s + self.c
    }
}

/// Sum an iterator in its own order with compensation.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for v in iter {
        acc.add(v);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation() {
        let mut s = NeumaierSum::new();
        for v in [1e200, 0.1, 0.2, 0.3, -1e200] {
            s.add(v);
        }
        assert!((s.total() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn long_sum_beats_naive() {
        let xs: Vec<f64> = (0..100_000).map(|i| 0.1 + (i as f64) * 1e-9).collect();
        let compensated = sum(xs.iter().copied());
        let exact: f64 = 0.1 * 100_000.0 + 1e-9 * (99_999.0 * 100_000.0 / 2.0);
        assert!((compensated - exact).abs() / exact < 1e-15);
    }
}
