//! Compensated summation helpers used by the exact enumerations.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }
}

/// Streaming log-weighted accumulator: a normalizer plus weighted sums of
/// several statistics, rescaled whenever a larger weight arrives.
#[derive(Debug, Clone)]
pub struct WeightedLogSum {
    max: f64,
    z: KahanSum,
    stats: Vec<KahanSum>,
}

impl WeightedLogSum {
    pub fn new(n_stats: usize) -> Self {
        Self {
            max: f64::NEG_INFINITY,
            z: KahanSum::new(),
            stats: vec![KahanSum::new(); n_stats],
        }
    }

    fn rescale(&mut self, new_max: f64) {
        let f = if self.max == f64::NEG_INFINITY {
            0.0
        } else {
            (self.max - new_max).exp()
        };
        self.z.scale(f);
        self.stats.iter_mut().for_each(|s| s.scale(f));
        self.max = new_max;
    }

    /// Adds a configuration of weight `exp(log_w)` with the given statistic values.
    pub fn add(&mut self, log_w: f64, values: impl IntoIterator<Item = (usize, f64)>) {
        if log_w == f64::NEG_INFINITY {
            return;
        }
        if log_w > self.max {
            self.rescale(log_w);
        }
        let w = (log_w - self.max).exp();
        self.z.add(w);
        for (i, v) in values {
            self.stats[i].add(w * v);
        }
    }

    pub fn log_z(&self) -> f64 {
        self.max + self.z.value().ln()
    }

    /// Weighted mean of statistic `i`.
    pub fn mean(&self, i: usize) -> f64 {
        self.stats[i].value() / self.z.value()
    }

    /// Log of the weighted sum of statistic `i` (an indicator gives a partial sum).
    pub fn log_stat(&self, i: usize) -> f64 {
        self.max + self.stats[i].value().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn weighted_sum_rescales() {
        let mut s = WeightedLogSum::new(1);
        s.add(0.0, [(0, 1.0)]);
        s.add(800.0, [(0, 0.0)]);
        s.add(800.0, [(0, 1.0)]);
        assert!((s.log_z() - (800.0 + 2f64.ln())).abs() < 1e-12);
        assert!((s.mean(0) - 0.5).abs() < 1e-12);
    }
}
