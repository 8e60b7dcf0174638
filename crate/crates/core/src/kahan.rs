//! Compensated (Neumaier) summation, used by the optional high-accuracy
//! accumulation mode for observables.

/// Running Neumaier sum. Deterministic for a fixed input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Accumulation mode for observable sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// Plain f64 accumulation in a fixed order; bit-reproducible.
    #[default]
    Plain,
    /// Neumaier compensated accumulation; also deterministic, smaller roundoff.
    Compensated,
}

/// Sums `it` in iteration order under the given mode.
pub fn sum_with<I: IntoIterator<Item = f64>>(mode: Precision, it: I) -> f64 {
    match mode {
        Precision::Plain => it.into_iter().sum(),
        Precision::Compensated => {
            let mut acc = Neumaier::new();
            for x in it {
                acc.add(x);
            }
            acc.value()
        }
    }
}
