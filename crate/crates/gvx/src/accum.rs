/// Neumaier-compensated running sum that also tracks the largest term seen.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
    abs_sum: f64,
    max_abs: f64,
}

impl Compensated {
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
        self.abs_sum += x.abs();
        self.max_abs = self.max_abs.max(x.abs());
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Sum of absolute values of the terms.
    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// A conservative rounding-error bound for the compensated result.
    pub fn rounding_bound(&self) -> f64 {
        4.0 * f64::EPSILON * self.value().abs() + 2.0 * f64::EPSILON * f64::EPSILON * self.abs_sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_addend_after_cancellation() {
        let mut s = Compensated::new();
        for x in [1e16, 1.0, -1e16, 3.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 4.0);
        assert_eq!(s.max_abs(), 1e16);
    }
}
