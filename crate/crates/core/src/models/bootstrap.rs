use crate::rng::RngStream;

/// Endless stream of draws, uniform with replacement, from a fixed sample.
#[derive(Debug)]
pub struct BootstrapStream<'a, T> {
    data: &'a [T],
    rng: RngStream,
}

impl<'a, T> BootstrapStream<'a, T> {
    pub fn new(data: &'a [T], rng: RngStream) -> Self {
        assert!(!data.is_empty(), "cannot bootstrap an empty sample");
        Self { data, rng }
    }
}

impl<'a, T> Iterator for BootstrapStream<'a, T> {
    type Item = &'a T;

    fn next(&mut self) -> Option<&'a T> {
        Some(&self.data[self.rng.index(self.data.len())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies() {
        let data = [0usize, 1, 2, 3];
        let mut counts = [0usize; 4];
        for &v in BootstrapStream::new(&data, RngStream::new(4)).take(40_000) {
            counts[v] += 1;
        }
        for c in counts {
            // sd ~ 87
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{c}");
        }
    }
}
