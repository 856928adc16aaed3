use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One-sided paired t-test of `mean(a - b) > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
}

impl PairedTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<PairedTest> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let (t, p) = if se == 0.0 {
        let p = if mean > 0.0 { 0.0 } else { 1.0 };
        (mean.signum() * f64::INFINITY, p)
    } else {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
        (t, 1.0 - dist.cdf(t))
    };
    Some(PairedTest {
        n,
        mean_diff: mean,
        t,
        p_value: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_a_hand_computed_case() {
        // diffs 1, 2, 3: mean 2, sd 1, se 1/sqrt(3), t = 2 sqrt(3), df 2
        let r = paired_t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        // one-sided tail for t with 2 dof: 0.5 - t / (2 sqrt(t^2 + 2))
        let tail = 0.5 - r.t / (2.0 * (r.t * r.t + 2.0).sqrt());
        assert!((r.p_value - tail).abs() < 1e-9, "{} vs {tail}", r.p_value);
        assert!(r.significant(0.05));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(paired_t_test(&[1.0], &[0.0]).is_none());
        let same = paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(!same.significant(0.05));
        let shifted = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!(shifted.significant(0.05));
    }
}
