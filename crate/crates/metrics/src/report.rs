use std::fmt;

use crate::MetricsError;

/// Aggregated evaluation results. Absolute fid / retrieval values are only
/// comparable across runs that used the same extractor and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mpjpe_mm: Option<f64>,
    pub fid: f64,
    pub r_at_1: f64,
    pub r_at_2: f64,
    pub r_at_3: f64,
    pub mm_dist: f64,
    pub diversity: f64,
    pub num_samples: usize,
    pub pool: usize,
    pub seed: u64,
    pub extractor: String,
}

impl EvalReport {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let scalars = [self.fid, self.r_at_1, self.r_at_2, self.r_at_3, self.mm_dist, self.diversity];
        if scalars.iter().any(|v| !v.is_finite())
            || self.mpjpe_mm.map_or(false, |v| !v.is_finite())
        {
            return Err(MetricsError::ShapeMismatch("non-finite metric value".into()));
        }
        if !(self.r_at_1 <= self.r_at_2 && self.r_at_2 <= self.r_at_3 && self.r_at_3 <= 1.0) {
            return Err(MetricsError::ShapeMismatch(format!(
                "retrieval rates not nested: {} / {} / {}",
                self.r_at_1, self.r_at_2, self.r_at_3
            )));
        }
        Ok(())
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples:   {}", self.num_samples)?;
        writeln!(f, "extractor: {}", self.extractor)?;
        writeln!(f, "seed:      {} (pool {})", self.seed, self.pool)?;
        if let Some(mpjpe) = self.mpjpe_mm {
            writeln!(f, "mpjpe:     {mpjpe:.3} mm")?;
        }
        writeln!(f, "fid:       {:.6}", self.fid)?;
        writeln!(
            f,
            "r@1/2/3:   {:.4} / {:.4} / {:.4}",
            self.r_at_1, self.r_at_2, self.r_at_3
        )?;
        writeln!(f, "mm-dist:   {:.6}", self.mm_dist)?;
        write!(f, "diversity: {:.6}", self.diversity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> EvalReport {
        EvalReport {
            mpjpe_mm: Some(12.0),
            fid: 0.5,
            r_at_1: 0.2,
            r_at_2: 0.3,
            r_at_3: 0.4,
            mm_dist: 1.5,
            diversity: 2.0,
            num_samples: 64,
            pool: 32,
            seed: 7,
            extractor: "kinematic-v1".into(),
        }
    }

    #[test]
    fn nested_rates_validate() {
        assert!(base().validate().is_ok());
    }

    #[test]
    fn inverted_rates_are_rejected() {
        let mut r = base();
        r.r_at_2 = 0.1;
        assert!(r.validate().is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut r = base();
        r.fid = f64::NAN;
        assert!(r.validate().is_err());
    }
}
