use super::HarnessError;
use crate::attributes::{tokenize, unigram_f1};

/// ROUGE-1 F1 with clipped unigram counts.
pub fn rouge1_f(candidate: &str, reference: &str) -> Result<f64, HarnessError> {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return Err(HarnessError::EmptyText);
    }
    Ok(unigram_f1(&c, &r))
}

/// Arithmetic mean, `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rouge_cases() {
        assert_eq!(rouge1_f("the cat sat", "The cat sat.").unwrap(), 1.0);
        assert_eq!(rouge1_f("alpha", "beta").unwrap(), 0.0);
        assert!((rouge1_f("a b c", "a b d").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(rouge1_f("...", "a"), Err(HarnessError::EmptyText)));
    }

    #[test]
    fn mean_of_deviations() {
        assert_eq!(mean(&[4.0, 6.0]), Some(5.0));
        assert_eq!(mean(&[]), None);
    }
}
