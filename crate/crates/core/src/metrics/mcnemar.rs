use serde::Serialize;

use crate::error::{Error, Result};

/// Discordant counts and the exact two-sided p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McNemar {
    /// System A correct, system B wrong.
    pub b: u64,
    /// System A wrong, system B correct.
    pub c: u64,
    pub p_value: f64,
    pub no_discordant_pairs: bool,
}

/// Exact McNemar test on paired predictions against a shared gold vector.
pub fn mcnemar(gold: &[usize], pred_a: &[usize], pred_b: &[usize]) -> Result<McNemar> {
    if pred_a.len() != gold.len() || pred_b.len() != gold.len() {
        return Err(Error::LengthMismatch {
            context: "McNemar label vectors".into(),
            expected: gold.len(),
            found: if pred_a.len() != gold.len() {
                pred_a.len()
            } else {
                pred_b.len()
            },
        });
    }
    let mut b = 0;
    let mut c = 0;
    for ((&g, &a), &p) in gold.iter().zip(pred_a).zip(pred_b) {
        match (a == g, p == g) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(b, c))
}

pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemar {
    McNemar {
        b,
        c,
        p_value: exact_two_sided(b, c),
        no_discordant_pairs: b + c == 0,
    }
}

/// `min(1, 2 P[X <= min(b, c)])` for `X ~ Binomial(b + c, 1/2)`.
pub fn exact_two_sided(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    // log-space pmf recursion: ln P(0) = -n ln 2,
    // ln P(i + 1) = ln P(i) + ln(n - i) - ln(i + 1)
    let mut log_pmf = -(n as f64) * std::f64::consts::LN_2;
    let mut terms = Vec::with_capacity(k as usize + 1);
    terms.push(log_pmf);
    for i in 0..k {
        log_pmf += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        terms.push(log_pmf);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>();
    (2.0 * tail).min(1.0)
}
