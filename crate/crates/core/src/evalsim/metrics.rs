//! Partition agreement: adjusted Rand index and normalized mutual
//! information, both computed from the contingency table.

use crate::error::{Error, Result};
use crate::model::CommunityAssignment;

/// Pair counts over all unordered node pairs:
/// `a` together in both, `b` together only in the first, `c` together only
/// in the second, `d` apart in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

fn check_lengths(z: &CommunityAssignment, z_hat: &CommunityAssignment) -> Result<()> {
    if z.n() != z_hat.n() {
        return Err(Error::InvalidInput(format!(
            "partitions have different lengths ({} vs {})",
            z.n(),
            z_hat.n()
        )));
    }
    Ok(())
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

fn contingency(z: &CommunityAssignment, z_hat: &CommunityAssignment) -> Vec<u64> {
    let kh = z_hat.k_max();
    let mut table = vec![0u64; z.k_max() * kh];
    for (&l, &q) in z.labels().iter().zip(z_hat.labels()) {
        table[l * kh + q] += 1;
    }
    table
}

pub fn pair_counts(z: &CommunityAssignment, z_hat: &CommunityAssignment) -> Result<PairCounts> {
    check_lengths(z, z_hat)?;
    let n = z.n() as u64;
    let a: u64 = contingency(z, z_hat).into_iter().map(choose2).sum();
    let same_z: u64 = z.counts().iter().map(|&c| choose2(c as u64)).sum();
    let same_hat: u64 = z_hat.counts().iter().map(|&c| choose2(c as u64)).sum();
    let b = same_z - a;
    let c = same_hat - a;
    let d = choose2(n) - a - b - c;
    Ok(PairCounts { a, b, c, d })
}

/// ARI from pair counts with `M = C(n, 2)`:
/// `(M(a+d) - [(a+b)(a+c) + (c+d)(b+d)]) / (M^2 - [(a+b)(a+c) + (c+d)(b+d)])`.
/// Numerator and denominator are exact integers; a zero denominator (both
/// partitions trivial) gives 1.
pub fn ari_from_counts(p: PairCounts) -> f64 {
    let (a, b, c, d) = (p.a as i128, p.b as i128, p.c as i128, p.d as i128);
    let m = a + b + c + d;
    let expected = (a + b) * (a + c) + (c + d) * (b + d);
    let num = m * (a + d) - expected;
    let den = m * m - expected;
    if den == 0 {
        return 1.0;
    }
    num as f64 / den as f64
}

pub fn ari(z: &CommunityAssignment, z_hat: &CommunityAssignment) -> Result<f64> {
    Ok(ari_from_counts(pair_counts(z, z_hat)?))
}

/// NMI with geometric-mean normalization, `I(z; z_hat) / sqrt(H(z) H(z_hat))`,
/// natural logarithms. Two single-community partitions give 1; one
/// single-community partition against a non-trivial one gives 0.
pub fn nmi(z: &CommunityAssignment, z_hat: &CommunityAssignment) -> Result<f64> {
    check_lengths(z, z_hat)?;
    let n = z.n() as f64;
    if z.n() == 0 {
        return Err(Error::InvalidInput("partitions are empty".into()));
    }
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let hz = entropy(z.counts());
    let hh = entropy(z_hat.counts());
    if hz == 0.0 && hh == 0.0 {
        return Ok(1.0);
    }
    if hz == 0.0 || hh == 0.0 {
        return Ok(0.0);
    }
    let kh = z_hat.k_max();
    let mut mi = 0.0;
    for (idx, &o) in contingency(z, z_hat).iter().enumerate() {
        if o == 0 {
            continue;
        }
        let (l, q) = (idx / kh, idx % kh);
        let o = o as f64;
        mi += o / n * (o * n / (z.counts()[l] as f64 * z_hat.counts()[q] as f64)).ln();
    }
    Ok((mi / (hz * hh).sqrt()).clamp(0.0, 1.0))
}
