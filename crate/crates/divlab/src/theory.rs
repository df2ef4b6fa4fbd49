//! Closed-form oracles for the 2D task and the coding-theory construction of
//! many pairwise-diverse hypotheses that all fail to generalize.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Analytic boundary angle of the second DivDis-Seq hypothesis on the 2D
/// task with the first hypothesis pinned to the spurious labeling:
/// `beta(r) = pi/2 - arctan((1 - 2r) / (1 - r))`, increasing from `pi/4` at
/// `r = 0` to `pi/2` at `r = 0.5`.
pub fn analytic_h2_divdis_seq(r: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&r) {
        return Err(Error::InvalidParameter(format!("spurious ratio {r} outside [0, 0.5]")));
    }
    Ok(FRAC_PI_2 - ((1.0 - 2.0 * r) / (1.0 - r)).atan())
}

/// Analytic boundary angle of the second D-BAT hypothesis on the 2D task
/// under the hard-margin, full-support analysis: the true labeling's angle
/// at `r = 0`, and the flipped spurious labeling (`pi`) for any `r > 0`.
/// Finite-sample trained models rotate gradually instead; the harness
/// records their intermediate angles as observational output.
pub fn analytic_h2_dbat(r: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&r) {
        return Err(Error::InvalidParameter(format!("spurious ratio {r} outside [0, 0.5]")));
    }
    Ok(if r == 0.0 { FRAC_PI_2 } else { PI })
}

/// A set of fixed-length label vectors over a `q`-ary alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Code {
    q: usize,
    length: usize,
    codewords: Vec<Vec<u8>>,
}

impl Code {
    pub fn new(q: usize, length: usize, codewords: Vec<Vec<u8>>) -> Result<Self> {
        if q < 2 || q > 255 {
            return Err(Error::InvalidConfig("alphabet size must be in [2, 255]".into()));
        }
        for w in &codewords {
            if w.len() != length {
                return Err(Error::DimensionMismatch("codeword length mismatch".into()));
            }
            if w.iter().any(|&s| s as usize >= q) {
                return Err(Error::InvalidParameter("codeword symbol out of alphabet".into()));
            }
        }
        let mut seen = codewords.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != codewords.len() {
            return Err(Error::InvalidParameter("duplicate codewords".into()));
        }
        Ok(Self { q, length, codewords })
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn codewords(&self) -> &[Vec<u8>] {
        &self.codewords
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// The code with every codeword equal to `word` removed.
    pub fn without(&self, word: &[u8]) -> Code {
        Code {
            q: self.q,
            length: self.length,
            codewords: self.codewords.iter().filter(|w| w.as_slice() != word).cloned().collect(),
        }
    }

    /// Minimum pairwise Hamming distance; `None` for fewer than two codewords.
    pub fn min_distance(&self) -> Option<usize> {
        let mut min = None;
        for i in 0..self.codewords.len() {
            for j in i + 1..self.codewords.len() {
                let d = hamming(&self.codewords[i], &self.codewords[j]);
                min = Some(min.map_or(d, |m: usize| m.min(d)));
            }
        }
        min
    }

    /// Plain integer-matrix text format: one codeword per line, symbols
    /// space-separated.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        for word in &self.codewords {
            let line: Vec<String> = word.iter().map(u8::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn read_from(q: usize, r: &mut impl BufRead) -> Result<Self> {
        let mut codewords = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let word: Vec<u8> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad symbol {t:?}"))))
                .collect::<Result<_>>()?;
            codewords.push(word);
        }
        let length = codewords.first().map_or(0, Vec::len);
        Self::new(q, length, codewords)
    }
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    assert_eq!(a.len(), b.len(), "hamming distance needs equal lengths");
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Agreement between two label vectors: `1 - d/N`.
pub fn codeword_agreement(a: &[u8], b: &[u8]) -> f64 {
    1.0 - hamming(a, b) as f64 / a.len() as f64
}

/// The binary Walsh/Hadamard code of length `n` (a power of two, `n >= 2`):
/// the `n` Walsh rows as 0/1 vectors plus their complements, `2n` codewords
/// with minimum pairwise distance exactly `n/2`.
pub fn hadamard_code(n: usize) -> Result<Code> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "hadamard code length must be a power of two >= 2, got {n}"
        )));
    }
    let mut codewords = Vec::with_capacity(2 * n);
    for m in 0..n {
        // Sylvester-order Walsh row: sign (-1)^popcount(m & j), +1 -> 0, -1 -> 1.
        let row: Vec<u8> = (0..n).map(|j| ((m & j).count_ones() & 1) as u8).collect();
        codewords.push(row);
    }
    for m in 0..n {
        let row: Vec<u8> = codewords[m].iter().map(|&b| 1 - b).collect();
        codewords.push(row);
    }
    Code::new(2, n, codewords)
}

/// Distance-preserving transform mapping the code's first codeword onto
/// `target`: every codeword is shifted per position by the symbol difference
/// between `target` and the first codeword (a per-position bit flip in the
/// binary case). The output contains `target`.
pub fn align_code_to_target(code: &Code, target: &[u8]) -> Result<Code> {
    if target.len() != code.length {
        return Err(Error::DimensionMismatch(format!(
            "target length {} does not match code length {}",
            target.len(),
            code.length
        )));
    }
    if target.iter().any(|&s| s as usize >= code.q) {
        return Err(Error::InvalidParameter("target symbol out of alphabet".into()));
    }
    let first = code
        .codewords
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty code".into()))?;
    let q = code.q as u16;
    let shift: Vec<u16> = target
        .iter()
        .zip(first)
        .map(|(&t, &c)| (t as u16 + q - c as u16) % q)
        .collect();
    let codewords = code
        .codewords
        .iter()
        .map(|w| {
            w.iter()
                .zip(&shift)
                .map(|(&s, &d)| ((s as u16 + d) % q) as u8)
                .collect()
        })
        .collect();
    Code::new(code.q, code.length, codewords)
}

/// Check that `q` is prime by trial division (alphabets here are tiny).
fn is_prime(q: usize) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The q-ary affine code for prime `q`: codewords `c(x) = a . x + b` over
/// the field with `q` elements, evaluated at all `q^m` points `x`, for every
/// coefficient vector `a` and scalar `b`. Gives `q^(m+1)` codewords of
/// length `q^m` with minimum distance `N (q-1) / q`.
pub fn generalized_hadamard(q: usize, m: usize) -> Result<Code> {
    if !is_prime(q) {
        return Err(Error::InvalidParameter(format!("alphabet size {q} is not prime")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let n = q.checked_pow(m as u32).ok_or_else(|| Error::InvalidParameter("q^m overflows".into()))?;
    if n > 1 << 20 {
        return Err(Error::InvalidParameter(format!("code length {n} too large")));
    }

    // Points and coefficient vectors of F_q^m in lexicographic order.
    let tuples: Vec<Vec<usize>> = (0..n)
        .map(|mut idx| {
            let mut t = vec![0usize; m];
            for slot in t.iter_mut().rev() {
                *slot = idx % q;
                idx /= q;
            }
            t
        })
        .collect();

    let mut codewords = Vec::with_capacity(n * q);
    for a in &tuples {
        for b in 0..q {
            let word: Vec<u8> = tuples
                .iter()
                .map(|x| {
                    let dot: usize = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
                    ((dot + b) % q) as u8
                })
                .collect();
            codewords.push(word);
        }
    }
    Code::new(q, n, codewords)
}

/// Exhaustive verification report for a candidate hypothesis set against a
/// target labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeVerification {
    pub candidate_count: usize,
    pub min_distance: usize,
    pub max_pairwise_agreement: f64,
    pub max_accuracy_vs_target: f64,
    /// True iff both the maximum pairwise agreement and the maximum accuracy
    /// against the target are at most `1/q` (0.5 in the binary case).
    pub satisfies_bound: bool,
}

/// Exhaustively checks every pairwise agreement within `code` and every
/// candidate's accuracy against `target`. The code is taken as the candidate
/// set as-is: if the target itself is among the candidates the accuracy bound
/// fails, so callers building a diverse non-generalizing set should remove it
/// first (see [`counterexample_code`]).
pub fn verify_against_target(code: &Code, target: &[u8]) -> Result<CodeVerification> {
    if target.len() != code.length {
        return Err(Error::DimensionMismatch(format!(
            "target length {} does not match code length {}",
            target.len(),
            code.length
        )));
    }
    if code.len() < 2 {
        return Err(Error::InvalidParameter("need at least two candidates".into()));
    }
    let mut min_distance = usize::MAX;
    let mut max_agreement = 0.0f64;
    for i in 0..code.codewords.len() {
        for j in i + 1..code.codewords.len() {
            let d = hamming(&code.codewords[i], &code.codewords[j]);
            min_distance = min_distance.min(d);
            max_agreement = max_agreement.max(1.0 - d as f64 / code.length as f64);
        }
    }
    let max_accuracy = code
        .codewords
        .iter()
        .map(|w| codeword_agreement(w, target))
        .fold(0.0f64, f64::max);
    let bound = 1.0 / code.q as f64;
    Ok(CodeVerification {
        candidate_count: code.len(),
        min_distance,
        max_pairwise_agreement: max_agreement,
        max_accuracy_vs_target: max_accuracy,
        satisfies_bound: max_agreement <= bound && max_accuracy <= bound,
    })
}

/// Builds the diverse non-generalizing hypothesis set for a binary target of
/// length `n`: the Hadamard code aligned so the target is a member, with the
/// target then removed, leaving `2n - 1` hypotheses whose pairwise agreement
/// and accuracy against the target are both at most one half. Returns the
/// candidate set and its verification report.
pub fn counterexample_code(n: usize, target: &[u8]) -> Result<(Code, CodeVerification)> {
    let aligned = align_code_to_target(&hadamard_code(n)?, target)?;
    let candidates = aligned.without(target);
    let report = verify_against_target(&candidates, target)?;
    Ok((candidates, report))
}

/// Q-ary variant of [`counterexample_code`] built on the affine code; the
/// target length must be exactly `q^m`.
pub fn counterexample_code_qary(q: usize, m: usize, target: &[u8]) -> Result<(Code, CodeVerification)> {
    let aligned = align_code_to_target(&generalized_hadamard(q, m)?, target)?;
    let candidates = aligned.without(target);
    let report = verify_against_target(&candidates, target)?;
    Ok((candidates, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn divdis_seq_angle_endpoints_and_interior() {
        assert!((analytic_h2_divdis_seq(0.0).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!((analytic_h2_divdis_seq(0.5).unwrap() - FRAC_PI_2).abs() < 1e-12);
        let b = analytic_h2_divdis_seq(0.25).unwrap();
        assert!((b - (FRAC_PI_2 - (2.0f64 / 3.0).atan())).abs() < 1e-12);
        assert!((b - 0.98279).abs() < 1e-5);
        assert!(analytic_h2_divdis_seq(0.6).is_err());
    }

    #[test]
    fn divdis_seq_angle_is_strictly_increasing() {
        let mut prev = analytic_h2_divdis_seq(0.0).unwrap();
        for i in 1..=50 {
            let b = analytic_h2_divdis_seq(i as f64 * 0.01).unwrap();
            assert!(b > prev, "beta must increase");
            prev = b;
        }
    }

    /// Independent oracle for the DivDis-Seq angle: numerically integrate the
    /// agreement between the spurious labeling and a boundary at angle beta
    /// over the unlabeled support, and pick the beta whose agreement is
    /// closest to one half.
    #[test]
    fn divdis_seq_angle_matches_grid_search() {
        for &r in &[0.05, 0.15, 0.25, 0.35, 0.45] {
            let w = r / (1.0 - r);
            // Dense grid over the upper strip [-w, 1] x [0, 1]; the lower
            // strip mirrors it, so one strip decides the agreement.
            let steps = 400;
            let agreement_for = |beta: f64| {
                let (nx, ny) = (beta.sin(), -beta.cos());
                let mut agree = 0usize;
                let mut total = 0usize;
                for i in 0..steps {
                    let x1 = -w + (1.0 + w) * (i as f64 + 0.5) / steps as f64;
                    for j in 0..steps {
                        let x2 = (j as f64 + 0.5) / steps as f64;
                        let h2 = usize::from(nx * x1 + ny * x2 > 0.0);
                        // Spurious labeling is 0 on the upper strip.
                        total += 1;
                        if h2 == 0 {
                            agree += 1;
                        }
                    }
                }
                agree as f64 / total as f64
            };
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=300 {
                let beta = FRAC_PI_4 + (FRAC_PI_2 - FRAC_PI_4) * k as f64 / 300.0;
                let gap = (agreement_for(beta) - 0.5).abs();
                if gap < best.0 {
                    best = (gap, beta);
                }
            }
            let analytic = analytic_h2_divdis_seq(r).unwrap();
            assert!(
                (best.1 - analytic).abs() < 0.01,
                "r={r}: grid {} vs analytic {analytic}",
                best.1
            );
        }
    }

    #[test]
    fn dbat_angle_endpoints() {
        assert!((analytic_h2_dbat(0.0).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!((analytic_h2_dbat(0.5).unwrap() - PI).abs() < 1e-12);
        assert!((analytic_h2_dbat(0.25).unwrap() - PI).abs() < 1e-12);
        assert!(analytic_h2_dbat(-0.1).is_err());
    }

    #[test]
    fn hadamard_n2_is_all_binary_pairs() {
        let code = hadamard_code(2).unwrap();
        let mut words = code.codewords().to_vec();
        words.sort();
        assert_eq!(words, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(code.min_distance(), Some(1));
    }

    #[test]
    fn hadamard_n4_counts_and_distance() {
        let code = hadamard_code(4).unwrap();
        assert_eq!(code.len(), 8);
        assert!(code.codewords().contains(&vec![0, 0, 0, 0]));
        assert!(code.codewords().contains(&vec![1, 1, 1, 1]));
        // Brute-force all-pairs check.
        let mut min = usize::MAX;
        for i in 0..code.len() {
            for j in i + 1..code.len() {
                min = min.min(hamming(&code.codewords()[i], &code.codewords()[j]));
            }
        }
        assert_eq!(min, 2);
    }

    #[test]
    fn hadamard_counts_scale_with_length() {
        for n in [2usize, 4, 8, 16, 32, 64] {
            let code = hadamard_code(n).unwrap();
            assert_eq!(code.len(), 2 * n);
            assert_eq!(code.min_distance(), Some(n / 2));
        }
        assert!(hadamard_code(3).is_err());
        assert!(hadamard_code(1).is_err());
        assert!(hadamard_code(12).is_err());
    }

    #[test]
    fn alignment_identity_and_complement() {
        let code = hadamard_code(8).unwrap();
        let first = code.codewords()[0].clone();
        let same = align_code_to_target(&code, &first).unwrap();
        assert_eq!(same, code);

        let complement: Vec<u8> = first.iter().map(|&b| 1 - b).collect();
        let flipped = align_code_to_target(&code, &complement).unwrap();
        for (w, f) in code.codewords().iter().zip(flipped.codewords()) {
            for (a, b) in w.iter().zip(f) {
                assert_eq!(*b, 1 - *a);
            }
        }
    }

    #[test]
    fn alignment_preserves_all_pairwise_distances() {
        let code = hadamard_code(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let target: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2u8)).collect();
            let aligned = align_code_to_target(&code, &target).unwrap();
            assert!(aligned.codewords().contains(&target));
            for i in 0..code.len() {
                for j in 0..code.len() {
                    assert_eq!(
                        hamming(&code.codewords()[i], &code.codewords()[j]),
                        hamming(&aligned.codewords()[i], &aligned.codewords()[j])
                    );
                }
            }
        }
    }

    #[test]
    fn qary_code_counts_and_distances() {
        let c31 = generalized_hadamard(3, 1).unwrap();
        assert_eq!(c31.len(), 9);
        assert_eq!(c31.min_distance(), Some(2));

        let c32 = generalized_hadamard(3, 2).unwrap();
        assert_eq!(c32.len(), 27);
        assert_eq!(c32.min_distance(), Some(6));
        let mut max_agree = 0.0f64;
        for i in 0..c32.len() {
            for j in i + 1..c32.len() {
                max_agree = max_agree.max(codeword_agreement(&c32.codewords()[i], &c32.codewords()[j]));
            }
        }
        assert!((max_agree - 1.0 / 3.0).abs() < 1e-12);

        assert!(generalized_hadamard(4, 1).is_err());
        assert!(generalized_hadamard(3, 0).is_err());
    }

    #[test]
    fn q2_affine_code_matches_hadamard_distance_spectrum() {
        let affine = generalized_hadamard(2, 2).unwrap();
        let hadamard = hadamard_code(4).unwrap();
        let spectrum = |c: &Code| {
            let mut s = Vec::new();
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    s.push(hamming(&c.codewords()[i], &c.codewords()[j]));
                }
            }
            s.sort_unstable();
            s
        };
        assert_eq!(affine.len(), hadamard.len());
        assert_eq!(spectrum(&affine), spectrum(&hadamard));
    }

    #[test]
    fn verification_flags_target_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let target: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2u8)).collect();
        let (candidates, report) = counterexample_code(8, &target).unwrap();
        assert_eq!(report.candidate_count, 15);
        assert!(report.satisfies_bound);
        assert!(report.max_pairwise_agreement <= 0.5);
        assert!(report.max_accuracy_vs_target <= 0.5);

        // Putting the target back among the candidates breaks the bound.
        let mut with_target = candidates.codewords().to_vec();
        with_target.push(target.clone());
        let bad = Code::new(2, 8, with_target).unwrap();
        let bad_report = verify_against_target(&bad, &target).unwrap();
        assert_eq!(bad_report.max_accuracy_vs_target, 1.0);
        assert!(!bad_report.satisfies_bound);
    }

    /// Second, independent implementation of the same counts as an oracle for
    /// the verifier on an arbitrary code.
    #[test]
    fn verification_matches_naive_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let words: Vec<Vec<u8>> = (0..10)
            .map(|_| (0..8).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let mut dedup = words.clone();
        dedup.sort();
        dedup.dedup();
        let code = Code::new(2, 8, dedup.clone()).unwrap();
        let target: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2u8)).collect();
        let report = verify_against_target(&code, &target).unwrap();

        let mut naive_min = usize::MAX;
        let mut naive_agree = 0.0f64;
        for i in 0..dedup.len() {
            for j in 0..dedup.len() {
                if i == j {
                    continue;
                }
                let d = dedup[i].iter().zip(&dedup[j]).filter(|(a, b)| a != b).count();
                naive_min = naive_min.min(d);
                naive_agree = naive_agree.max(1.0 - d as f64 / 8.0);
            }
        }
        let naive_acc = dedup
            .iter()
            .map(|w| 1.0 - w.iter().zip(&target).filter(|(a, b)| a != b).count() as f64 / 8.0)
            .fold(0.0f64, f64::max);
        assert_eq!(report.min_distance, naive_min);
        assert_eq!(report.max_pairwise_agreement, naive_agree);
        assert_eq!(report.max_accuracy_vs_target, naive_acc);
    }

    #[test]
    fn code_round_trips_text_format() {
        let code = generalized_hadamard(3, 1).unwrap();
        let mut buf = Vec::new();
        code.write_to(&mut buf).unwrap();
        let back = Code::read_from(3, &mut &buf[..]).unwrap();
        assert_eq!(code, back);
    }
}
