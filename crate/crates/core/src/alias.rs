//! Alias unfolding and two-channel residue matching.
//!
//! A base frequency `f_hat` measured at rate `fh / p` is consistent with the
//! `p` eligible frequencies `f_hat + l * fh / p`. Two residues from coprime
//! channels agree on a common eligible frequency exactly when
//! `q l - p l' = pq (f_hat' - f_hat) / fh` has an integer right-hand side;
//! for coprime `p, q` the solution in `[0, p) x [0, q)` is unique.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal_model::{ensure_coprime, ToneSpec};

/// Default tolerance on the distance of the matching right-hand side from
/// the nearest integer.
pub const DEFAULT_EPS_INT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eligible {
    pub l: u32,
    pub freq: f64,
}

/// One residue and its unfolded alias family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AliasSet {
    pub base: f64,
    pub ratio: u32,
    pub fh: f64,
    pub eligible: Vec<Eligible>,
}

impl AliasSet {
    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.eligible.iter().map(|e| e.freq)
    }
}

/// Unfolds `base` (measured at rate `fh / ratio`) into its `ratio` eligible
/// frequencies in `[0, fh)`.
pub fn expand_aliases(base: f64, ratio: u32, fh: f64) -> Result<AliasSet> {
    if ratio == 0 {
        return Err(Error::InvalidConfiguration(
            "alias ratio must be positive".into(),
        ));
    }
    let step = fh / ratio as f64;
    if !(0.0..step).contains(&base) {
        return Err(Error::InvalidResidue { base, limit: step });
    }
    let eligible = (0..ratio)
        .map(|l| Eligible {
            l,
            freq: base + l as f64 * step,
        })
        .collect();
    Ok(AliasSet {
        base,
        ratio,
        fh,
        eligible,
    })
}

fn mod_inverse(a: i64, modulus: i64) -> Option<i64> {
    // Extended Euclid on (a, modulus).
    let (mut old_r, mut r) = (a.rem_euclid(modulus), modulus);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(modulus))
}

/// Solves `q l - p l' = rhs` for `l in [0, p)`, `l' in [0, q)`.
///
/// `l` is fixed modulo `p` by `l = rhs * q^-1 (mod p)`; the solution exists
/// only if the resulting `l'` lands in range.
pub fn solve_offsets(p: u32, q: u32, rhs: i64) -> Result<Option<(u32, u32)>> {
    ensure_coprime(p, q)?;
    let (p, q) = (p as i64, q as i64);
    let inv = mod_inverse(q, p).expect("coprime ratios have an inverse");
    let l = (rhs.rem_euclid(p) * inv).rem_euclid(p);
    let numer = q * l - rhs;
    debug_assert_eq!(numer.rem_euclid(p), 0);
    let l_prime = numer / p;
    Ok((0..q)
        .contains(&l_prime)
        .then_some((l as u32, l_prime as u32)))
}

/// A common eligible frequency of two residues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrtMatch {
    pub freq: f64,
    pub l: u32,
    pub l_prime: u32,
    /// `rhs - round(rhs)`.
    pub residual: f64,
}

/// `pq (f_hat' - f_hat) / fh`.
pub fn matching_rhs(f_hat: f64, f_hat_prime: f64, p: u32, q: u32, fh: f64) -> f64 {
    (p as f64) * (q as f64) * (f_hat_prime - f_hat) / fh
}

/// Matches residue `f_hat` (rate `fh/p`) with `f_hat_prime` (rate `fh/q`).
pub fn crt_match(
    f_hat: f64,
    f_hat_prime: f64,
    p: u32,
    q: u32,
    fh: f64,
    eps_int: f64,
) -> Result<Option<CrtMatch>> {
    ensure_coprime(p, q)?;
    let rhs = matching_rhs(f_hat, f_hat_prime, p, q, fh);
    let nearest = rhs.round();
    let residual = rhs - nearest;
    if residual.abs() > eps_int {
        return Ok(None);
    }
    Ok(
        solve_offsets(p, q, nearest as i64)?.map(|(l, l_prime)| CrtMatch {
            freq: f_hat + l as f64 * fh / p as f64,
            l,
            l_prime,
            residual,
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMatch {
    /// Index into the first residue list.
    pub i: usize,
    /// Index into the second residue list.
    pub j: usize,
    #[serde(flatten)]
    pub result: CrtMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnmatchedPair {
    pub i: usize,
    pub j: usize,
    pub rhs: f64,
    /// Distance of `rhs` from the nearest integer.
    pub distance: f64,
}

/// Every residue pair from the two channels, split into matches and misses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub matched: Vec<PairMatch>,
    pub unmatched: Vec<UnmatchedPair>,
    /// Some residue took part in more than one match.
    pub multiple_match: bool,
}

impl MatchResult {
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self.matched.iter().map(|m| m.result.freq).collect();
        f.sort_by(f64::total_cmp);
        f
    }
}

/// Tests all `|residues_p| x |residues_q|` pairs; the two estimators order
/// their outputs independently.
pub fn match_all(
    residues_p: &[f64],
    residues_q: &[f64],
    p: u32,
    q: u32,
    fh: f64,
    eps_int: f64,
) -> Result<MatchResult> {
    ensure_coprime(p, q)?;
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for (i, &a) in residues_p.iter().enumerate() {
        for (j, &b) in residues_q.iter().enumerate() {
            match crt_match(a, b, p, q, fh, eps_int)? {
                Some(result) => matched.push(PairMatch { i, j, result }),
                None => {
                    let rhs = matching_rhs(a, b, p, q, fh);
                    unmatched.push(UnmatchedPair {
                        i,
                        j,
                        rhs,
                        distance: (rhs - rhs.round()).abs(),
                    });
                }
            }
        }
    }
    let mut seen_i = vec![0usize; residues_p.len()];
    let mut seen_j = vec![0usize; residues_q.len()];
    for m in &matched {
        seen_i[m.i] += 1;
        seen_j[m.j] += 1;
    }
    let multiple_match = seen_i.iter().chain(&seen_j).any(|&c| c > 1);
    Ok(MatchResult {
        matched,
        unmatched,
        multiple_match,
    })
}

/// Two tones whose spacing is an integer multiple of `fh / (pq)`; such a pair
/// can cross-match between the channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Collision {
    pub i: usize,
    pub j: usize,
    pub fi: f64,
    pub fj: f64,
    /// `(fi - fj) / (fh / pq)` rounded.
    pub grid_steps: i64,
}

/// Every tone pair on (or within `eps_int` grid steps of) the collision grid.
pub fn check_ambiguity(
    tones: &ToneSpec,
    fh: f64,
    p: u32,
    q: u32,
    eps_int: f64,
) -> Result<Vec<Collision>> {
    ensure_coprime(p, q)?;
    let step = fh / (p as f64 * q as f64);
    let f = tones.frequencies();
    let mut out = Vec::new();
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let steps = (f[i] - f[j]) / step;
            if (steps - steps.round()).abs() <= eps_int {
                out.push(Collision {
                    i,
                    j,
                    fi: f[i],
                    fj: f[j],
                    grid_steps: steps.round() as i64,
                });
            }
        }
    }
    Ok(out)
}

/// Pairs of residues closer than `tol` Hz, on the circle of circumference
/// `rate`. Such residues cannot be told apart by the first channel alone.
pub fn duplicate_residues(residues: &[f64], rate: f64, tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..residues.len() {
        for j in i + 1..residues.len() {
            let d = (residues[i] - residues[j]).rem_euclid(rate);
            if d.min(rate - d) <= tol {
                out.push((i, j));
            }
        }
    }
    out
}
