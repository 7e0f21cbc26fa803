//! Switch-position families: which `K` of the `L` beamformer ports may be
//! connected to the up-conversion chains at the same time.
//!
//! Subsets are stored 0-based and sorted; the text format and error messages
//! use 1-based port numbers.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_rational::Ratio;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default cap on the size of an exhaustively enumerated family.
pub const DEFAULT_FAMILY_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchFamily {
    l: usize,
    k: usize,
    subsets: Vec<Vec<usize>>,
}

impl SwitchFamily {
    /// Validated family of pairwise distinct `k`-subsets of `0..l`.
    pub fn new(l: usize, k: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        let fam = Self::with_repeats(l, k, subsets)?;
        let mut seen = HashSet::with_capacity(fam.subsets.len());
        for s in &fam.subsets {
            if !seen.insert(s.clone()) {
                return Err(Error::Argument(format!(
                    "duplicate subset {:?}",
                    one_based(s)
                )));
            }
        }
        Ok(fam)
    }

    /// Like [`SwitchFamily::new`] but allows repeated subsets, which are
    /// useful for exercising degenerate packings.
    pub fn with_repeats(l: usize, k: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 || k > l {
            return Err(Error::Argument(format!(
                "need 1 <= K <= L, got L={l}, K={k}"
            )));
        }
        let mut out = Vec::with_capacity(subsets.len());
        for mut s in subsets {
            s.sort_unstable();
            if s.len() != k {
                return Err(Error::Argument(format!(
                    "subset {:?} has {} elements, expected {k}",
                    one_based(&s),
                    s.len()
                )));
            }
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Argument(format!(
                    "subset {:?} repeats a port",
                    one_based(&s)
                )));
            }
            if s.last().is_some_and(|&m| m >= l) {
                return Err(Error::Argument(format!(
                    "subset {:?} exceeds port count {l}",
                    one_based(&s)
                )));
            }
            out.push(s);
        }
        Ok(SwitchFamily { l, k, subsets: out })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// 0-based sorted subsets in family order.
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// One port from each of the `k` banks `[b w, (b + 1) w)` with bank width
    /// `w = floor(l / k)`; ports past `k w` are unused.
    pub fn enumerate_banked(l: usize, k: usize) -> Result<Self> {
        if k == 0 || k > l {
            return Err(Error::Argument(format!(
                "need 1 <= K <= L, got L={l}, K={k}"
            )));
        }
        let w = l / k;
        let count = (w as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        if count > DEFAULT_FAMILY_CAP {
            return Err(Error::FamilyTooLarge {
                count,
                cap: DEFAULT_FAMILY_CAP,
            });
        }
        let mut subsets = Vec::with_capacity(count as usize);
        let mut digits = vec![0usize; k];
        loop {
            subsets.push(digits.iter().enumerate().map(|(b, &d)| b * w + d).collect());
            // Odometer with the last bank varying fastest.
            let mut pos = k;
            loop {
                if pos == 0 {
                    return Self::new(l, k, subsets);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < w {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// All `k`-subsets of `0..l` in lexicographic order.
    pub fn enumerate_full(l: usize, k: usize, cap: u128) -> Result<Self> {
        if k == 0 || k > l {
            return Err(Error::Argument(format!(
                "need 1 <= K <= L, got L={l}, K={k}"
            )));
        }
        let count = binomial(l as u128, k as u128).unwrap_or(u128::MAX);
        if count > cap {
            return Err(Error::FamilyTooLarge { count, cap });
        }
        let mut subsets = Vec::with_capacity(count as usize);
        let mut c: Vec<usize> = (0..k).collect();
        loop {
            subsets.push(c.clone());
            let mut i = k;
            loop {
                if i == 0 {
                    return Self::new(l, k, subsets);
                }
                i -= 1;
                if c[i] < l - k + i {
                    break;
                }
                if i == 0 {
                    return Self::new(l, k, subsets);
                }
            }
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
        }
    }

    /// Bounded-overlap family from polynomials of degree at most `kappa`
    /// over the prime field of order `q`, the largest prime `<= l / k`.
    /// Subset `i` (for `i = 1..=q^(kappa+1)`) takes port
    /// `b q + f_i(b) mod q` from bank `b`, where the coefficients of `f_i`
    /// are the base-`q` digits of `i`.
    pub fn frankl_babai(l: usize, k: usize, kappa: usize) -> Result<Self> {
        if k == 0 || k > l {
            return Err(Error::Argument(format!(
                "need 1 <= K <= L, got L={l}, K={k}"
            )));
        }
        if kappa >= k {
            return Err(Error::Argument(format!(
                "overlap bound kappa={kappa} must be below K={k}; larger values repeat subsets"
            )));
        }
        let q = largest_prime_at_most((l / k) as u64);
        if q < k as u64 {
            return Err(Error::Infeasible {
                q,
                k,
                l,
                bound: 2 * k * k,
            });
        }
        let count = (q as u128)
            .checked_pow(kappa as u32 + 1)
            .unwrap_or(u128::MAX);
        if count > DEFAULT_FAMILY_CAP {
            return Err(Error::FamilyTooLarge {
                count,
                cap: DEFAULT_FAMILY_CAP,
            });
        }
        let q = q as usize;
        let mut subsets = Vec::with_capacity(count as usize);
        for i in 1..=count as usize {
            let mut a = Vec::with_capacity(kappa + 1);
            let mut rest = i;
            for _ in 0..=kappa {
                a.push(rest % q);
                rest /= q;
            }
            let subset = (0..k)
                .map(|b| {
                    // Horner evaluation of f at b, mod q.
                    let fb = a.iter().rev().fold(0usize, |acc, &c| (acc * b + c) % q);
                    b * q + fb
                })
                .collect();
            subsets.push(subset);
        }
        Self::new(l, k, subsets)
    }

    /// Largest `|B_i ∩ B_j|` over unordered pairs.
    pub fn max_pairwise_overlap(&self) -> Result<usize> {
        if self.len() < 2 {
            return Err(Error::Argument("overlap needs at least two subsets".into()));
        }
        let masks: Vec<Vec<bool>> = self
            .subsets
            .iter()
            .map(|s| {
                let mut m = vec![false; self.l];
                s.iter().for_each(|&x| m[x] = true);
                m
            })
            .collect();
        let mut best = 0;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let o = self.subsets[j].iter().filter(|&&x| masks[i][x]).count();
                best = best.max(o);
            }
        }
        Ok(best)
    }

    /// Text form: header `L K`, then one subset per line (1-based ports).
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.l, self.k);
        for sub in &self.subsets {
            let line: Vec<String> = sub.iter().map(|x| (x + 1).to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty family file".into()))?;
        let nums = parse_numbers(header)?;
        let [l, k] = nums[..] else {
            return Err(Error::Parse(format!(
                "header must be `L K`, got `{header}`"
            )));
        };
        let mut subsets = Vec::new();
        for line in lines {
            let s = parse_numbers(line)?;
            if s.contains(&0) {
                return Err(Error::Parse(format!("ports are 1-based, got `{line}`")));
            }
            subsets.push(s.into_iter().map(|x| x - 1).collect());
        }
        Self::new(l, k, subsets).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Short content hash used to tag designs with the family they target.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn parse_numbers(line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer `{t}`")))
        })
        .collect()
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|x| x + 1).collect()
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest prime `<= n`, or 0 when there is none.
pub fn largest_prime_at_most(n: u64) -> u64 {
    (2..=n).rev().find(|&p| is_prime(p)).unwrap_or(0)
}

pub fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Size bounds for families of `k`-subsets of `l` ports with pairwise
/// overlap at most `kappa`: the Frankl-Babai size `q^(kappa+1)` below and
/// `C(l, kappa+1) / C(k, kappa+1)` above.
pub fn theorem4_bounds(l: usize, k: usize, kappa: usize) -> Result<(u128, Ratio<u128>)> {
    if k == 0 {
        return Err(Error::Argument("K must be positive".into()));
    }
    // L >= 2K^2 is sufficient; the construction only needs q >= K.
    let q = largest_prime_at_most((l / k) as u64);
    if q < k as u64 {
        return Err(Error::Infeasible {
            q,
            k,
            l,
            bound: 2 * k * k,
        });
    }
    let q = q as u128;
    let lower = q.checked_pow(kappa as u32 + 1).unwrap_or(u128::MAX);
    let num = binomial(l as u128, kappa as u128 + 1)
        .ok_or_else(|| Error::Numerical("binomial overflow".into()))?;
    let den = binomial(k as u128, kappa as u128 + 1)
        .ok_or_else(|| Error::Numerical("binomial overflow".into()))?;
    if den == 0 {
        return Err(Error::Argument(format!(
            "kappa={kappa} must be below K={k}"
        )));
    }
    Ok((lower, Ratio::new(num, den)))
}
