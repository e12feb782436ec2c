use crate::error::{GwError, Result};

pub const DEFAULT_BASIS_CAP: usize = 2_000_000;

/// All `n`-particle occupation words on `m` sites, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSector {
    pub m_sites: usize,
    pub n_particles: usize,
    pub basis: Vec<u64>,
}

pub fn binomial(m: usize, n: usize) -> usize {
    if n > m {
        return 0;
    }
    let n = n.min(m - n);
    (0..n).fold(1usize, |acc, i| acc * (m - i) / (i + 1))
}

impl FockSector {
    pub fn new(m: usize, n: usize, cap: usize) -> Result<Self> {
        if m == 0 || m > 64 {
            return Err(GwError::Input(format!("site count must be in 1..=64, got {m}")));
        }
        if n > m {
            return Err(GwError::Input(format!("{n} particles on {m} sites")));
        }
        let dim = binomial(m, n);
        if dim > cap {
            return Err(GwError::SectorTooLarge { dim, cap });
        }
        let mut basis = Vec::with_capacity(dim);
        if n == 0 {
            basis.push(0);
        } else {
            let limit: u128 = 1u128 << m;
            let mut w: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            loop {
                basis.push(w);
                let c = w & w.wrapping_neg();
                let (r, overflow) = w.overflowing_add(c);
                if overflow || (r as u128) >= limit {
                    break;
                }
                w = (((r ^ w) >> 2) / c) | r;
                if (w as u128) >= limit {
                    break;
                }
            }
        }
        debug_assert_eq!(basis.len(), dim);
        Ok(FockSector {
            m_sites: m,
            n_particles: n,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, word: u64) -> Option<usize> {
        self.basis.binary_search(&word).ok()
    }
}

/// `(−1)^(number of occupied sites below i)`.
pub fn sign_below(word: u64, i: usize) -> f64 {
    let mask = (1u64 << i) - 1;
    if (word & mask).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `a†_i |word⟩` as `(sign, new word)`, or `None` if site `i` is occupied.
pub fn create(word: u64, i: usize) -> Option<(f64, u64)> {
    if word >> i & 1 == 1 {
        None
    } else {
        Some((sign_below(word, i), word | 1 << i))
    }
}

/// `a_i |word⟩` as `(sign, new word)`, or `None` if site `i` is empty.
pub fn annihilate(word: u64, i: usize) -> Option<(f64, u64)> {
    if word >> i & 1 == 0 {
        None
    } else {
        Some((sign_below(word, i), word & !(1 << i)))
    }
}

/// `a†(f)ψ = Σ_i f_i a†_i ψ`, mapping sector `from` into sector `to`.
pub fn apply_creation(from: &FockSector, to: &FockSector, f: &[f64], psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; to.dim()];
    for (k, &word) in from.basis.iter().enumerate() {
        if psi[k] == 0.0 {
            continue;
        }
        for (i, &fi) in f.iter().enumerate() {
            if let Some((s, w)) = create(word, i) {
                let idx = to.index_of(w).expect("target sector");
                out[idx] += s * fi * psi[k];
            }
        }
    }
    out
}

/// `a(f)ψ = Σ_i f̄_i a_i ψ`, mapping sector `from` into sector `to`.
pub fn apply_annihilation(from: &FockSector, to: &FockSector, f: &[f64], psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; to.dim()];
    for (k, &word) in from.basis.iter().enumerate() {
        if psi[k] == 0.0 {
            continue;
        }
        for (i, &fi) in f.iter().enumerate() {
            if let Some((s, w)) = annihilate(word, i) {
                let idx = to.index_of(w).expect("target sector");
                out[idx] += s * fi * psi[k];
            }
        }
    }
    out
}
