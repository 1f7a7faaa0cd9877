//! Discrete prolate spheroidal (Slepian) sequences.
//!
//! The tapers are eigenvectors of the symmetric tridiagonal matrix that
//! commutes with the time-bandwidth concentration operator. Eigenvalues of
//! the tridiagonal matrix are isolated by Sturm-sequence bisection, the
//! eigenvectors by inverse iteration, and the concentration ratio of each
//! taper is the Rayleigh quotient against the sinc kernel.

use super::SpectralError;
use std::f64::consts::PI;

/// Orthonormal tapers of length `n` with their concentration ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperSet {
    pub n: usize,
    pub nw: f64,
    pub k: usize,
    pub tapers: Vec<Vec<f64>>,
    /// Fraction of each taper's energy inside `[-W, W]`, strictly decreasing.
    pub eigenvalues: Vec<f64>,
}

/// Diagonal and off-diagonal of the Slepian tridiagonal matrix.
/// `off[i]` couples entries `i` and `i + 1`.
pub fn slepian_tridiagonal(n: usize, nw: f64) -> (Vec<f64>, Vec<f64>) {
    let w = nw / n as f64;
    let c = (2.0 * PI * w).cos();
    let diag = (0..n)
        .map(|i| {
            let h = (n as f64 - 1.0 - 2.0 * i as f64) / 2.0;
            h * h * c
        })
        .collect();
    let off = (1..n).map(|i| (i * (n - i)) as f64 / 2.0).collect();
    (diag, off)
}

/// Number of eigenvalues strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 { tiny } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `idx`-th smallest eigenvalue (0-based) by bisection.
fn bisect_eigenvalue(diag: &[f64], off: &[f64], idx: usize) -> f64 {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > idx {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift I) x = rhs` by LU with partial pivoting.
fn solve_shifted(diag: &[f64], off: &[f64], shift: f64, rhs: &mut [f64]) {
    let n = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
    let mut dl = off.to_vec();
    let mut du = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] != 0.0 {
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            }
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for v in d.iter_mut() {
        if *v == 0.0 {
            *v = f64::EPSILON * scale;
        }
    }
    for i in 0..n - 1 {
        if swapped[i] {
            let temp = rhs[i] - dl[i] * rhs[i + 1];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = temp;
        } else {
            rhs[i + 1] -= dl[i] * rhs[i];
        }
    }
    rhs[n - 1] /= d[n - 1];
    if n > 1 {
        rhs[n - 2] = (rhs[n - 2] - du[n - 2] * rhs[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - du2[i] * rhs[i + 2]) / d[i];
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Energy fraction of `v` inside the band `[-w, w]` (cycles/sample).
pub fn concentration(v: &[f64], w: f64) -> f64 {
    let n = v.len();
    let mut total = 2.0 * w * dot(v, v);
    for lag in 1..n {
        let r = (2.0 * PI * w * lag as f64).sin() / (PI * lag as f64);
        let c: f64 = v[..n - lag].iter().zip(&v[lag..]).map(|(a, b)| a * b).sum();
        total += 2.0 * r * c;
    }
    total
}

/// Computes the first `k` Slepian tapers of length `n` for time-bandwidth `nw`.
pub fn compute_dpss(n: usize, nw: f64, k: usize) -> Result<TaperSet, SpectralError> {
    if n < 8 {
        return Err(SpectralError::Invalid(format!("taper length {n} below minimum of 8")));
    }
    if !(nw > 0.0) || nw >= n as f64 / 2.0 {
        return Err(SpectralError::Invalid(format!("time-bandwidth {nw} outside (0, n/2)")));
    }
    if k < 1 || k as f64 > 2.0 * nw - 1.0 {
        return Err(SpectralError::Invalid(format!("taper count {k} outside [1, 2*nw - 1]")));
    }
    let (diag, off) = slepian_tridiagonal(n, nw);
    let w = nw / n as f64;

    // Fixed pseudo-random start so no eigenvector is missed by symmetry.
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut start = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };

    let mut tapers: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = bisect_eigenvalue(&diag, &off, n - 1 - j);
        let mut v: Vec<f64> = (0..n).map(|_| start()).collect();
        for _ in 0..4 {
            solve_shifted(&diag, &off, lambda, &mut v);
            for prev in &tapers {
                let p = dot(&v, prev);
                v.iter_mut().zip(prev).for_each(|(x, y)| *x -= p * y);
            }
            normalize(&mut v);
        }
        if j % 2 == 0 {
            if v.iter().sum::<f64>() < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        } else {
            let thresh = (1.0 / n as f64).max(1e-7);
            if let Some(first) = v.iter().find(|x| x.abs() > thresh) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        tapers.push(v);
    }
    let eigenvalues = tapers.iter().map(|v| concentration(v, w)).collect();
    Ok(TaperSet { n, nw, k, tapers, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_validation() {
        assert!(compute_dpss(4, 1.5, 1).is_err());
        assert!(compute_dpss(64, 4.0, 0).is_err());
        assert!(compute_dpss(64, 4.0, 8).is_err());
        assert!(compute_dpss(64, 4.0, 7).is_ok());
    }

    #[test]
    fn leading_taper_has_no_sign_change() {
        let t = compute_dpss(64, 4.0, 1).unwrap();
        assert!(t.tapers[0].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn taper_j_has_j_sign_changes() {
        let t = compute_dpss(128, 4.0, 7).unwrap();
        for (j, v) in t.tapers.iter().enumerate() {
            let changes = v.windows(2).filter(|p| p[0].signum() != p[1].signum()).count();
            assert_eq!(changes, j, "taper {j}");
        }
    }

    #[test]
    fn solver_matches_dense_product() {
        let (diag, off) = slepian_tridiagonal(16, 3.0);
        let shift = 1.7;
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; 16];
        for i in 0..16 {
            b[i] = (diag[i] - shift) * x[i];
            if i > 0 {
                b[i] += off[i - 1] * x[i - 1];
            }
            if i + 1 < 16 {
                b[i] += off[i] * x[i + 1];
            }
        }
        solve_shifted(&diag, &off, shift, &mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-10);
        }
    }
}
