//! Diagonal-norm summation-by-parts operators on a uniform grid of [0, 1].
//!
//! Interior orders 2p = 2, 4, 6. The first-derivative closures are the
//! standard diagonal-norm ones; the variable-coefficient second derivative
//! is compatible with them (it shares D and H) and its stiffness matrix
//! annihilates constants.

mod tables;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Whether construction re-checks the operator invariants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Validation {
    #[default]
    Skip,
    Check,
}

/// Smallest N for which the closures of half-order p fit on the grid.
pub fn min_intervals(p: usize) -> Result<usize> {
    match p {
        1 => Ok(2),
        2 => Ok(7),
        3 => Ok(11),
        _ => Err(Error::UnsupportedOrder(p)),
    }
}

/// Smallest N at which the second derivative keeps full boundary order p.
/// Below this the left and right closures overlap; the operators remain
/// symmetric, compatible and semidefinite but lose accuracy.
pub fn accurate_min_intervals(p: usize) -> Result<usize> {
    match p {
        1 => Ok(2),
        2 => Ok(8),
        3 => Ok(13),
        _ => Err(Error::UnsupportedOrder(p)),
    }
}

/// Smallest N for which the stored borrowing constant β is attained by
/// these operators. On coarser grids the l-point boundary windows cover
/// the whole line and less can be borrowed.
pub fn borrowing_min_intervals(p: usize) -> Result<usize> {
    match p {
        1 => Ok(3),
        2 => Ok(7),
        3 => Ok(11),
        _ => Err(Error::UnsupportedOrder(p)),
    }
}

struct RemainderTerm<T> {
    k: usize,
    offset: usize,
    sample: Vec<T>,
    /// Weight per window start s = 0..=N-k.
    weight: Vec<T>,
    diff: Vec<T>,
}

pub struct SbpOperators1D<T: Scalar> {
    pub p: usize,
    pub n: usize,
    pub h: T,
    /// Diagonal of H, in units of length.
    pub hdiag: Vec<T>,
    pub q: DMatrix<T>,
    pub d: DMatrix<T>,
    pub d0: Vec<T>,
    pub dn: Vec<T>,
    qrows: Vec<Vec<(usize, T)>>,
    drows: Vec<Vec<(usize, T)>>,
    remainder: Vec<RemainderTerm<T>>,
    bandwidth: usize,
}

impl<T: Scalar> std::fmt::Debug for SbpOperators1D<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SbpOperators1D")
            .field("p", &self.p)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

pub struct VariableD2<T: Scalar> {
    pub c: Vec<T>,
    pub a: DMatrix<T>,
    pub d2: DMatrix<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BorrowingConstants {
    pub l: usize,
    pub beta: f64,
    pub alpha: f64,
}

pub fn build_first_derivative<T: Scalar>(p: usize, n: usize) -> Result<SbpOperators1D<T>> {
    build_first_derivative_with(p, n, Validation::Skip)
}

pub fn build_first_derivative_with<T: Scalar>(
    p: usize,
    n: usize,
    validation: Validation,
) -> Result<SbpOperators1D<T>> {
    let min = min_intervals(p)?;
    if n < min {
        return Err(Error::TooFewIntervals {
            order: 2 * p,
            n,
            min,
        });
    }
    let cl = tables::closure(p);
    let np = n + 1;
    let big_n = BigRational::from_integer((n as i64).into());
    let hq = BigRational::one() / &big_n;
    let conv = |r: &BigRational| T::from_rational(r);

    let nb = cl.hb.len();
    let mut hdiag = vec![T::from_rational(&hq); np];
    for (i, w) in cl.hb.iter().enumerate() {
        let v = conv(&(w * &hq));
        hdiag[i] = v.clone();
        hdiag[n - i] = v;
    }

    let mut q = DMatrix::from_element(np, np, T::zero());
    for (i, row) in cl.qb.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_zero() {
                q[(i, j)] = conv(v);
                q[(n - i, n - j)] = -conv(v);
            }
        }
    }
    for i in nb..np.saturating_sub(nb) {
        for (k, a) in cl.interior.iter().enumerate() {
            let k = k + 1;
            q[(i, i + k)] = conv(a);
            q[(i, i - k)] = -conv(a);
        }
    }
    let mut d = DMatrix::from_element(np, np, T::zero());
    for i in 0..np {
        for j in 0..np {
            if !q[(i, j)].is_zero() {
                d[(i, j)] = q[(i, j)].clone() / hdiag[i].clone();
            }
        }
    }

    let mut d0 = vec![T::zero(); np];
    let mut dn = vec![T::zero(); np];
    for (j, v) in cl.d0.iter().enumerate() {
        let s = conv(&(v * &big_n));
        d0[j] = s.clone();
        dn[n - j] = -s;
    }

    let sparse_rows = |m: &DMatrix<T>| -> Vec<Vec<(usize, T)>> {
        (0..np)
            .map(|i| {
                (0..np)
                    .filter(|&j| !m[(i, j)].is_zero())
                    .map(|j| (j, m[(i, j)].clone()))
                    .collect()
            })
            .collect()
    };
    let qrows = sparse_rows(&q);
    let drows = sparse_rows(&d);

    let mut remainder = Vec::new();
    for term in &cl.remainder {
        let k = term.k;
        let windows = np.saturating_sub(k);
        let weight = (0..windows)
            .map(|s| {
                let t = s.min(n - k - s);
                term.boundary
                    .get(t)
                    .map(|w| conv(&(w * &big_n)))
                    .unwrap_or_else(|| conv(&big_n))
            })
            .collect();
        let diff = (0..=k)
            .map(|t| {
                let b = binomial(k, t) as i64;
                T::from_i64(if (k - t) % 2 == 0 { b } else { -b })
            })
            .collect();
        remainder.push(RemainderTerm {
            k,
            offset: (k + 1 - term.sample.len()) / 2,
            sample: term.sample.iter().map(conv).collect(),
            weight,
            diff,
        });
    }

    let span = drows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |(j, _)| i.abs_diff(*j)))
        .max()
        .unwrap_or(0);
    let kmax = remainder.iter().map(|t| t.k).max().unwrap_or(0);
    let ops = SbpOperators1D {
        p,
        n,
        h: T::from_rational(&hq),
        hdiag,
        q,
        d,
        d0,
        dn,
        qrows,
        drows,
        remainder,
        bandwidth: (2 * span).max(kmax),
    };
    if validation == Validation::Check {
        ops.check_invariants(1e-12)?;
    }
    Ok(ops)
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

impl<T: Scalar> SbpOperators1D<T> {
    pub fn size(&self) -> usize {
        self.n + 1
    }

    /// Nonzeros of row i of Q as (column, value).
    pub fn q_row(&self, i: usize) -> &[(usize, T)] {
        &self.qrows[i]
    }

    pub fn d_row(&self, i: usize) -> &[(usize, T)] {
        &self.drows[i]
    }

    /// Nonzeros of d0 as (index, value).
    pub fn d0_entries(&self) -> Vec<(usize, T)> {
        nonzeros(&self.d0)
    }

    pub fn dn_entries(&self) -> Vec<(usize, T)> {
        nonzeros(&self.dn)
    }

    /// Half-bandwidth of every A^(c) built from these operators.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Emits the nonzeros of A^(c) without validating c. Each (i, j) is
    /// emitted at most once.
    pub fn stiffness_entries(&self, c: &[T], mut emit: impl FnMut(usize, usize, T)) {
        let np = self.size();
        let bw = self.bandwidth;
        let width = 2 * bw + 1;
        let mut band = vec![T::zero(); np * width];
        let mut add = |i: usize, j: usize, v: T| {
            let slot = i * width + (j + bw - i);
            band[slot] = band[slot].clone() + v;
        };
        for m in 0..np {
            let w = self.hdiag[m].clone() * c[m].clone();
            let row = &self.drows[m];
            for (a, va) in row {
                let wa = w.clone() * va.clone();
                for (b, vb) in row {
                    add(*a, *b, wa.clone() * vb.clone());
                }
            }
        }
        for term in &self.remainder {
            for (s, wt) in term.weight.iter().enumerate() {
                let mut chat = T::zero();
                for (t, smp) in term.sample.iter().enumerate() {
                    chat = chat + smp.clone() * c[s + term.offset + t].clone();
                }
                let scale = wt.clone() * chat;
                for a in 0..=term.k {
                    let sa = scale.clone() * term.diff[a].clone();
                    for b in 0..=term.k {
                        add(s + a, s + b, sa.clone() * term.diff[b].clone());
                    }
                }
            }
        }
        for i in 0..np {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(self.n);
            for j in lo..=hi {
                let v = &band[i * width + (j + bw - i)];
                if !v.is_zero() {
                    emit(i, j, v.clone());
                }
            }
        }
    }

    /// Dense A^(c).
    pub fn stiffness(&self, c: &[T]) -> Result<DMatrix<T>> {
        self.check_coefficients(c)?;
        let np = self.size();
        let mut a = DMatrix::from_element(np, np, T::zero());
        self.stiffness_entries(c, |i, j, v| a[(i, j)] = v);
        Ok(a)
    }

    pub fn second_derivative(&self, c: &[T]) -> Result<VariableD2<T>> {
        let a = self.stiffness(c)?;
        let np = self.size();
        let n = self.n;
        let mut hd2 = -a.clone();
        for j in 0..np {
            hd2[(n, j)] = hd2[(n, j)].clone() + c[n].clone() * self.dn[j].clone();
            hd2[(0, j)] = hd2[(0, j)].clone() - c[0].clone() * self.d0[j].clone();
        }
        for i in 0..np {
            for j in 0..np {
                hd2[(i, j)] = hd2[(i, j)].clone() / self.hdiag[i].clone();
            }
        }
        Ok(VariableD2 {
            c: c.to_vec(),
            a,
            d2: hd2,
        })
    }

    /// R = A^(c) − Dᵀ C H D.
    pub fn remainder_matrix(&self, c: &[T]) -> Result<DMatrix<T>> {
        let mut r = self.stiffness(c)?;
        for m in 0..self.size() {
            let w = self.hdiag[m].clone() * c[m].clone();
            let row = &self.drows[m];
            for (a, va) in row {
                for (b, vb) in row {
                    r[(*a, *b)] = r[(*a, *b)].clone() - w.clone() * va.clone() * vb.clone();
                }
            }
        }
        Ok(r)
    }

    pub fn check_coefficients(&self, c: &[T]) -> Result<()> {
        if c.len() != self.size() {
            return Err(Error::LengthMismatch {
                module: "sbp1d",
                expected: self.size(),
                got: c.len(),
            });
        }
        for (index, v) in c.iter().enumerate() {
            if *v <= T::zero() {
                return Err(Error::NonPositiveCoefficient {
                    index,
                    value: v.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Verifies the defining properties of the first-derivative operators.
    /// `tol` is relative to the magnitude of the quantities compared.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let np = self.size();
        let n = self.n;
        let fail = |msg: String| Err(Error::Invariant(msg));
        if let Some(i) = self.hdiag.iter().position(|v| *v <= T::zero()) {
            return fail(format!("H[{i}] is not positive"));
        }
        for i in 0..np {
            for j in 0..np {
                let mut want = T::zero();
                if i == j && i == 0 {
                    want = -T::one();
                }
                if i == j && i == n {
                    want = T::one();
                }
                let dev = (self.q[(i, j)].clone() + self.q[(j, i)].clone() - want).as_f64();
                if dev.abs() > tol {
                    return fail(format!("Q+Q^T deviates by {dev:e} at ({i}, {j})"));
                }
            }
        }
        let nb = tables::closure(self.p).hb.len();
        let x: Vec<T> = (0..np)
            .map(|i| T::from_i64(i as i64) * self.h.clone())
            .collect();
        for q in 0..=2 * self.p {
            let u: Vec<T> = x.iter().map(|xi| pow(xi, q)).collect();
            for i in 0..np {
                let boundary = i < nb || i > n - nb;
                if boundary && q > self.p {
                    continue;
                }
                let got = dot(&self.drows[i], &u);
                let want = if q == 0 {
                    T::zero()
                } else {
                    T::from_i64(q as i64) * pow(&x[i], q - 1)
                };
                let scale = 1.0 + want.as_f64().abs() * (n as f64);
                if (got - want).as_f64().abs() > tol * scale * (n as f64) {
                    return fail(format!("D row {i} not exact for r^{q}"));
                }
            }
            if q <= self.p {
                let want0 = if q == 1 { T::one() } else { T::zero() };
                let wantn = if q == 0 {
                    T::zero()
                } else {
                    T::from_i64(q as i64)
                };
                let g0 = dense_dot(&self.d0, &u) - want0;
                let gn = dense_dot(&self.dn, &u) - wantn;
                if g0.as_f64().abs() > tol * (n as f64) || gn.as_f64().abs() > tol * (n as f64) {
                    return fail(format!("boundary derivative not exact for r^{q}"));
                }
            }
        }
        Ok(())
    }
}

impl SbpOperators1D<f64> {
    /// Largest β with A^(c) − β h (c̲₀ d₀d₀ᵀ + c̲_N d_N d_Nᵀ) ⪰ 0, where c̲ is the
    /// minimum of c over the l+1 points nearest each boundary. The stored
    /// table value is valid for these operators when it does not exceed this.
    pub fn borrowing_capacity(&self, c: &[f64], l: usize) -> Result<f64> {
        let mut a = self.stiffness(c)?;
        let np = self.size();
        let n = self.n;
        a.add_scalar_mut(1.0);
        let chol = nalgebra::Cholesky::new(a)
            .ok_or_else(|| Error::Invariant("A + 11^T is not positive definite".into()))?;
        let w = l.min(n);
        let c0 = c[..=w].iter().cloned().fold(f64::INFINITY, f64::min);
        let cn = c[n - w..].iter().cloned().fold(f64::INFINITY, f64::min);
        let mut u = DMatrix::zeros(np, 2);
        for j in 0..np {
            u[(j, 0)] = (self.h * c0).sqrt() * self.d0[j];
            u[(j, 1)] = (self.h * cn).sqrt() * self.dn[j];
        }
        let x = chol.solve(&u);
        let small = u.transpose() * x;
        let lmax = small.symmetric_eigenvalues().max();
        Ok(1.0 / lmax)
    }
}

fn nonzeros<T: Scalar>(v: &[T]) -> Vec<(usize, T)> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(i, x)| (i, x.clone()))
        .collect()
}

fn dot<T: Scalar>(row: &[(usize, T)], u: &[T]) -> T {
    row.iter()
        .fold(T::zero(), |acc, (j, v)| acc + v.clone() * u[*j].clone())
}

fn dense_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

fn pow<T: Scalar>(x: &T, q: usize) -> T {
    (0..q).fold(T::one(), |acc, _| acc * x.clone())
}

/// Table values for the borrowing lemma. α is read from the operators.
pub fn borrowing_constants<T: Scalar>(
    p: usize,
    ops: &SbpOperators1D<T>,
) -> Result<BorrowingConstants> {
    let (l, beta) = match p {
        1 => (2, 0.363636363),
        2 => (4, 0.2505765857),
        3 => (6, 0.1878687080),
        _ => return Err(Error::UnsupportedOrder(p)),
    };
    let n = ops.n;
    let corner = if ops.hdiag[0] < ops.hdiag[n] {
        ops.hdiag[0].clone()
    } else {
        ops.hdiag[n].clone()
    };
    let alpha = (corner / ops.h.clone()).as_f64();
    Ok(BorrowingConstants { l, beta, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(4, 0), 1);
        assert_eq!(binomial(5, 5), 1);
    }

    #[test]
    fn second_order_rows() {
        let ops = build_first_derivative::<f64>(1, 4).unwrap();
        assert_eq!(ops.d_row(0), &[(0, -4.0), (1, 4.0)]);
        assert_eq!(ops.hdiag, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn too_small_grids_rejected() {
        assert!(matches!(
            build_first_derivative::<f64>(3, 10),
            Err(Error::TooFewIntervals { min: 11, .. })
        ));
        assert!(matches!(
            build_first_derivative::<f64>(4, 20),
            Err(Error::UnsupportedOrder(4))
        ));
    }

    #[test]
    fn band_covers_all_entries() {
        for p in 1..=3 {
            let n = accurate_min_intervals(p).unwrap() + 3;
            let ops = build_first_derivative::<f64>(p, n).unwrap();
            let c = vec![1.0; n + 1];
            ops.stiffness_entries(&c, |i, j, _| assert!(i.abs_diff(j) <= ops.bandwidth()));
        }
    }
}
