//! Dense symmetric eigendecomposition and Cholesky factorization.
//!
//! The eigensolver is the classic two-stage scheme: Householder reduction to
//! tridiagonal form followed by the implicit QL iteration with Wilkinson-style
//! shifts (the EISPACK `tred2`/`tql2` pair). It is written against the generic
//! [`Scalar`] trait so that every matrix function works for `f32` and `f64`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::scalar::Scalar;

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

impl<T: Scalar> SymEig<T> {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with<F: Fn(T) -> T>(&self, f: F) -> Array2<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let fj = f(lambda);
            for i in 0..n {
                scaled[[i, j]] = scaled[[i, j]] * fj;
            }
        }
        let mut out = scaled.dot(&self.vectors.t());
        symmetrize_in_place(&mut out);
        out
    }

    pub fn reconstruct(&self) -> Array2<T> {
        self.reconstruct_with(|x| x)
    }

    pub fn max_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn min_value(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigenNoConvergence;

/// Eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> Result<SymEig<T>, EigenNoConvergence> {
    decompose(a, true).map(|(values, vectors)| SymEig {
        values,
        vectors: vectors.expect("vectors requested"),
    })
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues<T: Scalar>(
    a: ArrayView2<'_, T>,
) -> Result<Array1<T>, EigenNoConvergence> {
    decompose(a, false).map(|(values, _)| values)
}

fn decompose<T: Scalar>(
    a: ArrayView2<'_, T>,
    want_vectors: bool,
) -> Result<(Array1<T>, Option<Array2<T>>), EigenNoConvergence> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigendecomposition needs a square matrix");
    if n == 0 {
        return Ok((Array1::zeros(0), want_vectors.then(|| Array2::zeros((0, 0)))));
    }
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let x = a[[i, j]];
            v[i * n + j] = x;
            v[j * n + i] = x;
        }
    }
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    implicit_ql(n, &mut v, &mut d, &mut e, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let vectors = want_vectors.then(|| {
        let mut out = Array2::zeros((n, n));
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                out[[row, col]] = v[row * n + src];
            }
        }
        out
    });
    Ok((values, vectors))
}

// Householder reduction; on exit `v` holds the accumulated orthogonal transform,
// `d` the diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let idx = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale = scale + d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = T::zero();
                v[idx(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] = d[k] / scale;
                h = h + d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    g = g + v[idx(k, j)] * d[k];
                    e[k] = e[k] + v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] = v[idx(k, j)] - (f * e[k] + g * d[k]);
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g = g + v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] = v[idx(k, j)] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = T::zero();
    }
    v[idx(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

fn implicit_ql<T: Scalar>(
    n: usize,
    v: &mut [T],
    d: &mut [T],
    e: &mut [T],
    want_vectors: bool,
) -> Result<(), EigenNoConvergence> {
    let idx = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::one() + T::one();
    let eps = T::epsilon();
    let max_sweeps = 60 * n.max(1);
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m >= n {
            m = n - 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(EigenNoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let vk1 = v[idx(k, i + 1)];
                            let vk = v[idx(k, i)];
                            v[idx(k, i + 1)] = s * vk + c * vk1;
                            v[idx(k, i)] = c * vk - s * vk1;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Lower-triangular `L` with `L·Lᵀ = a`, or `None` when `a` is not positive definite.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag = diag - l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s = s - l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L·X = B` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s = s - l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    x
}

/// Solves `Lᵀ·X = B` for lower-triangular `L`.
pub fn solve_lower_transpose<T: Scalar>(l: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in (i + 1)..n {
                s = s - l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    x
}

pub fn symmetrize_in_place<T: Scalar>(m: &mut Array2<T>) {
    let n = m.nrows();
    let half = T::of(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (m[[i, j]] + m[[j, i]]) * half;
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
}

pub fn frobenius_norm<T: Scalar>(m: &Array2<T>) -> T {
    m.iter().map(|&x| x * x).sum::<T>().sqrt()
}
