//! Dense univariate polynomials with real coefficients: Horner evaluation,
//! construction by interpolation, and real root extraction via companion
//! matrix eigenvalues.

use nalgebra::{Complex, DMatrix};

/// Default bound on |imaginary part| / (1 + |real part|) for an eigenvalue to
/// count as a real root.
pub const REAL_TOL_DEFAULT: f64 = 1e-7;
/// Default relative threshold under which leading coefficients are trimmed.
pub const LEADING_TOL_DEFAULT: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolyError {
    #[error("degree {degree} needs {} samples, got {nodes} nodes and {values} values", degree + 1)]
    SampleCountMismatch { degree: usize, nodes: usize, values: usize },
    #[error("interpolation nodes {i} and {j} coincide")]
    DuplicateNodes { i: usize, j: usize },
    #[error("polynomial has no nonzero coefficient")]
    ZeroPolynomial,
}

/// Polynomial stored as coefficients in ascending degree order; the stored
/// length is always `nominal_degree + 1`, trailing zeros included.
#[derive(Clone, Debug, PartialEq)]
pub struct DensePolynomial {
    coeffs: Vec<f64>,
}

impl DensePolynomial {
    /// Wraps an ascending-degree coefficient vector. Panics on empty input.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs at least one coefficient");
        DensePolynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nominal degree: one less than the stored coefficient count, trailing
    /// zeros included.
    pub fn nominal_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation over the stored coefficients.
    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Fits the polynomial of degree `degree` through `(nodes[i], values[i])`.
///
/// Newton divided differences on nodes scaled to unit radius, with the nodes
/// visited in Leja order and two iterative-refinement passes over the node
/// residuals — at degree 16 the plain left-to-right Newton triangle loses
/// several digits that the refinement wins back. Exact (to roundoff) for any
/// polynomial of degree ≤ `degree`.
pub fn interpolate(nodes: &[f64], values: &[f64], degree: usize) -> Result<DensePolynomial, PolyError> {
    if nodes.len() != degree + 1 || values.len() != degree + 1 {
        return Err(PolyError::SampleCountMismatch {
            degree,
            nodes: nodes.len(),
            values: values.len(),
        });
    }
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if (nodes[i] - nodes[j]).abs() < 1e-12 {
                return Err(PolyError::DuplicateNodes { i, j });
            }
        }
    }

    let radius = nodes.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let radius = if radius == 0.0 { 1.0 } else { radius };
    let scaled: Vec<f64> = nodes.iter().map(|x| x / radius).collect();
    let order = leja_order(&scaled);
    let u: Vec<f64> = order.iter().map(|&i| scaled[i]).collect();
    let v: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut cu = newton_fit(&u, &v);
    for _ in 0..2 {
        let resid: Vec<f64> = u.iter().zip(&v).map(|(&x, &val)| val - horner(&cu, x)).collect();
        let correction = newton_fit(&u, &resid);
        for (c, d) in cu.iter_mut().zip(correction) {
            *c += d;
        }
    }

    // undo the x = radius·u scaling: c_k = cu_k / radius^k
    let mut pow = 1.0;
    let coeffs = cu
        .into_iter()
        .map(|c| {
            let out = c / pow;
            pow *= radius;
            out
        })
        .collect();
    Ok(DensePolynomial::new(coeffs))
}

/// Visits the largest-magnitude node first, then greedily maximizes the
/// product of distances to the nodes already taken.
fn leja_order(u: &[f64]) -> Vec<usize> {
    let n = u.len();
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let first = (0..n).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
    order.push(first);
    used[first] = true;
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_sep = -1.0;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let sep: f64 = order.iter().map(|&k| (u[j] - u[k]).abs()).product();
            if sep > best_sep {
                best = j;
                best_sep = sep;
            }
        }
        order.push(best);
        used[best] = true;
    }
    order
}

/// Divided-difference fit expanded to ascending monomial coefficients, in the
/// already-scaled variable.
fn newton_fit(u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut dd = v.to_vec();
    for j in 1..n {
        for k in (j..n).rev() {
            dd[k] = (dd[k] - dd[k - 1]) / (u[k] - u[k - j]);
        }
    }
    let mut cu = vec![0.0; n];
    cu[0] = dd[n - 1];
    for j in (0..n - 1).rev() {
        for k in (1..n).rev() {
            cu[k] = cu[k - 1] - u[j] * cu[k];
        }
        cu[0] = -u[j] * cu[0] + dd[j];
    }
    cu
}

/// Real roots plus the number of leading coefficients trimmed as noise.
#[derive(Clone, Debug, PartialEq)]
pub struct RealRoots {
    /// Real roots in ascending order; multiple roots appear once per
    /// eigenvalue multiplicity.
    pub roots: Vec<f64>,
    /// Count of trimmed leading coefficients. Each trimmed degree is a root
    /// that escaped to infinity — callers representing angles through a
    /// half-angle parameter read this as "the straight-back angle is a
    /// candidate" and must test it separately.
    pub trimmed: usize,
}

/// Eigenvalues of the balanced companion matrix, plus the leading-coefficient
/// trim count. The full complex spectrum is returned: near multiple roots the
/// eigenvalues stray far enough from the real axis that a caller may want to
/// polish every real part against its own residual instead of trusting an
/// imaginary-part cutoff.
pub fn companion_eigenvalues(
    poly: &DensePolynomial,
    leading_tol: f64,
) -> Result<(Vec<Complex<f64>>, usize), PolyError> {
    let coeffs = poly.coeffs();
    let max_abs = poly.max_abs_coeff();
    if max_abs == 0.0 {
        return Err(PolyError::ZeroPolynomial);
    }
    let mut hi = coeffs.len() - 1;
    let mut trimmed = 0;
    while hi > 0 && coeffs[hi].abs() < leading_tol * max_abs {
        hi -= 1;
        trimmed += 1;
    }
    if hi == 0 {
        return Ok((Vec::new(), trimmed));
    }

    let lead = coeffs[hi];
    let mut companion = DMatrix::<f64>::zeros(hi, hi);
    for i in 0..hi {
        companion[(i, hi - 1)] = -coeffs[i] / lead;
        if i + 1 < hi {
            companion[(i + 1, i)] = 1.0;
        }
    }
    balance(&mut companion);
    let eigenvalues = companion.complex_eigenvalues();
    Ok((eigenvalues.iter().copied().collect(), trimmed))
}

/// Real roots of `poly`, ascending. Leading coefficients below
/// `leading_tol · max|c|` are trimmed first and the trim count reported;
/// an eigenvalue counts as real when `|Im| ≤ real_tol·(1 + |Re|)`.
pub fn real_roots(poly: &DensePolynomial, real_tol: f64, leading_tol: f64) -> Result<RealRoots, PolyError> {
    let (eigenvalues, trimmed) = companion_eigenvalues(poly, leading_tol)?;
    let mut roots: Vec<f64> = eigenvalues
        .into_iter()
        .filter(|e| e.im.abs() <= real_tol * (1.0 + e.re.abs()))
        .map(|e| e.re)
        .collect();
    roots.sort_by(f64::total_cmp);
    Ok(RealRoots { roots, trimmed })
}

/// Rescales rows against columns so eigenvalue extraction works on a matrix
/// whose row and column norms agree; exact in floating point because every
/// scale factor is a power of two.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].abs();
                    row += m[(i, j)].abs();
                }
            }
            if col != 0.0 && row != 0.0 {
                let norm = col + row;
                let mut f = 1.0;
                while col < row / RADIX {
                    f *= RADIX;
                    col *= SQRDX;
                }
                while col > row * RADIX {
                    f /= RADIX;
                    col /= SQRDX;
                }
                if (col + row) / f < 0.95 * norm {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        m[(i, j)] *= g;
                    }
                    for j in 0..n {
                        m[(j, i)] *= f;
                    }
                }
            }
        }
    }
}
