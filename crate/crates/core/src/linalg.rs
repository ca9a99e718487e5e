//! Dense linear algebra substrate: matrix exponentials, the Gaussian
//! covariance integral and the semigroup parameter set.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Largest `‖tA‖₁` accepted by [`mat_exp`].
pub const EXP_NORM_LIMIT: f64 = 50.0;

/// `e^{tA}` by scaling and squaring with a diagonal Padé approximant
/// (orders 3 through 13, chosen from the 1-norm of `tA`).
pub fn mat_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !t.is_finite() {
        return Err(invalid(format!("time must be finite, got {t}")));
    }
    let ta = a * t;
    let norm = one_norm(&ta);
    if norm > EXP_NORM_LIMIT {
        return Err(Error::NormTooLarge {
            norm,
            limit: EXP_NORM_LIMIT,
        });
    }
    Ok(expm_pade(&ta, norm))
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

fn expm_pade(a: &DMatrix<f64>, norm: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    if norm == 0.0 {
        return id;
    }
    let (u, v, squarings) = if norm < THETA_3 {
        let (u, v) = pade_low(a, &[120.0, 60.0, 12.0, 1.0]);
        (u, v, 0)
    } else if norm < THETA_5 {
        let (u, v) = pade_low(a, &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]);
        (u, v, 0)
    } else if norm < THETA_7 {
        let (u, v) = pade_low(
            a,
            &[
                17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
            ],
        );
        (u, v, 0)
    } else if norm < THETA_9 {
        let (u, v) = pade_low(
            a,
            &[
                17643225600.0,
                8821612800.0,
                2075673600.0,
                302702400.0,
                30270240.0,
                2162160.0,
                110880.0,
                3960.0,
                90.0,
                1.0,
            ],
        );
        (u, v, 0)
    } else {
        let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s as u32)
    };
    // r = (V - U)^{-1} (V + U)
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is nonsingular for ‖A‖ within the theta bounds");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Odd/even split of a low-order Padé numerator with coefficients `b`.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut odd = &id * b[1];
    let mut even = &id * b[0];
    let mut power = id.clone();
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        odd += &power * b[2 * k + 1];
        even += &power * b[2 * k];
    }
    (a * odd, even)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9]);
    let u = a * (inner_u + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &id * B[1]);
    let inner_v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8]);
    let v = inner_v + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &id * B[0];
    (u, v)
}

/// Relative tolerance requested from the adaptive quadrature.
const GRAM_REL_TOL: f64 = 1e-12;

/// `Q_t = ∫₀ᵗ e^{σA} Q e^{σAᵀ} dσ`, by adaptive Gauss–Legendre quadrature.
pub fn gram_covariance(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t > 0.0) {
        return Err(invalid(format!("covariance time must be positive, got {t}")));
    }
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if q.nrows() != a.nrows() || q.ncols() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: q.nrows(),
        });
    }
    let n = a.nrows();
    let err: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let integrand = |sigma: f64| -> Vec<f64> {
        match mat_exp(a, sigma) {
            Ok(e) => (&e * q * e.transpose()).as_slice().to_vec(),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                vec![0.0; n * n]
            }
        }
    };
    let flat = quadrature::adaptive_vec(&integrand, 0.0, t, GRAM_REL_TOL);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let m = DMatrix::from_column_slice(n, n, &flat);
    // symmetrize away quadrature rounding
    Ok((&m + m.transpose()) * 0.5)
}

/// Symmetric positive-definite square root.
pub fn spd_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(q.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid("matrix is not positive definite"));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let v = &eig.eigenvectors;
    Ok(v * d * v.transpose())
}

/// Tolerance on `|Q - Qᵀ|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Drift `A`, diffusion `Q` and stability index `s` of a (fractional)
/// Ornstein–Uhlenbeck semigroup on `R^N`. `s = 1` is the Gaussian case.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSpec {
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    s: f64,
    q_sqrt: DMatrix<f64>,
}

impl SemigroupSpec {
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, s: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if !q.is_square() {
            return Err(Error::NotSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        if q.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: q.nrows(),
            });
        }
        if a.nrows() == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if a.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        if !(s > 0.0 && s <= 1.0) {
            return Err(invalid(format!("stability index s must lie in (0, 1], got {s}")));
        }
        let asym = (&q - q.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(invalid(format!("Q is not symmetric (|Q - Qᵀ| = {asym:.3e})")));
        }
        let q_sqrt = spd_sqrt(&q).map_err(|_| invalid("Q must be positive definite"))?;
        Ok(Self { a, q, s, q_sqrt })
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(a: f64, q: f64, s: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, q), s)
    }

    /// `A = 0`, `Q = I` in dimension `dim`.
    pub fn isotropic(dim: usize, s: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim), DMatrix::identity(dim, dim), s)
    }

    /// Builds a spec from row-major entries.
    pub fn from_rows(dim: usize, a: &[f64], q: &[f64], s: f64) -> Result<Self> {
        if a.len() != dim * dim || q.len() != dim * dim {
            return Err(invalid(format!(
                "expected {} entries for A and Q, got {} and {}",
                dim * dim,
                a.len(),
                q.len()
            )));
        }
        Self::new(
            DMatrix::from_row_slice(dim, dim, a),
            DMatrix::from_row_slice(dim, dim, q),
            s,
        )
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn drift(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn diffusion_sqrt(&self) -> &DMatrix<f64> {
        &self.q_sqrt
    }
    pub fn stability(&self) -> f64 {
        self.s
    }
    /// Smoothing order `θ = 1/(2s)`.
    pub fn theta(&self) -> f64 {
        0.5 / self.s
    }
    pub fn is_gaussian(&self) -> bool {
        self.s == 1.0
    }
    pub fn has_zero_drift(&self) -> bool {
        self.a.iter().all(|&v| v == 0.0)
    }

    /// The flow `T_t = e^{tA}`.
    pub fn flow(&self, t: f64) -> Result<DMatrix<f64>> {
        mat_exp(&self.a, t)
    }

    pub fn to_record(&self) -> SpecRecord {
        SpecRecord {
            a: rows(&self.a),
            q: rows(&self.q),
            s: self.s,
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializable form of a [`SemigroupSpec`] (row-major matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRecord {
    pub a: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub s: f64,
}

impl TryFrom<SpecRecord> for SemigroupSpec {
    type Error = Error;
    fn try_from(r: SpecRecord) -> Result<Self> {
        let dim = r.a.len();
        let a: Vec<f64> = r.a.concat();
        let q: Vec<f64> = r.q.concat();
        SemigroupSpec::from_rows(dim, &a, &q, r.s)
    }
}

/// Gaussian density with covariance `cov` evaluated at `y`.
pub fn gaussian_density(cov: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    let n = cov.nrows();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("covariance is not positive definite"))?;
    let yv = DVector::from_column_slice(y);
    let z = chol.l().solve_lower_triangular(&yv).expect("triangular solve");
    let det = chol.l().diagonal().iter().product::<f64>().powi(2);
    let norm = ((2.0 * std::f64::consts::PI).powi(n as i32) * det).sqrt();
    Ok((-0.5 * z.norm_squared()).exp() / norm)
}
