//! Dense matrices over the rationals and the exact linear algebra built on them.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::poly::MultiPoly;
use super::rational::{format_rational, positive_divisors, rat, Rational};
use super::AlgebraError;

#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RatMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RatMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        RatMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rat(x)).collect())
                .collect(),
        )
    }

    /// Builds a matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, cols: &[Vec<Rational>]) -> Self {
        let mut m = RatMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, x) in c.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn diagonal(d: &[Rational]) -> Self {
        let mut m = RatMatrix::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> Vec<Rational> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, rhs: &RatMatrix) -> Result<RatMatrix, AlgebraError> {
        if self.cols != rhs.rows {
            return Err(AlgebraError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = RatMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    pub fn add(&self, rhs: &RatMatrix) -> RatMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> RatMatrix {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    /// `self - c*I`.
    pub fn shift_diagonal(&self, c: &Rational) -> RatMatrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= c;
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> RatMatrix {
        let mut m = RatMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn permute_rows(&self, order: &[usize]) -> RatMatrix {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.submatrix(order, &cols)
    }

    pub fn permute_columns(&self, order: &[usize]) -> RatMatrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&rows, order)
    }

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = m[(r, c)].recip();
            for j in c..m.cols {
                m[(r, j)] = &m[(r, j)] * &inv;
            }
            for i in 0..m.rows {
                if i != r && !m[(i, c)].is_zero() {
                    let f = m[(i, c)].clone();
                    for j in c..m.cols {
                        let d = &f * &m[(r, j)];
                        m[(i, j)] -= d;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right nullspace. Each basis vector has a 1 in one free
    /// column and 0 in the others.
    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rational::zero(); self.cols];
                v[f] = Rational::one();
                for (row, &pc) in pivots.iter().enumerate() {
                    v[pc] = -r[(row, f)].clone();
                }
                v
            })
            .collect()
    }

    pub fn determinant(&self) -> Result<Rational, AlgebraError> {
        if !self.is_square() {
            return Err(AlgebraError::Shape(format!(
                "determinant of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let mut m = self.clone();
        let n = self.rows;
        let mut det = Rational::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else {
                return Ok(Rational::zero());
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let piv = m[(c, c)].clone();
            det *= &piv;
            for i in c + 1..n {
                if !m[(i, c)].is_zero() {
                    let f = &m[(i, c)] / &piv;
                    for j in c..n {
                        let d = &f * &m[(c, j)];
                        m[(i, j)] -= d;
                    }
                }
            }
        }
        Ok(det)
    }

    pub fn inverse(&self) -> Result<Option<RatMatrix>, AlgebraError> {
        if !self.is_square() {
            return Err(AlgebraError::Shape("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = RatMatrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Rational::one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Ok(None);
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        let rows: Vec<usize> = (0..n).collect();
        Ok(Some(r.submatrix(&rows, &cols)))
    }

    /// Coefficients of `det(xI - self)`, lowest degree first (monic).
    ///
    /// Faddeev-LeVerrier: exact over the rationals since the only divisions
    /// are by the integers `1..=n`.
    pub fn char_poly_coeffs(&self) -> Result<Vec<Rational>, AlgebraError> {
        if !self.is_square() {
            return Err(AlgebraError::Shape(format!(
                "characteristic polynomial of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut coeffs = vec![Rational::zero(); n + 1];
        coeffs[n] = Rational::one();
        let mut m = RatMatrix::zeros(n, n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self.mul(&m)?;
            for i in 0..n {
                next[(i, i)] += &coeffs[n - k + 1];
            }
            let am = self.mul(&next)?;
            let trace: Rational = (0..n).map(|i| am[(i, i)].clone()).sum();
            coeffs[n - k] = -trace / rat(k as i64);
            m = next;
        }
        Ok(coeffs)
    }

    /// Characteristic polynomial `det(lambda*I - self)` as a polynomial in `lambda`.
    pub fn char_poly(&self) -> Result<MultiPoly, AlgebraError> {
        let c = self.char_poly_coeffs()?;
        Ok(univariate_to_poly(&c, "lambda"))
    }

    /// Integer eigenvalues with multiplicities and exact eigenbases, or the
    /// unfactored remainder when the spectrum is not entirely integral.
    pub fn integer_eigen_data(&self) -> Result<EigenOutcome, AlgebraError> {
        let cp = self.char_poly_coeffs()?;
        let (roots, remainder) = integer_roots(&cp);
        let data: Vec<EigenData> = roots
            .into_iter()
            .map(|(lambda, mult)| {
                let basis = self.shift_diagonal(&rat(lambda)).nullspace();
                EigenData {
                    eigenvalue: lambda,
                    algebraic_multiplicity: mult,
                    geometric_multiplicity: basis.len(),
                    basis,
                }
            })
            .collect();
        if remainder.len() > 1 {
            Ok(EigenOutcome::NonIntegerSpectrum {
                integer_part: data,
                remainder: univariate_to_poly(&remainder, "lambda"),
            })
        } else {
            Ok(EigenOutcome::Integer(data))
        }
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            let r: Vec<String> = self.row(i).iter().map(format_rational).collect();
            write!(f, "[{}]", r.join(", "))?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenData {
    pub eigenvalue: i64,
    pub algebraic_multiplicity: usize,
    pub geometric_multiplicity: usize,
    pub basis: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EigenOutcome {
    Integer(Vec<EigenData>),
    NonIntegerSpectrum {
        integer_part: Vec<EigenData>,
        remainder: MultiPoly,
    },
}

pub fn univariate_to_poly(coeffs: &[Rational], var: &str) -> MultiPoly {
    let x = MultiPoly::var(var);
    coeffs
        .iter()
        .enumerate()
        .map(|(e, c)| x.pow(e as u32).scale(c))
        .sum()
}

fn horner(coeffs: &[Rational], x: &Rational) -> Rational {
    coeffs
        .iter()
        .rev()
        .fold(Rational::zero(), |acc, c| acc * x + c)
}

/// Synthetic division by `(x - r)`; assumes `r` is a root.
fn deflate(coeffs: &[Rational], r: &Rational) -> Vec<Rational> {
    let n = coeffs.len() - 1;
    let mut out = vec![Rational::zero(); n];
    let mut carry = Rational::zero();
    for k in (1..=n).rev() {
        carry = &coeffs[k] + &carry * r;
        out[k - 1] = carry.clone();
    }
    out
}

/// Integer roots (ascending, with multiplicity) of a monic rational polynomial,
/// plus the cofactor left after removing them.
pub fn integer_roots(coeffs: &[Rational]) -> (Vec<(i64, usize)>, Vec<Rational>) {
    let mut p = coeffs.to_vec();
    while p.len() > 1 && p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    let mut found: Vec<(i64, usize)> = Vec::new();
    let bump = |r: i64, found: &mut Vec<(i64, usize)>| match found.iter_mut().find(|(x, _)| *x == r) {
        Some(e) => e.1 += 1,
        None => found.push((r, 1)),
    };
    while p.len() > 1 && p[0].is_zero() {
        p.remove(0);
        bump(0, &mut found);
    }
    if p.len() > 1 {
        // Integer multiple with integer coefficients; integer roots divide its constant term.
        let lcm = p
            .iter()
            .fold(BigInt::one(), |acc, c| num_integer::Integer::lcm(&acc, c.denom()));
        let c0 = (&p[0] * Rational::from_integer(lcm)).to_integer();
        let mut candidates: Vec<i64> = Vec::new();
        for d in positive_divisors(&c0) {
            if let Ok(v) = i64::try_from(d) {
                candidates.push(v);
                candidates.push(-v);
            }
        }
        candidates.sort_by_key(|v| (v.abs(), v.is_positive()));
        for r in candidates {
            let rr = rat(r);
            while p.len() > 1 && horner(&p, &rr).is_zero() {
                p = deflate(&p, &rr);
                bump(r, &mut found);
            }
        }
    }
    found.sort();
    (found, p)
}

/// Outcome of solving `M x = b` with polynomial right sides.
#[derive(Clone, Debug, PartialEq)]
pub enum AffineSolution {
    Solved {
        particular: Vec<MultiPoly>,
        nullspace: Vec<Vec<Rational>>,
    },
    Inconsistent {
        witness: MultiPoly,
    },
}

/// Solves `M x = b` where `M` is rational and `b` has polynomial entries.
/// Free coordinates of the particular solution are set to zero.
pub fn solve_affine(m: &RatMatrix, b: &[MultiPoly]) -> Result<AffineSolution, AlgebraError> {
    if b.len() != m.rows() {
        return Err(AlgebraError::Shape(format!(
            "right side has {} entries for {} rows",
            b.len(),
            m.rows()
        )));
    }
    let mut a = m.clone();
    let mut rhs = b.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..a.cols() {
        if r == a.rows() {
            break;
        }
        let Some(p) = (r..a.rows()).find(|&i| !a[(i, c)].is_zero()) else {
            continue;
        };
        if p != r {
            a.swap_rows(p, r);
            rhs.swap(p, r);
        }
        let inv = a[(r, c)].recip();
        for j in c..a.cols() {
            a[(r, j)] = &a[(r, j)] * &inv;
        }
        rhs[r] = rhs[r].scale(&inv);
        for i in 0..a.rows() {
            if i != r && !a[(i, c)].is_zero() {
                let f = a[(i, c)].clone();
                for j in c..a.cols() {
                    let d = &f * &a[(r, j)];
                    a[(i, j)] -= d;
                }
                rhs[i] = &rhs[i] - &rhs[r].scale(&f);
            }
        }
        pivots.push(c);
        r += 1;
    }
    if let Some(w) = rhs[r..].iter().find(|p| !p.is_zero()) {
        return Ok(AffineSolution::Inconsistent { witness: w.clone() });
    }
    let mut particular = vec![MultiPoly::zero(); a.cols()];
    for (row, &pc) in pivots.iter().enumerate() {
        particular[pc] = rhs[row].clone();
    }
    Ok(AffineSolution::Solved {
        particular,
        nullspace: m.nullspace(),
    })
}

/// `<v, J w>` with the standard symplectic `J = [[0, I], [-I, 0]]`.
pub fn symplectic_product(v: &[Rational], w: &[Rational]) -> Rational {
    assert_eq!(v.len(), w.len());
    assert!(v.len().is_multiple_of(2));
    let n = v.len() / 2;
    (0..n)
        .map(|i| &v[i] * &w[n + i] - &v[n + i] * &w[i])
        .sum()
}

/// The standard symplectic matrix of size `2n`.
pub fn standard_j(n: usize) -> RatMatrix {
    let mut j = RatMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = Rational::one();
        j[(n + i, i)] = -Rational::one();
    }
    j
}
