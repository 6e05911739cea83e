use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};

use super::dominant::DominantData;
use crate::algebra::rational::{rat, Rational};
use crate::algebra::{EigenOutcome, MultiPoly, RatMatrix, Symbol};
use crate::model::{time, time0, OdeSystem};

/// A Kowalevskian entry depends on parameters or on `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonConstantKowalevskian {
    pub row: usize,
    pub col: usize,
    pub entry: MultiPoly,
}

/// `K = d(f^D)/du (t0, c) + diag(k)`.
pub fn kowalevskian(sys: &OdeSystem, dd: &DominantData) -> Result<RatMatrix, NonConstantKowalevskian> {
    let n = sys.dim();
    let mut bind: HashMap<Symbol, MultiPoly> =
        sys.vars.iter().cloned().zip(dd.leading.iter().cloned()).collect();
    bind.insert(time(), MultiPoly::symbol(time0()));
    let mut k = RatMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut entry = dd.dominant[i].partial_derivative(&sys.vars[j]).substitute(&bind);
            if i == j {
                entry = entry + MultiPoly::int(dd.exponents[i]);
            }
            match entry.as_constant() {
                Some(v) => k[(i, j)] = v,
                None => return Err(NonConstantKowalevskian { row: i, col: j, entry }),
            }
        }
    }
    Ok(k)
}

/// One distinct resonance with its eigenbasis (columns of the resonance matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceBlock {
    pub lambda: i64,
    pub multiplicity: usize,
    pub basis: Vec<Vec<Rational>>,
}

/// Eigen-structure of the Kowalevskian matrix, resonances in increasing order
/// starting with `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceStructure {
    pub k: RatMatrix,
    pub blocks: Vec<ResonanceBlock>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResonanceFailure {
    NonIntegerSpectrum { remainder: MultiPoly },
    NegativeResonanceBeyondMinusOne { lambda: i64 },
    MissingMinusOne,
    MinusOneMultiplicityNotOne { algebraic: usize, geometric: usize },
    NotDiagonalizable { lambda: i64, algebraic: usize, geometric: usize },
}

impl fmt::Display for ResonanceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResonanceFailure::NonIntegerSpectrum { remainder } => {
                write!(f, "non-integer spectrum; unfactored part {remainder}")
            }
            ResonanceFailure::NegativeResonanceBeyondMinusOne { lambda } => {
                write!(f, "negative resonance {lambda}")
            }
            ResonanceFailure::MissingMinusOne => write!(f, "-1 is not an eigenvalue"),
            ResonanceFailure::MinusOneMultiplicityNotOne { algebraic, geometric } => write!(
                f,
                "eigenvalue -1 has algebraic multiplicity {algebraic}, geometric {geometric}"
            ),
            ResonanceFailure::NotDiagonalizable {
                lambda,
                algebraic,
                geometric,
            } => write!(
                f,
                "resonance {lambda} has algebraic multiplicity {algebraic} but only {geometric} eigenvectors"
            ),
        }
    }
}

impl ResonanceFailure {
    pub fn tag(&self) -> &'static str {
        match self {
            ResonanceFailure::NonIntegerSpectrum { .. } => "NonIntegerSpectrum",
            ResonanceFailure::NegativeResonanceBeyondMinusOne { .. } => "NegativeResonanceBeyondMinusOne",
            ResonanceFailure::MissingMinusOne => "MissingMinusOne",
            ResonanceFailure::MinusOneMultiplicityNotOne { .. } => "MinusOneMultiplicityNotOne",
            ResonanceFailure::NotDiagonalizable { .. } => "NotDiagonalizable",
        }
    }
}

/// A replacement basis that is not a basis of the same eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisError {
    UnknownResonance(i64),
    NotEigenvector { index: usize },
    WrongSpan,
}

/// Classifies the spectrum of `K` and collects exact eigenbases.
pub fn resonance_structure(k: &RatMatrix) -> Result<ResonanceStructure, ResonanceFailure> {
    let data = match k.integer_eigen_data().expect("Kowalevskian matrix is square") {
        EigenOutcome::Integer(d) => d,
        EigenOutcome::NonIntegerSpectrum { remainder, .. } => {
            return Err(ResonanceFailure::NonIntegerSpectrum { remainder })
        }
    };
    let Some(minus_one) = data.iter().find(|d| d.eigenvalue == -1) else {
        return Err(ResonanceFailure::MissingMinusOne);
    };
    if minus_one.algebraic_multiplicity != 1 || minus_one.geometric_multiplicity != 1 {
        return Err(ResonanceFailure::MinusOneMultiplicityNotOne {
            algebraic: minus_one.algebraic_multiplicity,
            geometric: minus_one.geometric_multiplicity,
        });
    }
    if let Some(d) = data.iter().find(|d| d.eigenvalue < -1) {
        return Err(ResonanceFailure::NegativeResonanceBeyondMinusOne { lambda: d.eigenvalue });
    }
    if let Some(d) = data
        .iter()
        .find(|d| d.geometric_multiplicity < d.algebraic_multiplicity)
    {
        return Err(ResonanceFailure::NotDiagonalizable {
            lambda: d.eigenvalue,
            algebraic: d.algebraic_multiplicity,
            geometric: d.geometric_multiplicity,
        });
    }
    Ok(ResonanceStructure {
        k: k.clone(),
        blocks: data
            .into_iter()
            .map(|d| ResonanceBlock {
                lambda: d.eigenvalue,
                multiplicity: d.algebraic_multiplicity,
                basis: d.basis,
            })
            .collect(),
    })
}

impl ResonanceStructure {
    /// Distinct resonances, increasing.
    pub fn resonances(&self) -> Vec<i64> {
        self.blocks.iter().map(|b| b.lambda).collect()
    }

    /// Resonances repeated by multiplicity.
    pub fn resonances_with_multiplicity(&self) -> Vec<i64> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.lambda, b.multiplicity))
            .collect()
    }

    pub fn block(&self, lambda: i64) -> Option<&ResonanceBlock> {
        self.blocks.iter().find(|b| b.lambda == lambda)
    }

    /// `n_s`: the total multiplicity of all resonances including `-1`.
    pub fn n_s(&self) -> usize {
        self.blocks.iter().map(|b| b.multiplicity).sum()
    }

    /// Partial sums `n_l = m_0 + ... + m_l`.
    pub fn partial_sums(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                *acc += b.multiplicity;
                Some(*acc)
            })
            .collect()
    }

    pub fn largest(&self) -> i64 {
        self.blocks.last().map_or(-1, |b| b.lambda)
    }

    /// The resonance matrix `R = (R_0 R_1 ... R_s)`, one column per basis vector.
    pub fn matrix(&self) -> RatMatrix {
        let cols: Vec<Vec<Rational>> = self.blocks.iter().flat_map(|b| b.basis.clone()).collect();
        RatMatrix::from_columns(self.k.rows(), &cols)
    }

    /// Replaces the basis of one eigenspace after checking that the new vectors
    /// are eigenvectors spanning the same space.
    pub fn with_basis(&self, lambda: i64, basis: Vec<Vec<Rational>>) -> Result<Self, BasisError> {
        let idx = self
            .blocks
            .iter()
            .position(|b| b.lambda == lambda)
            .ok_or(BasisError::UnknownResonance(lambda))?;
        let old = &self.blocks[idx];
        for (i, v) in basis.iter().enumerate() {
            let kv = self.k.mul_vec(v);
            let lv: Vec<Rational> = v.iter().map(|x| x * rat(lambda)).collect();
            if v.iter().all(Zero::is_zero) || kv != lv {
                return Err(BasisError::NotEigenvector { index: i });
            }
        }
        let n = self.k.rows();
        let m = RatMatrix::from_columns(n, &basis);
        if basis.len() != old.basis.len() || m.rank() != basis.len() {
            return Err(BasisError::WrongSpan);
        }
        let mut out = self.clone();
        out.blocks[idx].basis = basis;
        Ok(out)
    }
}

/// The basic resonance vector `-k*c`.
pub fn basic_resonance_vector(dd: &DominantData) -> Option<Vec<Rational>> {
    let c = dd.rational_leading()?;
    Some(
        c.iter()
            .zip(&dd.exponents)
            .map(|(ci, &ki)| -(ci * rat(ki)))
            .collect(),
    )
}

/// True iff `-k*c` is nonzero and `(K + I)(-k*c) = 0`.
pub fn basic_resonance_check(dd: &DominantData, k: &RatMatrix) -> bool {
    let Some(v) = basic_resonance_vector(dd) else {
        return false;
    };
    if v.iter().all(Zero::is_zero) {
        return false;
    }
    k.shift_diagonal(&-Rational::one())
        .mul_vec(&v)
        .iter()
        .all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_hamiltonian, parse_system};
    use crate::painleve::dominant::verify_dominant_balance;

    fn consts(v: &[i64]) -> Vec<MultiPoly> {
        v.iter().map(|&x| MultiPoly::int(x)).collect()
    }

    #[test]
    fn small_kowalevskians() {
        let r = parse_system("vars: u\nu' = u^2").unwrap();
        let dd = verify_dominant_balance(&r, &[1], &consts(&[-1])).unwrap();
        let k = kowalevskian(&r, &dd).unwrap();
        assert_eq!(k, RatMatrix::from_i64(&[&[-1]]));
        assert!(basic_resonance_check(&dd, &k));
        let rs = resonance_structure(&k).unwrap();
        assert_eq!(rs.resonances(), vec![-1]);

        let w = parse_system("vars: u1,u2\nu1' = u2\nu2' = 6*u1^2").unwrap();
        let dd = verify_dominant_balance(&w, &[2, 3], &consts(&[1, -2])).unwrap();
        let k = kowalevskian(&w, &dd).unwrap();
        assert_eq!(k, RatMatrix::from_i64(&[&[2, 1], &[12, 3]]));
        assert_eq!(basic_resonance_vector(&dd).unwrap(), vec![rat(-2), rat(6)]);
        assert!(basic_resonance_check(&dd, &k));
        let rs = resonance_structure(&k).unwrap();
        assert_eq!(rs.resonances(), vec![-1, 6]);
        assert_eq!(rs.partial_sums(), vec![1, 2]);
    }

    #[test]
    fn gelfand_dikii_structure() {
        let s = parse_hamiltonian(
            "vars: q1, q2 ; p1, p2\nH = -q1*p2^2 - 2*p1*p2 + 3*q1^2*q2 - q1^4 - q2^2",
        )
        .unwrap()
        .to_system();
        let dd = verify_dominant_balance(&s, &[2, 4, 5, 3], &consts(&[1, 0, -1, 1])).unwrap();
        let k = kowalevskian(&s, &dd).unwrap();
        let rs = resonance_structure(&k).unwrap();
        assert_eq!(rs.resonances(), vec![-1, 2, 5, 8]);
        assert!(rs.blocks.iter().all(|b| b.multiplicity == 1 && b.basis.len() == 1));
        let scaled: Vec<Rational> = rs.blocks[1].basis[0].iter().map(|x| x * rat(6)).collect();
        assert!(rs.with_basis(2, vec![scaled]).is_ok());
        assert_eq!(
            rs.with_basis(2, vec![rs.blocks[2].basis[0].clone()]),
            Err(BasisError::NotEigenvector { index: 0 })
        );
    }

    #[test]
    fn failures() {
        assert!(matches!(
            resonance_structure(&RatMatrix::from_i64(&[&[0, 1], &[-1, 0]])),
            Err(ResonanceFailure::NonIntegerSpectrum { .. })
        ));
        assert_eq!(
            resonance_structure(&RatMatrix::from_i64(&[&[-1, 0], &[0, -2]])),
            Err(ResonanceFailure::NegativeResonanceBeyondMinusOne { lambda: -2 })
        );
        assert!(matches!(
            resonance_structure(&RatMatrix::from_i64(&[&[-1, 0], &[0, -1]])),
            Err(ResonanceFailure::MinusOneMultiplicityNotOne { .. })
        ));
        assert!(matches!(
            resonance_structure(&RatMatrix::from_i64(&[&[-1, 0, 0], &[0, 2, 1], &[0, 0, 2]])),
            Err(ResonanceFailure::NotDiagonalizable { lambda: 2, .. })
        ));
        assert_eq!(
            resonance_structure(&RatMatrix::from_i64(&[&[1]])),
            Err(ResonanceFailure::MissingMinusOne)
        );
    }
}
