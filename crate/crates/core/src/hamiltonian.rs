//! Hamiltonian balances: weighted homogeneity, symplectic resonance bases and
//! the canonical version of the triangular change of variable.

use std::collections::HashMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::matrix::{standard_j, symplectic_product};
use crate::algebra::{MultiPoly, RatMatrix, Rational, Symbol};
use crate::model::HamiltonianSystem;
use crate::painleve::{
    expand_balance, kowalevskian, resonance_structure, verify_dominant_balance, Balance,
    ResonanceStructure,
};
use crate::regularizer::{
    regularize, transform_system, verify_regularity, ChangeOfVariable, ChangePlan, Normalization,
    RegularizeError, SingularWitness, TransformedSystem,
};
use crate::series::{substitute_poly, TruncatedSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("the system has no degrees of freedom")]
    EmptySystem,
    #[error("no leading exponent is positive")]
    NoPositiveExponent,
    #[error("k+l = {sum} for pair {index} but d-1 = {}", d - 1)]
    NotAlmostHomogeneous { index: usize, sum: i64, d: i64 },
    #[error("resonance {lambda} (multiplicity {multiplicity}) has no partner {partner} of the same multiplicity")]
    Unpaired { lambda: i64, partner: i64, multiplicity: usize },
    #[error("<v, Jw> = {value} for resonances {lambda} and {mu}")]
    NonzeroPairing { lambda: i64, mu: i64, value: String },
    #[error("resonance vectors of {lambda} and {mu} are degenerate for the symplectic form")]
    DegenerateGram { lambda: i64, mu: i64 },
    #[error("no canonical exchange gives an admissible pivot order")]
    NoExchange,
    #[error("substituted Hamiltonian keeps order {order}: {coefficient}")]
    SingularHamiltonian { order: i64, coefficient: MultiPoly },
    #[error(transparent)]
    Regularize(#[from] RegularizeError),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// Symplectic normalization of the resonance basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticData {
    pub d: i64,
    pub k: Vec<i64>,
    pub l: Vec<i64>,
    /// `(lambda, d-1-lambda)` with `lambda <= d-1-lambda`, increasing.
    pub pairing: Vec<(i64, i64)>,
    /// Columns `v_1..v_n, w_1..w_n` with `w_i` conjugate to `v_i`; `S^T J S = J`.
    pub s: RatMatrix,
    /// The resonance of each column of `S`.
    pub column_resonances: Vec<i64>,
}

impl SymplecticData {
    pub fn dof(&self) -> usize {
        self.k.len()
    }

    /// `S^T J S == J`.
    pub fn is_symplectic(&self) -> bool {
        is_symplectic(&self.s)
    }

    /// The resonance matrix in increasing resonance order, `S diag(I, T_n)`.
    pub fn resonance_matrix(&self) -> RatMatrix {
        let n = self.dof();
        let order: Vec<usize> = (0..n).chain((n..2 * n).rev()).collect();
        self.s.permute_columns(&order)
    }
}

pub fn is_symplectic(s: &RatMatrix) -> bool {
    let n = s.rows() / 2;
    let j = standard_j(n);
    s.transpose()
        .mul(&j)
        .and_then(|m| m.mul(s))
        .is_ok_and(|m| m == j)
}

/// Weighted degree `d` of `H` under `q_i -> k_i`, `p_i -> l_i`, after checking
/// `k_i + l_i = d - 1` for every pair.
pub fn check_almost_weighted_homogeneous(
    hs: &HamiltonianSystem,
    k: &[i64],
    l: &[i64],
) -> Result<i64, HamiltonianError> {
    if hs.dof() == 0 {
        return Err(HamiltonianError::EmptySystem);
    }
    if !k.iter().chain(l).any(|&x| x > 0) {
        return Err(HamiltonianError::NoPositiveExponent);
    }
    let weights: HashMap<Symbol, i64> = hs
        .q
        .iter()
        .cloned()
        .zip(k.iter().copied())
        .chain(hs.p.iter().cloned().zip(l.iter().copied()))
        .collect();
    let d = hs
        .h
        .weighted_degree(|s| weights.get(s).copied().unwrap_or(0))
        .ok_or(HamiltonianError::NoPositiveExponent)?;
    for (index, (ki, li)) in k.iter().zip(l).enumerate() {
        if ki + li != d - 1 {
            return Err(HamiltonianError::NotAlmostHomogeneous {
                index,
                sum: ki + li,
                d,
            });
        }
    }
    Ok(d)
}

/// Pairs every resonance `lambda` with `d-1-lambda` and checks that eigenvectors
/// of unpaired resonances are orthogonal for `<v, Jw>`.
pub fn symplectic_pairing(rs: &ResonanceStructure, d: i64) -> Result<Vec<(i64, i64)>, HamiltonianError> {
    let mut pairing = Vec::new();
    for b in &rs.blocks {
        let partner = d - 1 - b.lambda;
        match rs.block(partner) {
            Some(p) if p.multiplicity == b.multiplicity => {
                if b.lambda <= partner {
                    pairing.push((b.lambda, partner));
                }
            }
            _ => {
                return Err(HamiltonianError::Unpaired {
                    lambda: b.lambda,
                    partner,
                    multiplicity: b.multiplicity,
                })
            }
        }
    }
    for a in &rs.blocks {
        for b in &rs.blocks {
            if a.lambda + b.lambda == d - 1 {
                continue;
            }
            for v in &a.basis {
                for w in &b.basis {
                    let value = symplectic_product(v, w);
                    if !value.is_zero() {
                        return Err(HamiltonianError::NonzeroPairing {
                            lambda: a.lambda,
                            mu: b.lambda,
                            value: value.to_string(),
                        });
                    }
                }
            }
        }
    }
    Ok(pairing)
}

/// Symplectic Gram-Schmidt inside one self-conjugate eigenspace.
fn split_middle(basis: &[Vec<Rational>], lambda: i64) -> Result<(Vec<Vec<Rational>>, Vec<Vec<Rational>>), HamiltonianError> {
    let mut rest: Vec<Vec<Rational>> = basis.to_vec();
    let mut es = Vec::new();
    let mut fs = Vec::new();
    while !rest.is_empty() {
        let e = rest.remove(0);
        let Some(pos) = rest.iter().position(|x| !symplectic_product(&e, x).is_zero()) else {
            return Err(HamiltonianError::DegenerateGram { lambda, mu: lambda });
        };
        let f_raw = rest.remove(pos);
        let w = symplectic_product(&e, &f_raw);
        let f: Vec<Rational> = f_raw.iter().map(|x| x / &w).collect();
        rest = rest
            .into_iter()
            .map(|x| {
                let a = symplectic_product(&x, &f);
                let b = symplectic_product(&x, &e);
                x.iter()
                    .zip(&e)
                    .zip(&f)
                    .map(|((xi, ei), fi)| xi - &a * ei + &b * fi)
                    .collect()
            })
            .collect();
        es.push(e);
        fs.push(f);
    }
    Ok((es, fs))
}

/// Keeps the eigenvectors of the lower resonances and recombines their
/// conjugates so that `S = [V | W]` is symplectic.
pub fn symplectic_normalize(
    rs: &ResonanceStructure,
    k: &[i64],
    l: &[i64],
    d: i64,
) -> Result<SymplecticData, HamiltonianError> {
    let pairing = symplectic_pairing(rs, d)?;
    let n = k.len();
    let mut v_cols: Vec<Vec<Rational>> = Vec::new();
    let mut w_cols: Vec<Vec<Rational>> = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &(lambda, mu) in &pairing {
        let b = rs.block(lambda).expect("paired");
        if lambda == mu {
            let (es, fs) = split_middle(&b.basis, lambda)?;
            lower.extend(std::iter::repeat_n(lambda, es.len()));
            upper.extend(std::iter::repeat_n(mu, fs.len()));
            v_cols.extend(es);
            w_cols.extend(fs);
        } else {
            let c = rs.block(mu).expect("paired");
            lower.extend(std::iter::repeat_n(lambda, b.basis.len()));
            upper.extend(std::iter::repeat_n(mu, c.basis.len()));
            v_cols.extend(b.basis.iter().cloned());
            w_cols.extend(c.basis.iter().cloned());
        }
    }
    if v_cols.len() != n || w_cols.len() != n {
        return Err(HamiltonianError::Internal("resonance basis is not of size 2n".into()));
    }
    let v = RatMatrix::from_columns(2 * n, &v_cols);
    let w0 = RatMatrix::from_columns(2 * n, &w_cols);
    let j = standard_j(n);
    let gram = v
        .transpose()
        .mul(&j)
        .and_then(|m| m.mul(&w0))
        .map_err(|e| HamiltonianError::Internal(e.to_string()))?;
    let Some(ginv) = gram.inverse().expect("square") else {
        let (lambda, mu) = pairing
            .iter()
            .copied()
            .find(|&(lambda, mu)| {
                let rows: Vec<usize> = (0..n).filter(|&i| lower[i] == lambda).collect();
                let cols: Vec<usize> = (0..n).filter(|&i| upper[i] == mu).collect();
                gram.submatrix(&rows, &cols).determinant().is_ok_and(|x| x.is_zero())
            })
            .unwrap_or(pairing[0]);
        return Err(HamiltonianError::DegenerateGram { lambda, mu });
    };
    let w = w0.mul(&ginv).expect("shapes");
    let cols: Vec<Vec<Rational>> = (0..n)
        .map(|i| v.column(i))
        .chain((0..n).map(|i| w.column(i)))
        .collect();
    let s = RatMatrix::from_columns(2 * n, &cols);
    if !is_symplectic(&s) {
        return Err(HamiltonianError::Internal("normalized basis is not symplectic".into()));
    }
    Ok(SymplecticData {
        d,
        k: k.to_vec(),
        l: l.to_vec(),
        pairing,
        s,
        column_resonances: lower.into_iter().chain(upper).collect(),
    })
}

/// The linear map of the exchange `(q_i, p_i) -> (p_i, -q_i)` for `i` in `set`.
pub fn exchange_matrix(n: usize, set: &[usize]) -> RatMatrix {
    let mut e = RatMatrix::identity(2 * n);
    for &i in set {
        e[(i, i)] = Rational::zero();
        e[(n + i, n + i)] = Rational::zero();
        e[(i, n + i)] = Rational::one();
        e[(n + i, i)] = -Rational::one();
    }
    e
}

/// Paired exchanges and the order of the `q` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ExchangePlan {
    /// Pairs where `q_i` and `p_i` trade places.
    pub exchange_set: Vec<usize>,
    /// Order of the `q` rows; every leading minor of the reordered `A` is nonzero.
    pub q_order: Vec<usize>,
    /// `S` after the exchanges (rows in the original pair order).
    pub s: RatMatrix,
}

impl ExchangePlan {
    /// The variable order `q_{o1}, ..., q_{on}, p_{on}, ..., p_{o1}` as indices of `(q, p)`.
    pub fn variable_order(&self) -> Vec<usize> {
        let n = self.q_order.len();
        self.q_order
            .iter()
            .copied()
            .chain(self.q_order.iter().rev().map(|&i| n + i))
            .collect()
    }
}

fn leading_minor_nonzero(a: &RatMatrix, rows: &[usize]) -> bool {
    let cols: Vec<usize> = (0..rows.len()).collect();
    !a.submatrix(rows, &cols).determinant().expect("square").is_zero()
}

/// Every exchange set (fewest exchanges first) whose `q` block `A` of `S` is
/// invertible, together with an order of the `q` rows giving `A` an LU
/// decomposition. For each set there is one plan per admissible first row.
pub fn canonical_exchanges(s: &RatMatrix) -> Vec<ExchangePlan> {
    let n = s.rows() / 2;
    let mut masks: Vec<usize> = (0..1usize << n).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut out = Vec::new();
    for mask in masks {
        let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let se = exchange_matrix(n, &set).mul(s).expect("shapes");
        let rows: Vec<usize> = (0..n).collect();
        let cols: Vec<usize> = (0..n).collect();
        let a = se.submatrix(&rows, &cols);
        if a.determinant().expect("square").is_zero() {
            continue;
        }
        for first in 0..n {
            if a[(first, 0)].is_zero() {
                continue;
            }
            let mut order = vec![first];
            while order.len() < n {
                let next = (0..n)
                    .filter(|r| !order.contains(r))
                    .find(|&r| {
                        let mut trial = order.clone();
                        trial.push(r);
                        leading_minor_nonzero(&a, &trial)
                    })
                    .expect("an invertible block has a pivot in every column");
                order.push(next);
            }
            out.push(ExchangePlan {
                exchange_set: set.clone(),
                q_order: order,
                s: se.clone(),
            });
        }
    }
    out
}

/// The Hamiltonian after exchanging `(q_i, p_i) -> (p_i, -q_i)`: the `q` slot
/// takes the old `p_i` and the `p` slot holds `-q_i` under the old name.
pub fn exchange_system(hs: &HamiltonianSystem, set: &[usize]) -> HamiltonianSystem {
    let mut q = hs.q.clone();
    let mut p = hs.p.clone();
    let mut bind = HashMap::new();
    for &i in set {
        std::mem::swap(&mut q[i], &mut p[i]);
        bind.insert(hs.q[i].clone(), -MultiPoly::symbol(hs.q[i].clone()));
    }
    HamiltonianSystem {
        q,
        p,
        h: hs.h.substitute(&bind),
        params: hs.params.clone(),
    }
}

/// The exchanged system's equations are the old equations pushed through the exchange.
pub fn exchange_is_consistent(hs: &HamiltonianSystem, set: &[usize]) -> bool {
    let n = hs.dof();
    let old = hs.to_system();
    let new = exchange_system(hs, set).to_system();
    let bind: HashMap<Symbol, MultiPoly> = set
        .iter()
        .map(|&i| (hs.q[i].clone(), -MultiPoly::symbol(hs.q[i].clone())))
        .collect();
    let pushed: Vec<MultiPoly> = (0..2 * n)
        .map(|r| {
            let (i, is_p) = (r % n, r >= n);
            let f = if set.contains(&i) {
                if is_p {
                    -old.rhs[i].clone()
                } else {
                    old.rhs[n + i].clone()
                }
            } else {
                old.rhs[r].clone()
            };
            f.substitute(&bind)
        })
        .collect();
    pushed == new.rhs
}

/// The balance of the exchanged system, with the exchanged symplectic basis as
/// its resonance basis.
fn exchanged_balance(
    hs: &HamiltonianSystem,
    balance: &Balance,
    sd: &SymplecticData,
    plan: &ExchangePlan,
) -> Result<Balance, HamiltonianError> {
    let n = hs.dof();
    let xs = exchange_system(hs, &plan.exchange_set);
    let sys = xs.to_system();
    let e = exchange_matrix(n, &plan.exchange_set);
    let mut k = balance.exponents().to_vec();
    let mut c = balance.dominant.leading.clone();
    for &i in &plan.exchange_set {
        k.swap(i, n + i);
        c.swap(i, n + i);
        c[n + i] = -c[n + i].clone();
    }
    let internal = |m: String| HamiltonianError::Internal(m);
    let dd = verify_dominant_balance(&sys, &k, &c)
        .map_err(|r| internal(format!("exchanged dominant balance fails in equation {}", r.index + 1)))?;
    let kk = kowalevskian(&sys, &dd).map_err(|_| internal("exchanged Kowalevskian is not constant".into()))?;
    let mut rs = resonance_structure(&kk).map_err(|f| internal(f.to_string()))?;
    for lambda in rs.resonances() {
        let basis: Vec<Vec<Rational>> = sd
            .column_resonances
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == lambda)
            .map(|(col, _)| e.mul_vec(&sd.s.column(col)))
            .collect();
        rs = rs
            .with_basis(lambda, basis)
            .map_err(|err| internal(format!("exchanged basis rejected: {err:?}")))?;
    }
    let names: Vec<String> = balance.params.iter().map(|p| p.name.name().to_string()).collect();
    expand_balance(&sys, &dd, &rs, balance.order, &names)
        .map_err(|err| internal(format!("exchanged balance: {err}")))
}

/// A canonical triangular change of variable with everything it was built from.
#[derive(Clone, Debug)]
pub struct CanonicalChange {
    pub exchange: ExchangePlan,
    /// The Hamiltonian system after the exchanges; `cov` maps into its variables.
    pub system: HamiltonianSystem,
    pub balance: Balance,
    pub normalization: Normalization,
    pub cov: ChangeOfVariable,
}

pub fn canonical_names(n: usize) -> (Vec<String>, Vec<String>) {
    (
        (1..=n).map(|i| format!("Q{i}")).collect(),
        (1..=n).map(|i| format!("P{i}")).collect(),
    )
}

/// Runs the regularizer with the order `q_{o1}..q_{on}, p_{on}..p_{o1}` and the
/// factor `-1/k1` on the last variable, trying the exchange plans in turn.
pub fn build_canonical_change(
    hs: &HamiltonianSystem,
    balance: &Balance,
    sd: &SymplecticData,
) -> Result<CanonicalChange, HamiltonianError> {
    let n = hs.dof();
    if n == 0 {
        return Err(HamiltonianError::EmptySystem);
    }
    let (qn, pn) = canonical_names(n);
    for plan in canonical_exchanges(&sd.s) {
        let order = plan.variable_order();
        let system = exchange_system(hs, &plan.exchange_set);
        let xb = exchanged_balance(hs, balance, sd, &plan)?;
        let k1 = xb.exponents()[order[0]];
        if k1 == 0 {
            continue;
        }
        let mut scales = vec![Rational::one(); 2 * n];
        scales[2 * n - 1] = Rational::new((-1).into(), k1.into());
        let names: Vec<String> = order
            .iter()
            .map(|&v| if v < n { qn[v].clone() } else { pn[v - n].clone() })
            .collect();
        let change_plan = ChangePlan {
            order: Some(order),
            scales: Some(scales),
            names: Some(names),
        };
        match regularize(&xb, &change_plan) {
            Ok((normalization, cov)) => {
                return Ok(CanonicalChange {
                    exchange: plan,
                    system,
                    balance: xb,
                    normalization,
                    cov,
                })
            }
            Err(RegularizeError::NoRationalRootPivot) | Err(RegularizeError::NoPivotBlock { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(HamiltonianError::NoExchange)
}

/// A coefficient of `sum dq_i ^ dp_i - sum dQ_i ^ dP_i` that does not vanish.
#[derive(Clone, Debug, PartialEq)]
pub struct FormWitness {
    pub first: Symbol,
    pub second: Symbol,
    pub difference: TruncatedSeries,
}

fn partials(cov: &ChangeOfVariable, i: usize) -> Vec<TruncatedSeries> {
    (0..cov.dim())
        .map(|a| {
            if a == 0 {
                cov.maps[i].derivative()
            } else {
                cov.maps[i].map_coeffs(|c| c.partial_derivative(&cov.new_vars[a]))
            }
        })
        .collect()
}

/// Expands the pulled-back 2-form exactly and compares it with `sum dQ_i ^ dP_i`.
///
/// The original variables are `(q_1..q_n, p_1..p_n)` by index; a new variable
/// inherits the slot of the variable it replaced.
pub fn verify_canonical(cov: &ChangeOfVariable) -> Result<(), FormWitness> {
    let m = cov.dim();
    let n = m / 2;
    let d: Vec<Vec<TruncatedSeries>> = (0..m).map(|i| partials(cov, i)).collect();
    let tau = cov.tau.clone();
    for a in 0..m {
        for b in a + 1..m {
            let mut w = TruncatedSeries::zero(tau.clone(), None);
            for i in 0..n {
                w = &w + &(&(&d[i][a] * &d[n + i][b]) - &(&d[i][b] * &d[n + i][a]));
            }
            let (sa, sb) = (cov.pivot_order[a], cov.pivot_order[b]);
            let expected = if sb == sa + n {
                1
            } else if sa == sb + n {
                -1
            } else {
                0
            };
            let diff = &w - &TruncatedSeries::constant(tau.clone(), MultiPoly::int(expected));
            if !diff.is_zero() {
                return Err(FormWitness {
                    first: cov.new_vars[a].clone(),
                    second: cov.new_vars[b].clone(),
                    difference: diff,
                });
            }
        }
    }
    Ok(())
}

/// `H` pulled back by the change of variable, split at `tau^0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NewHamiltonian {
    /// The regular part as a polynomial in `t` and the new variables.
    pub hamiltonian: MultiPoly,
    /// Dropped `(order, coefficient)` terms with negative order.
    pub dropped: Vec<(i64, MultiPoly)>,
}

/// Substitutes the change of variable into `H`; an autonomous system must
/// lose nothing.
pub fn new_hamiltonian(hs: &HamiltonianSystem, cov: &ChangeOfVariable) -> Result<NewHamiltonian, HamiltonianError> {
    let bind: HashMap<Symbol, TruncatedSeries> =
        cov.original.iter().cloned().zip(cov.maps.iter().cloned()).collect();
    let h = substitute_poly(&hs.h, &bind, &cov.tau).map_err(|e| HamiltonianError::Internal(e.to_string()))?;
    let dropped: Vec<(i64, MultiPoly)> = h.terms().filter(|(e, _)| *e < 0).map(|(e, c)| (e, c.clone())).collect();
    if hs.is_autonomous() {
        if let Some((order, coefficient)) = dropped.first().cloned() {
            return Err(HamiltonianError::SingularHamiltonian { order, coefficient });
        }
    }
    let regular = h.tail_from(0).to_poly().expect("exact");
    Ok(NewHamiltonian {
        hamiltonian: regular,
        dropped,
    })
}

/// Compares Hamilton's equations of the new Hamiltonian with the transformed
/// right sides; returns the first position that differs.
pub fn hamilton_equations_match(h: &MultiPoly, cov: &ChangeOfVariable, ts: &TransformedSystem) -> Result<(), usize> {
    let n = cov.dim() / 2;
    let pos_of_slot: Vec<usize> = (0..2 * n).map(|s| cov.position_of(s)).collect();
    for (pos, g) in ts.rhs.iter().enumerate() {
        let slot = cov.pivot_order[pos];
        let expected = if slot < n {
            h.partial_derivative(&cov.new_vars[pos_of_slot[slot + n]])
        } else {
            -h.partial_derivative(&cov.new_vars[pos_of_slot[slot - n]])
        };
        if g.to_poly().as_ref() != Some(&expected) {
            return Err(pos);
        }
    }
    Ok(())
}

/// Everything produced for one Hamiltonian balance.
#[derive(Clone, Debug)]
pub struct HamiltonianAnalysis {
    pub symplectic: SymplecticData,
    pub change: CanonicalChange,
    pub canonical: Result<(), FormWitness>,
    pub transformed: TransformedSystem,
    pub regularity: Result<(), SingularWitness>,
    pub new_hamiltonian: NewHamiltonian,
    pub equations_match: Result<(), usize>,
}

/// Exponents of the induced system split into `(k, l)`.
pub fn split_exponents(balance: &Balance) -> (Vec<i64>, Vec<i64>) {
    let e = balance.exponents();
    let n = e.len() / 2;
    (e[..n].to_vec(), e[n..].to_vec())
}

/// Homogeneity, pairing, normalization, canonical change, and the checks on it.
pub fn analyse_hamiltonian(hs: &HamiltonianSystem, balance: &Balance) -> Result<HamiltonianAnalysis, HamiltonianError> {
    let (k, l) = split_exponents(balance);
    let d = check_almost_weighted_homogeneous(hs, &k, &l)?;
    let symplectic = symplectic_normalize(&balance.resonances, &k, &l, d)?;
    let change = build_canonical_change(hs, balance, &symplectic)?;
    let canonical = verify_canonical(&change.cov);
    let transformed = transform_system(&change.system.to_system(), &change.cov);
    let regularity = verify_regularity(&transformed);
    let new_hamiltonian = new_hamiltonian(&change.system, &change.cov)?;
    let equations_match = hamilton_equations_match(&new_hamiltonian.hamiltonian, &change.cov, &transformed);
    Ok(HamiltonianAnalysis {
        symplectic,
        change,
        canonical,
        transformed,
        regularity,
        new_hamiltonian,
        equations_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rational::{rat, ratio};
    use crate::model::parse_hamiltonian;
    use crate::painleve::{run_test, TestOptions};

    const GD: &str = "vars: q1, q2 ; p1, p2\nH = -q1*p2^2 - 2*p1*p2 + 3*q1^2*q2 - q1^4 - q2^2";

    fn gd() -> (HamiltonianSystem, Balance) {
        let hs = parse_hamiltonian(GD).unwrap();
        let r = run_test(&hs.to_system(), &TestOptions::default());
        let b = r.principal_candidates()[0].balance.clone().unwrap();
        (hs, b)
    }

    #[test]
    fn weighted_degree_checks() {
        let (hs, _) = gd();
        assert_eq!(check_almost_weighted_homogeneous(&hs, &[2, 4], &[5, 3]), Ok(8));
        let cubic = parse_hamiltonian("vars: q ; p\nH = p^2/2 + q^3").unwrap();
        assert_eq!(check_almost_weighted_homogeneous(&cubic, &[2], &[3]), Ok(6));
        let qp = parse_hamiltonian("vars: q ; p\nH = q*p").unwrap();
        assert_eq!(
            check_almost_weighted_homogeneous(&qp, &[0], &[0]),
            Err(HamiltonianError::NoPositiveExponent)
        );
        assert!(matches!(
            check_almost_weighted_homogeneous(&hs, &[2, 4], &[5, 4]),
            Err(HamiltonianError::NotAlmostHomogeneous { index: 0, sum: 7, d: 10 })
        ));
    }

    #[test]
    fn gelfand_dikii_pairing_and_normalization() {
        let (_, b) = gd();
        let (k, l) = split_exponents(&b);
        let pairing = symplectic_pairing(&b.resonances, 8).unwrap();
        assert_eq!(pairing, vec![(-1, 8), (2, 5)]);
        let sd = symplectic_normalize(&b.resonances, &k, &l, 8).unwrap();
        assert!(sd.is_symplectic());
        assert_eq!(sd.column_resonances, vec![-1, 2, 8, 5]);
        let r = sd.resonance_matrix();
        for (col, lambda) in [-1, 2, 5, 8].into_iter().enumerate() {
            let v = r.column(col);
            assert_eq!(b.resonances.k.mul_vec(&v), v.iter().map(|x| x * rat(lambda)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn unpaired_spectrum_is_rejected() {
        let k = RatMatrix::from_i64(&[&[-1, 0], &[0, 3]]);
        let rs = resonance_structure(&k).unwrap();
        assert!(matches!(
            symplectic_pairing(&rs, 8),
            Err(HamiltonianError::Unpaired { lambda: -1, partner: 8, .. })
        ));
    }

    #[test]
    fn one_degree_of_freedom_scale() {
        // 2x2: symplectic means determinant one
        let hs = parse_hamiltonian("vars: q ; p\nH = p^2/2 - 2*q^3").unwrap();
        let r = run_test(&hs.to_system(), &TestOptions::default());
        let b = r.principal_candidates()[0].balance.clone().unwrap();
        let sd = symplectic_normalize(&b.resonances, &[2], &[3], 6).unwrap();
        assert_eq!(sd.s.determinant().unwrap(), rat(1));
        let a = analyse_hamiltonian(&hs, &b).unwrap();
        a.canonical.unwrap();
        a.regularity.unwrap();
        a.equations_match.unwrap();
        assert_eq!(a.change.cov.scales[1], ratio(-1, 2));
    }

    #[test]
    fn middle_block_split() {
        let basis = vec![
            vec![rat(1), rat(0), rat(0), rat(0)],
            vec![rat(0), rat(1), rat(0), rat(0)],
            vec![rat(1), rat(0), rat(2), rat(0)],
            vec![rat(0), rat(0), rat(1), rat(3)],
        ];
        let (es, fs) = split_middle(&basis, 3).unwrap();
        assert_eq!(es.len(), 2);
        for (i, e) in es.iter().enumerate() {
            for (j, f) in fs.iter().enumerate() {
                let want = if i == j { rat(1) } else { rat(0) };
                assert_eq!(symplectic_product(e, f), want);
            }
            for e2 in &es {
                assert!(symplectic_product(e, e2).is_zero());
            }
        }
    }

    #[test]
    fn exchanges() {
        let s = RatMatrix::identity(4);
        let plans = canonical_exchanges(&s);
        assert!(plans[0].exchange_set.is_empty());
        assert_eq!(plans[0].variable_order(), vec![0, 1, 3, 2]);
        // first column lives in the p block only: pair 0 must be exchanged
        let j = standard_j(2);
        let forced = exchange_matrix(2, &[0]).transpose().mul(&s).unwrap();
        assert!(is_symplectic(&forced));
        let plans = canonical_exchanges(&forced);
        assert_eq!(plans[0].exchange_set, vec![0]);
        assert!(is_symplectic(&plans[0].s));
        assert!(j.rows() == 4);
        let (hs, _) = gd();
        assert!(exchange_is_consistent(&hs, &[0]));
        assert!(exchange_is_consistent(&hs, &[0, 1]));
    }

    #[test]
    fn gelfand_dikii_canonical_change() {
        let (hs, b) = gd();
        let a = analyse_hamiltonian(&hs, &b).unwrap();
        assert!(a.change.exchange.exchange_set.is_empty());
        assert_eq!(a.change.cov.pivot_order, vec![0, 1, 3, 2]);
        assert_eq!(a.change.cov.exponents, vec![-2, -2, 2, 3]);
        a.canonical.clone().unwrap();
        a.regularity.clone().unwrap();
        assert!(a.new_hamiltonian.dropped.is_empty());
        a.equations_match.unwrap();
        // the same order with unit scales is not canonical
        let (_, plain) = regularize(
            &a.change.balance,
            &ChangePlan {
                order: Some(vec![0, 1, 3, 2]),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(verify_canonical(&plain).is_err());
    }

    #[test]
    fn first_painleve_hamiltonian() {
        let hs = parse_hamiltonian("vars: q ; p\nH = p^2/2 - 2*q^3 - t*q").unwrap();
        let r = run_test(&hs.to_system(), &TestOptions::default());
        let b = r.principal_candidates()[0].balance.clone().unwrap();
        let a = analyse_hamiltonian(&hs, &b).unwrap();
        a.canonical.clone().unwrap();
        a.regularity.clone().unwrap();
        a.equations_match.unwrap();
    }
}
