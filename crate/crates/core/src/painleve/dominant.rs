use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Zero};

use crate::algebra::rational::{rat, rational_roots, Rational};
use crate::algebra::{MultiPoly, Symbol};
use crate::model::{time, time0, OdeSystem};

/// Exponents `k` and leading coefficients `c` of a dominant balance.
#[derive(Clone, Debug, PartialEq)]
pub struct DominantData {
    pub exponents: Vec<i64>,
    pub leading: Vec<MultiPoly>,
    pub fuchsian: bool,
    /// `f_i^D`: the terms of `f_i` of weighted degree `k_i + 1`.
    pub dominant: Vec<MultiPoly>,
}

impl DominantData {
    /// The leading coefficients when all of them are rational numbers.
    pub fn rational_leading(&self) -> Option<Vec<Rational>> {
        self.leading.iter().map(MultiPoly::as_constant).collect()
    }

    /// Symbols (other than `t0`) the leading coefficients depend on.
    pub fn leading_parameters(&self) -> BTreeSet<Symbol> {
        let t0 = time0();
        self.leading
            .iter()
            .flat_map(|c| c.symbols())
            .filter(|s| *s != t0)
            .collect()
    }
}

fn weight_map(vars: &[Symbol], k: &[i64]) -> HashMap<Symbol, i64> {
    vars.iter().cloned().zip(k.iter().copied()).collect()
}

/// Weighted degree of `f` with `u_i` weighing `k_i` and every other symbol 0.
/// `None` stands for the degree of the zero polynomial.
pub fn weighted_degree(f: &MultiPoly, vars: &[Symbol], k: &[i64]) -> Option<i64> {
    let w = weight_map(vars, k);
    f.weighted_degree(|s| w.get(s).copied().unwrap_or(0))
}

/// The terms of `f` of weighted degree exactly `degree`.
pub fn dominant_part(f: &MultiPoly, vars: &[Symbol], k: &[i64], degree: i64) -> MultiPoly {
    let w = weight_map(vars, k);
    f.weighted_slice(|s| w.get(s).copied().unwrap_or(0), degree)
}

/// The terms of `f` of highest weighted degree.
pub fn natural_dominant_part(f: &MultiPoly, vars: &[Symbol], k: &[i64]) -> MultiPoly {
    match weighted_degree(f, vars, k) {
        Some(d) => dominant_part(f, vars, k, d),
        None => MultiPoly::zero(),
    }
}

pub fn is_fuchsian(sys: &OdeSystem, k: &[i64]) -> bool {
    sys.rhs
        .iter()
        .zip(k)
        .all(|(f, &ki)| weighted_degree(f, &sys.vars, k).is_none_or(|d| d <= ki + 1))
}

/// The `f_i^D` for exponents `k`.
pub fn dominant_parts(sys: &OdeSystem, k: &[i64]) -> Vec<MultiPoly> {
    sys.rhs
        .iter()
        .zip(k)
        .map(|(f, &ki)| dominant_part(f, &sys.vars, k, ki + 1))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentCandidate {
    pub exponents: Vec<i64>,
    /// A balance with every `c_i` nonzero is not excluded by the slice shapes.
    pub natural: bool,
}

/// All Fuchsian exponent vectors with entries in `0..=bound`, at least one positive,
/// in lexicographic order.
pub fn enumerate_fuchsian_exponents(sys: &OdeSystem, bound: i64) -> Vec<ExponentCandidate> {
    let n = sys.dim();
    let mut out = Vec::new();
    let mut k = vec![0i64; n];
    loop {
        if k.iter().any(|&x| x > 0) && is_fuchsian(sys, &k) {
            let natural = dominant_parts(sys, &k)
                .iter()
                .zip(&k)
                .all(|(d, &ki)| ki == 0 || !d.is_zero());
            out.push(ExponentCandidate {
                exponents: k.clone(),
                natural,
            });
        }
        // odometer, last index fastest
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if k[i] < bound {
                k[i] += 1;
                for x in k.iter_mut().skip(i + 1) {
                    *x = 0;
                }
                break;
            }
        }
    }
}

/// The dominant-balance identity failed for equation `index`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejected {
    pub index: usize,
    pub residual: MultiPoly,
}

/// Checks `f_i^D(t0, c) = -k_i c_i` for every `i`.
pub fn verify_dominant_balance(
    sys: &OdeSystem,
    k: &[i64],
    c: &[MultiPoly],
) -> Result<DominantData, Rejected> {
    assert_eq!(k.len(), sys.dim());
    assert_eq!(c.len(), sys.dim());
    let dominant = dominant_parts(sys, k);
    let mut bind: HashMap<Symbol, MultiPoly> = sys.vars.iter().cloned().zip(c.iter().cloned()).collect();
    bind.insert(time(), MultiPoly::symbol(time0()));
    for (i, d) in dominant.iter().enumerate() {
        let residual = d.substitute(&bind) + c[i].scale(&rat(k[i]));
        if !residual.is_zero() {
            return Err(Rejected { index: i, residual });
        }
    }
    Ok(DominantData {
        exponents: k.to_vec(),
        leading: c.to_vec(),
        fuchsian: is_fuchsian(sys, k),
        dominant,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DominantSolutions {
    /// Every rational solution with `k_i c_i` not all zero.
    Solved(Vec<Vec<Rational>>),
    /// Elimination could not finish on some branch.
    Unsolved { reason: String },
}

fn unknown(i: usize) -> Symbol {
    // not a valid identifier, so it cannot clash with user symbols
    Symbol::new(&format!("%c{}", i + 1))
}

/// Solves `f_i^D(c) = -k_i c_i` over the rationals by successive elimination.
///
/// At each step an equation in a single unknown is solved by rational-root
/// search and every root is followed; failing that, an equation linear in
/// some unknown with a rational coefficient is used to eliminate it. Solutions
/// with `k_i c_i = 0` for all `i` are discarded.
pub fn solve_dominant(sys: &OdeSystem, k: &[i64]) -> DominantSolutions {
    let n = sys.dim();
    let dominant = dominant_parts(sys, k);
    let mut bind: HashMap<Symbol, MultiPoly> = HashMap::new();
    for i in 0..n {
        bind.insert(sys.vars[i].clone(), MultiPoly::symbol(unknown(i)));
    }
    bind.insert(time(), MultiPoly::symbol(time0()));
    let eqs: Vec<MultiPoly> = dominant
        .iter()
        .enumerate()
        .map(|(i, d)| d.substitute(&bind) + MultiPoly::symbol(unknown(i)).scale(&rat(k[i])))
        .collect();
    let mut found: Vec<Vec<Rational>> = Vec::new();
    let mut stalled: Option<String> = None;
    search(n, k, eqs, HashMap::new(), &mut found, &mut stalled);
    if let Some(reason) = stalled {
        return DominantSolutions::Unsolved { reason };
    }
    found.sort();
    found.dedup();
    DominantSolutions::Solved(found)
}

/// Natural-exponent entry point: solutions with every `c_i` nonzero.
pub fn solve_natural_dominant(sys: &OdeSystem, k: &[i64]) -> DominantSolutions {
    match solve_dominant(sys, k) {
        DominantSolutions::Solved(v) => DominantSolutions::Solved(
            v.into_iter()
                .filter(|c| c.iter().all(|x| !x.is_zero()))
                .collect(),
        ),
        other => other,
    }
}

fn search(
    n: usize,
    k: &[i64],
    eqs: Vec<MultiPoly>,
    solved: HashMap<Symbol, MultiPoly>,
    found: &mut Vec<Vec<Rational>>,
    stalled: &mut Option<String>,
) {
    let eqs: Vec<MultiPoly> = eqs
        .into_iter()
        .map(|e| e.substitute(&solved))
        .filter(|e| !e.is_zero())
        .collect();
    if eqs.iter().any(|e| e.as_constant().is_some()) {
        return;
    }
    if eqs.is_empty() {
        let values: Vec<MultiPoly> = (0..n)
            .map(|i| {
                solved
                    .get(&unknown(i))
                    .cloned()
                    .unwrap_or_else(|| MultiPoly::symbol(unknown(i)))
            })
            .collect();
        if values
            .iter()
            .zip(k)
            .all(|(v, &ki)| ki == 0 || v.is_zero())
        {
            return;
        }
        match values.iter().map(MultiPoly::as_constant).collect::<Option<Vec<_>>>() {
            Some(c) => found.push(c),
            None => {
                if stalled.is_none() {
                    *stalled = Some("leading coefficients are not all determined".into());
                }
            }
        }
        return;
    }
    let t0 = time0();
    // an equation in one unknown
    for e in &eqs {
        let syms = e.symbols();
        if syms.len() == 1 && !syms.contains(&t0) {
            let s = syms.into_iter().next().unwrap();
            let by_power = e.collect_in(&s);
            let deg = *by_power.keys().next_back().unwrap() as usize;
            let mut coeffs = vec![Rational::zero(); deg + 1];
            for (p, c) in by_power {
                coeffs[p as usize] = c.constant_term();
            }
            for root in rational_roots(&coeffs) {
                let mut next = solved.clone();
                let value = MultiPoly::constant(root);
                bind_value(&mut next, &s, value);
                search(n, k, eqs.clone(), next, found, stalled);
            }
            return;
        }
    }
    // an equation linear in some unknown with a rational coefficient
    for e in &eqs {
        for s in e.symbols() {
            if s == t0 || e.degree_in(&s) != 1 {
                continue;
            }
            let parts = e.collect_in(&s);
            let Some(a) = parts.get(&1).and_then(MultiPoly::as_constant) else {
                continue;
            };
            let rest = parts.get(&0).cloned().unwrap_or_default();
            let value = rest.scale(&(-Rational::one() / a));
            let mut next = solved.clone();
            bind_value(&mut next, &s, value);
            search(n, k, eqs.clone(), next, found, stalled);
            return;
        }
    }
    if stalled.is_none() {
        let shown: Vec<String> = eqs.iter().map(|e| format!("{e} = 0")).collect();
        *stalled = Some(format!("cannot eliminate: {}", shown.join(", ")));
    }
}

fn bind_value(solved: &mut HashMap<Symbol, MultiPoly>, s: &Symbol, value: MultiPoly) {
    let single: HashMap<Symbol, MultiPoly> = [(s.clone(), value.clone())].into_iter().collect();
    for v in solved.values_mut() {
        *v = v.substitute(&single);
    }
    solved.insert(s.clone(), value);
}
