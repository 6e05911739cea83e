use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;

use super::dominant::DominantData;
use super::resonance::ResonanceStructure;
use crate::algebra::rational::{rat, Rational};
use crate::algebra::{solve_affine, AffineSolution, MultiPoly, Symbol};
use crate::model::{time, time0, OdeSystem};
use crate::series::{substitute_poly, TruncatedSeries};

/// Name used for the expansion variable `t - t0`.
pub const SERIES_VAR: &str = "(t-t0)";

pub fn series_var() -> Symbol {
    Symbol::new(SERIES_VAR)
}

/// A resonance parameter: it enters the balance at order `lambda` along `vector`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: Symbol,
    pub lambda: i64,
    pub vector: Vec<Rational>,
}

/// Formal Laurent solution `u_i = sum_j a_{i,j} (t-t0)^(j-k_i)`, known for `j < order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Balance {
    pub vars: Vec<Symbol>,
    pub dominant: DominantData,
    pub resonances: ResonanceStructure,
    pub order: usize,
    /// `coeffs[i][j] = a_{i,j}`.
    pub coeffs: Vec<Vec<MultiPoly>>,
    pub params: Vec<Parameter>,
}

impl Balance {
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn exponents(&self) -> &[i64] {
        &self.dominant.exponents
    }

    pub fn coefficient(&self, i: usize, j: usize) -> &MultiPoly {
        &self.coeffs[i][j]
    }

    /// The coefficient of `(t-t0)^e` in `u_i`.
    pub fn coefficient_at_power(&self, i: usize, e: i64) -> MultiPoly {
        let j = e + self.dominant.exponents[i];
        if j < 0 || j as usize >= self.order {
            MultiPoly::zero()
        } else {
            self.coeffs[i][j as usize].clone()
        }
    }

    /// `u_i` as a series in `t - t0`, truncated at order `order - k_i`.
    pub fn series(&self, i: usize) -> TruncatedSeries {
        let k = self.dominant.exponents[i];
        TruncatedSeries::new(
            series_var(),
            -k,
            self.coeffs[i].clone(),
            Some(self.order as i64 - k),
        )
    }

    pub fn all_series(&self) -> Vec<TruncatedSeries> {
        (0..self.dim()).map(|i| self.series(i)).collect()
    }

    pub fn param_symbols(&self) -> Vec<Symbol> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn is_autonomous_data(&self) -> bool {
        let t0 = time0();
        !self.coeffs.iter().flatten().any(|c| c.contains_symbol(&t0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExpansionFailure {
    /// The recursion has no solution at order `j`; `witness` must vanish but does not.
    FailureAtResonance { j: usize, witness: MultiPoly },
    BadParameterNames(String),
    OrderTooSmall { order: usize, largest: i64 },
}

impl fmt::Display for ExpansionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionFailure::FailureAtResonance { j, witness } => {
                write!(f, "recursion inconsistent at order {j}: {witness} must vanish")
            }
            ExpansionFailure::BadParameterNames(m) => write!(f, "{m}"),
            ExpansionFailure::OrderTooSmall { order, largest } => {
                write!(f, "order {order} does not exceed the largest resonance {largest}")
            }
        }
    }
}

/// Default parameter names `r2, r3, ...` (`t0` plays the role of `r1`).
pub fn default_parameter_names(count: usize) -> Vec<String> {
    (0..count).map(|i| format!("r{}", i + 2)).collect()
}

/// Runs the recursion `(K - jI) a_j = -F_j` for `j = 1 .. order-1`.
///
/// `F_j` is the coefficient of `(t-t0)^(j-k_i-1)` in `f_i` evaluated on the
/// series known so far (with `a_j = 0`). At a positive resonance the particular
/// solution (free coordinates zero) is shifted by the named parameters times the
/// eigenbasis of the resonance structure.
pub fn expand_balance(
    sys: &OdeSystem,
    dd: &DominantData,
    rs: &ResonanceStructure,
    order: usize,
    parameter_names: &[String],
) -> Result<Balance, ExpansionFailure> {
    let n = sys.dim();
    if order as i64 <= rs.largest() {
        return Err(ExpansionFailure::OrderTooSmall {
            order,
            largest: rs.largest(),
        });
    }
    let positive: Vec<(i64, Vec<Rational>)> = rs
        .blocks
        .iter()
        .filter(|b| b.lambda > 0)
        .flat_map(|b| b.basis.iter().map(move |v| (b.lambda, v.clone())))
        .collect();
    let names: Vec<String> = if parameter_names.is_empty() {
        default_parameter_names(positive.len())
    } else {
        parameter_names.to_vec()
    };
    if names.len() != positive.len() {
        return Err(ExpansionFailure::BadParameterNames(format!(
            "{} parameter names given for {} resonance directions",
            names.len(),
            positive.len()
        )));
    }
    for name in &names {
        let s = Symbol::new(name);
        if sys.vars.contains(&s) || s == time() || s == time0() {
            return Err(ExpansionFailure::BadParameterNames(format!(
                "parameter name `{name}` clashes with a system symbol"
            )));
        }
    }
    let params: Vec<Parameter> = positive
        .into_iter()
        .zip(&names)
        .map(|((lambda, vector), name)| Parameter {
            name: Symbol::new(name),
            lambda,
            vector,
        })
        .collect();

    let x = series_var();
    let k = &dd.exponents;
    let tb = TruncatedSeries::from_terms(
        x.clone(),
        [(0, MultiPoly::symbol(time0())), (1, MultiPoly::one())],
    );
    let mut coeffs: Vec<Vec<MultiPoly>> = dd.leading.iter().map(|c| vec![c.clone()]).collect();
    for j in 1..order {
        let mut bind: HashMap<Symbol, TruncatedSeries> = HashMap::new();
        for l in 0..n {
            let s = TruncatedSeries::new(x.clone(), -k[l], coeffs[l].clone(), Some(j as i64 - k[l] + 1));
            bind.insert(sys.vars[l].clone(), s);
        }
        bind.insert(time(), tb.clone());
        let rhs: Vec<MultiPoly> = (0..n)
            .map(|i| {
                let s = substitute_poly(&sys.rhs[i], &bind, &x)
                    .expect("series bindings share one variable and enough orders");
                -s.coeff(j as i64 - k[i] - 1)
            })
            .collect();
        let m = rs.k.shift_diagonal(&rat(j as i64));
        let mut aj = match solve_affine(&m, &rhs).expect("square system") {
            AffineSolution::Solved { particular, .. } => particular,
            AffineSolution::Inconsistent { witness } => {
                return Err(ExpansionFailure::FailureAtResonance { j, witness })
            }
        };
        for p in params.iter().filter(|p| p.lambda == j as i64) {
            let r = MultiPoly::symbol(p.name.clone());
            for (a, v) in aj.iter_mut().zip(&p.vector) {
                *a = &*a + &r.scale(v);
            }
        }
        for (col, a) in coeffs.iter_mut().zip(aj) {
            col.push(a);
        }
    }
    Ok(Balance {
        vars: sys.vars.clone(),
        dominant: dd.clone(),
        resonances: rs.clone(),
        order,
        coeffs,
        params,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalVerdict {
    pub principal: bool,
    pub n: usize,
    pub n_s: usize,
    pub det_r: Rational,
    pub reason: Option<String>,
}

/// Principal iff `n_s = n` and `det R != 0`. Resonance-0 directions must also be
/// carried by parameters in the leading coefficients.
pub fn check_principal(balance: &Balance) -> PrincipalVerdict {
    let rs = &balance.resonances;
    let n = balance.dim();
    let n_s = rs.n_s();
    let r = rs.matrix();
    let det_r = if r.is_square() {
        r.determinant().expect("square")
    } else {
        Rational::zero()
    };
    let zero_mult = rs.block(0).map_or(0, |b| b.multiplicity);
    let leading_params = balance.dominant.leading_parameters().len();
    let reason = if n_s != n {
        Some(format!("only {n_s} of {n} resonance directions"))
    } else if det_r.is_zero() {
        Some("resonance matrix is singular".to_string())
    } else if leading_params < zero_mult {
        Some(format!(
            "resonance 0 has multiplicity {zero_mult} but the leading coefficients carry {leading_params} parameters"
        ))
    } else {
        None
    };
    PrincipalVerdict {
        principal: reason.is_none(),
        n,
        n_s,
        det_r,
        reason,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualWitness {
    pub equation: usize,
    pub order: i64,
    pub coefficient: MultiPoly,
}

/// Substitutes the balance into `u_i' - f_i` and checks that every known
/// coefficient vanishes. Returns the smallest order up to which all equations
/// were verified (exclusive); this is at least `order - k_max - 1`.
pub fn residual_check(sys: &OdeSystem, balance: &Balance) -> Result<i64, ResidualWitness> {
    let x = series_var();
    let series = balance.all_series();
    let mut bind: HashMap<Symbol, TruncatedSeries> =
        sys.vars.iter().cloned().zip(series.iter().cloned()).collect();
    bind.insert(
        time(),
        TruncatedSeries::from_terms(x.clone(), [(0, MultiPoly::symbol(time0())), (1, MultiPoly::one())]),
    );
    let mut verified = i64::MAX;
    for (i, f) in sys.rhs.iter().enumerate() {
        let fs = substitute_poly(f, &bind, &x).expect("balance series share one variable");
        let res = &series[i].derivative() - &fs;
        if let Some((order, c)) = res.terms().next() {
            return Err(ResidualWitness {
                equation: i,
                order,
                coefficient: c.clone(),
            });
        }
        verified = verified.min(res.trunc().unwrap_or(i64::MAX));
    }
    Ok(verified)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rational::ratio;
    use crate::model::parse_system;
    use crate::painleve::dominant::verify_dominant_balance;
    use crate::painleve::resonance::{kowalevskian, resonance_structure};

    fn build(src: &str, k: &[i64], c: &[i64], order: usize) -> (OdeSystem, Result<Balance, ExpansionFailure>) {
        let sys = parse_system(src).unwrap();
        let c: Vec<MultiPoly> = c.iter().map(|&x| MultiPoly::int(x)).collect();
        let dd = verify_dominant_balance(&sys, k, &c).unwrap();
        let km = kowalevskian(&sys, &dd).unwrap();
        let rs = resonance_structure(&km).unwrap();
        let b = expand_balance(&sys, &dd, &rs, order, &[]);
        (sys, b)
    }

    #[test]
    fn riccati_is_exact() {
        let (sys, b) = build("vars: u\nu' = u^2", &[1], &[-1], 4);
        let b = b.unwrap();
        assert!(b.coeffs[0][1..].iter().all(MultiPoly::is_zero));
        assert!(check_principal(&b).principal);
        assert_eq!(residual_check(&sys, &b), Ok(2));
    }

    /// Independent oracle: with u1 = h^-2 * sum w_j h^j, u1'' = 6 u1^2 gives
    /// (j-6)(j+1) w_j = 6 * sum_{0<a<j} w_a w_{j-a}, w_0 = 1.
    fn weierstrass_oracle(order: usize, r: &MultiPoly) -> Vec<MultiPoly> {
        let mut w = vec![MultiPoly::one()];
        for j in 1..order {
            let conv: MultiPoly = (1..j).map(|a| &w[a] * &w[j - a]).sum();
            let rhs = conv.scale(&rat(6));
            let d = (j as i64 - 6) * (j as i64 + 1);
            w.push(if d == 0 {
                assert!(rhs.is_zero());
                r.clone()
            } else {
                rhs.scale(&ratio(1, d))
            });
        }
        w
    }

    #[test]
    fn weierstrass_against_oracle() {
        let (sys, b) = build("vars: u1,u2\nu1' = u2\nu2' = 6*u1^2", &[2, 3], &[1, -2], 9);
        let b = b.unwrap();
        // the eigenvector for 6 is (1/4, 1), so the oracle's free value is r2/4
        let r2 = MultiPoly::var("r2");
        let w = weierstrass_oracle(9, &r2.scale(&ratio(1, 4)));
        for j in 0..9 {
            assert_eq!(b.coeffs[0][j], w[j], "u1 at j={j}");
            // u2 = u1' so a_{2,j} = (j-2) w_j
            assert_eq!(b.coeffs[1][j], w[j].scale(&rat(j as i64 - 2)), "u2 at j={j}");
        }
        assert_eq!(b.params.len(), 1);
        assert_eq!(b.params[0].lambda, 6);
        assert!(check_principal(&b).principal);
        assert!(residual_check(&sys, &b).unwrap() >= 9 - 3 - 1);
    }

    #[test]
    fn corrupted_balance_is_caught() {
        let (sys, b) = build("vars: u1,u2\nu1' = u2\nu2' = 6*u1^2", &[2, 3], &[1, -2], 9);
        let mut b = b.unwrap();
        b.coeffs[1][4] = MultiPoly::int(7);
        let w = residual_check(&sys, &b).unwrap_err();
        assert_eq!(w.order, 1);
    }

    #[test]
    fn inconsistent_resonance() {
        // w'' = 6 w^2 + t^2: the t^2 term spoils compatibility at the resonance
        let (_, b) = build("vars: u1,u2\nu1' = u2\nu2' = 6*u1^2 + t^2", &[2, 3], &[1, -2], 9);
        match b {
            Err(ExpansionFailure::FailureAtResonance { j, witness }) => {
                assert_eq!(j, 6);
                assert!(!witness.is_zero());
            }
            other => panic!("expected a failure, got {other:?}"),
        }
    }

    #[test]
    fn not_principal_without_enough_parameters() {
        // u' = u^2, v' = 0: resonances -1 and 0 but no parameter in the leading terms
        let (_, b) = build("vars: u,v\nu' = u^2\nv' = 0", &[1, 0], &[-1, 0], 3);
        let b = b.unwrap();
        let v = check_principal(&b);
        assert!(!v.principal);
    }
}
