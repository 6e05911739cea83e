//! Triangular change of variable turning a principal balance into a regular solution.
//!
//! The pivot variable becomes `u_p = tau^(-k_p)`. Every other variable is
//! cut off at the order where its resonance parameter first enters,
//! `u_i = sum_{e < e_i} a~_{i,e} tau^e + s_i rho_i tau^(e_i)`, with
//! `e_i = lambda - k_i` and the `a~` polynomials in `t` and earlier `rho`.

use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::rational::rat;
use crate::algebra::{MultiPoly, RatMatrix, Rational, Symbol};
use crate::model::{time, time0, OdeSystem};
use crate::painleve::{check_principal, series_var, Balance};
use crate::series::{substitute_poly, SeriesError, TruncatedSeries};

pub const TAU: &str = "tau";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegularizeError {
    #[error("balance is not principal")]
    NotPrincipal,
    #[error("no variable with k_i c_i != 0 has a rational (-k_i)-th root of c_i")]
    NoRationalRootPivot,
    #[error("parameters at resonance 0 are not supported")]
    ZeroResonance,
    #[error("leading coefficients must be rational")]
    SymbolicLeading,
    #[error("no invertible pivot block at resonance {lambda}")]
    NoPivotBlock { lambda: i64, matrix: RatMatrix },
    #[error("coefficient of row {row} at resonance {lambda} does not have constant slope in the parameters")]
    NonConstantBlock { lambda: i64, row: usize },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// Optional overrides for the construction. Everything defaults to the
/// automatic choices (first admissible pivot, smallest-index pivot rows,
/// unit scales, names `tau, rho2, rho3, ...`).
#[derive(Clone, Debug, Default)]
pub struct ChangePlan {
    /// Complete variable order, pivot first, then rows in the order they are absorbed.
    pub order: Option<Vec<usize>>,
    /// Factor `s_i` in front of each new variable, by position (position 0 is ignored).
    pub scales: Option<Vec<Rational>>,
    /// New variable names by position.
    pub names: Option<Vec<String>>,
}

/// Result of the indicial normalization.
#[derive(Clone, Debug)]
pub struct Normalization {
    pub pivot: usize,
    pub k1: i64,
    /// `c_p^(-1/k_p)`, the derivative of `tau` at `t0`.
    pub beta: Rational,
    /// `tau` as a series in `t - t0`.
    pub tau_series: TruncatedSeries,
    /// `t - t0` as a series in `tau` (coefficients may contain `t0`).
    pub x_series: TruncatedSeries,
    /// `t0` as a series in `tau` with coefficients in `t`.
    pub t0_series: TruncatedSeries,
    /// Every `u_i` as a Laurent series in `tau`, coefficients in `t` and the parameters.
    pub expanded: Vec<TruncatedSeries>,
    /// `R^(1)`: the non-pivot rows against the parameter columns.
    pub reduced_matrix: RatMatrix,
}

/// One absorption step: the variables that take the parameters of resonance `lambda`.
#[derive(Clone, Debug)]
pub struct Stage {
    pub lambda: i64,
    pub rows: Vec<usize>,
    pub params: Vec<Symbol>,
    pub new_vars: Vec<Symbol>,
    /// `A^(l)`, the slopes of the cut-off coefficients in the parameters.
    pub block: RatMatrix,
    /// Updated resonance matrix before the step (unassigned rows, remaining parameters).
    pub remaining: RatMatrix,
}

#[derive(Clone, Debug)]
pub struct Absorption {
    pub stages: Vec<Stage>,
    pub order: Vec<usize>,
    pub names: Vec<Symbol>,
    pub scales: Vec<Rational>,
    pub exponents: Vec<i64>,
    /// `u_i` as exact Laurent polynomials in `tau`, by original index.
    pub maps: Vec<TruncatedSeries>,
}

#[derive(Clone, Debug)]
pub struct ChangeOfVariable {
    pub tau: Symbol,
    pub original: Vec<Symbol>,
    /// New variables by position; position 0 is `tau`.
    pub new_vars: Vec<Symbol>,
    /// `pivot_order[pos]` is the original index of the variable replaced at `pos`.
    pub pivot_order: Vec<usize>,
    pub k1: i64,
    pub root_beta: Rational,
    /// By position: `-k1` for the pivot, `e_i` for the others.
    pub exponents: Vec<i64>,
    pub scales: Vec<Rational>,
    /// By original index.
    pub maps: Vec<TruncatedSeries>,
    pub stages: Vec<Stage>,
}

impl ChangeOfVariable {
    pub fn dim(&self) -> usize {
        self.original.len()
    }

    pub fn position_of(&self, i: usize) -> usize {
        self.pivot_order.iter().position(|&j| j == i).expect("permutation")
    }

    /// The `a~` terms of variable `i` (everything below its new variable).
    pub fn lower_terms(&self, i: usize) -> TruncatedSeries {
        let pos = self.position_of(i);
        self.maps[i].part_below(self.exponents[pos])
    }

    /// True when each map uses only new variables of earlier positions and the
    /// coefficient of its own variable is the bare monomial `s tau^e`.
    pub fn is_triangular(&self) -> bool {
        for (pos, &i) in self.pivot_order.iter().enumerate() {
            let later: BTreeSet<&Symbol> = self.new_vars[pos..].iter().collect();
            let own = &self.new_vars[pos];
            if pos == 0 {
                let want = TruncatedSeries::monomial(self.tau.clone(), -self.k1, MultiPoly::one());
                if self.maps[i] != want {
                    return false;
                }
                continue;
            }
            let e = self.exponents[pos];
            for (x, c) in self.maps[i].terms() {
                if x < e {
                    if c.symbols().iter().any(|s| later.contains(s)) {
                        return false;
                    }
                } else if x > e
                    || *c != MultiPoly::symbol(own.clone()).scale(&self.scales[pos])
                {
                    return false;
                }
            }
        }
        true
    }

    /// The maps with `t` left free and every new variable a symbol, for display.
    pub fn map_strings(&self) -> Vec<String> {
        self.maps.iter().map(|m| m.to_string()).collect()
    }
}

/// `g = J^-1 (f o phi - d phi / dt)` as exact Laurent polynomials in `tau`.
#[derive(Clone, Debug)]
pub struct TransformedSystem {
    pub vars: Vec<Symbol>,
    /// By position.
    pub rhs: Vec<TruncatedSeries>,
    /// `N_i`: how many negative orders appear in each right side.
    pub singular_orders: Vec<i64>,
    pub params: Vec<String>,
}

impl TransformedSystem {
    /// The new system as polynomials, when it is regular.
    pub fn to_system(&self) -> Option<OdeSystem> {
        let rhs: Option<Vec<MultiPoly>> = self.rhs.iter().map(TruncatedSeries::to_poly).collect();
        Some(OdeSystem {
            vars: self.vars.clone(),
            rhs: rhs?,
            params: self.params.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularWitness {
    pub position: usize,
    pub order: i64,
    pub coefficient: MultiPoly,
}

/// Power series of the new variables along the balance, by position.
#[derive(Clone, Debug)]
pub struct TransformedBalance {
    pub vars: Vec<Symbol>,
    pub series: Vec<TruncatedSeries>,
}

impl TransformedBalance {
    /// Values at `t0`.
    pub fn initial_values(&self) -> Vec<MultiPoly> {
        self.series.iter().map(|s| s.coeff(0)).collect()
    }

    /// `tau'(t0)`.
    pub fn tau_derivative(&self) -> MultiPoly {
        self.series[0].coeff(1)
    }
}

fn param_symbols_from(balance: &Balance, lambda_at_least: i64) -> Vec<Symbol> {
    balance
        .params
        .iter()
        .filter(|p| p.lambda >= lambda_at_least)
        .map(|p| p.name.clone())
        .collect()
}

fn constant_slope(
    u: &TruncatedSeries,
    order: i64,
    p: &Symbol,
    lambda: i64,
    row: usize,
) -> Result<Rational, RegularizeError> {
    u.coeff(order)
        .partial_derivative(p)
        .as_constant()
        .ok_or(RegularizeError::NonConstantBlock { lambda, row })
}

/// Slopes of `coeff(u_i, lambda_b - k_i)` in `r_b`, rows against parameter columns.
fn slope_matrix(
    balance: &Balance,
    u: &[TruncatedSeries],
    rows: &[usize],
    lambda_at_least: i64,
) -> Result<RatMatrix, RegularizeError> {
    let k = balance.exponents();
    let cols: Vec<_> = balance.params.iter().filter(|p| p.lambda >= lambda_at_least).collect();
    let mut out = RatMatrix::zeros(rows.len(), cols.len());
    let mut entries = Vec::new();
    for &i in rows {
        let mut row = Vec::new();
        for p in &cols {
            row.push(constant_slope(&u[i], p.lambda - k[i], &p.name, p.lambda, i)?);
        }
        entries.push(row);
    }
    if !entries.is_empty() && !cols.is_empty() {
        out = RatMatrix::from_rows(entries);
    }
    Ok(out)
}

/// `t0 = t - x(tau; t0)` solved by fixed-point iteration; each round fixes one more order.
fn eliminate_t0(x_tau: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
    let var = x_tau.var().clone();
    let t = TruncatedSeries::constant(var, MultiPoly::symbol(time()));
    let rounds = x_tau.trunc().unwrap_or(1).max(1) + 2;
    let mut cur = t.clone();
    for _ in 0..rounds {
        let bind = HashMap::from([(time0(), cur.clone())]);
        let next = t.checked_sub(&x_tau.substitute_coeff_series(&bind)?)?;
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

fn check_input(balance: &Balance) -> Result<(), RegularizeError> {
    if !check_principal(balance).principal {
        return Err(RegularizeError::NotPrincipal);
    }
    if balance.params.iter().any(|p| p.lambda == 0) {
        return Err(RegularizeError::ZeroResonance);
    }
    if balance.dominant.rational_leading().is_none() {
        return Err(RegularizeError::SymbolicLeading);
    }
    Ok(())
}

/// `tau = u_p^(-1/k_p)` for the first admissible pivot (or the given one), the
/// reverted series, and every variable re-expanded in `tau`.
pub fn indicial_normalization(
    balance: &Balance,
    pivot: Option<usize>,
    tau: &Symbol,
) -> Result<Normalization, RegularizeError> {
    check_input(balance)?;
    let k = balance.exponents();
    let c = balance.dominant.rational_leading().expect("checked");
    let candidates: Vec<usize> = match pivot {
        Some(p) => vec![p],
        None => (0..balance.dim()).collect(),
    };
    let mut found = None;
    for p in candidates {
        if k[p] == 0 || c[p].is_zero() {
            continue;
        }
        let alpha = Rational::new((-1).into(), k[p].into());
        if let Ok(s) = balance.series(p).pow_rational(&alpha) {
            found = Some((p, s));
            break;
        }
    }
    let (p, tau_series) = found.ok_or(RegularizeError::NoRationalRootPivot)?;
    let beta = tau_series
        .coeff(1)
        .as_constant()
        .ok_or_else(|| RegularizeError::Internal("tau'(t0) is not rational".into()))?;
    let x_series = tau_series.revert()?.with_var(tau.clone());
    let t0_series = eliminate_t0(&x_series)?;
    let bind = HashMap::from([(time0(), t0_series.clone())]);
    let mut expanded = Vec::with_capacity(balance.dim());
    for i in 0..balance.dim() {
        let u = balance.series(i).compose(&x_series)?;
        expanded.push(if balance.is_autonomous_data() {
            u
        } else {
            u.substitute_coeff_series(&bind)?
        });
    }
    let rows: Vec<usize> = (0..balance.dim()).filter(|&i| i != p).collect();
    let reduced_matrix = slope_matrix(balance, &expanded, &rows, 1)?;
    Ok(Normalization {
        pivot: p,
        k1: k[p],
        beta,
        tau_series,
        x_series,
        t0_series,
        expanded,
        reduced_matrix,
    })
}

fn combinations(items: &[usize], m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    if items.len() < m {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (idx, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[idx + 1..], m - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Names for the new variables that do not clash with any symbol already in use.
pub fn fresh_names(wanted: &[String], taken: &BTreeSet<Symbol>) -> Vec<Symbol> {
    let mut used = taken.clone();
    wanted
        .iter()
        .map(|w| {
            let mut name = w.clone();
            while used.contains(&Symbol::new(&name)) {
                name.push('_');
            }
            let s = Symbol::new(&name);
            used.insert(s.clone());
            s
        })
        .collect()
}

pub fn default_names(n: usize) -> Vec<String> {
    std::iter::once(TAU.to_string())
        .chain((1..n).map(|pos| format!("rho{}", pos + 1)))
        .collect()
}

fn symbols_in_use(balance: &Balance) -> BTreeSet<Symbol> {
    let mut taken: BTreeSet<Symbol> = balance.vars.iter().cloned().collect();
    taken.insert(time());
    taken.insert(time0());
    taken.insert(series_var());
    for c in balance.coeffs.iter().flatten() {
        taken.extend(c.symbols());
    }
    taken
}

/// Walks the positive resonances in increasing order, assigning new variables
/// and eliminating the parameters they absorb.
pub fn absorb_resonances(
    balance: &Balance,
    norm: &Normalization,
    names: &[Symbol],
    plan: &ChangePlan,
) -> Result<Absorption, RegularizeError> {
    let n = balance.dim();
    let k = balance.exponents();
    let tau = names[0].clone();
    let mut u = norm.expanded.clone();
    let mut order = vec![norm.pivot];
    let mut exponents = vec![-norm.k1];
    let scales_in: Vec<Rational> = plan.scales.clone().unwrap_or_else(|| vec![Rational::one(); n]);
    if scales_in.len() != n || scales_in.iter().skip(1).any(Zero::is_zero) {
        return Err(RegularizeError::Plan("need n nonzero scales".into()));
    }
    let mut maps: Vec<Option<TruncatedSeries>> = vec![None; n];
    maps[norm.pivot] = Some(TruncatedSeries::monomial(tau.clone(), -norm.k1, MultiPoly::one()));
    let mut stages = Vec::new();
    let mut lambdas: Vec<i64> = balance.params.iter().map(|p| p.lambda).collect();
    lambdas.dedup();
    for lambda in lambdas {
        let params: Vec<Symbol> = balance
            .params
            .iter()
            .filter(|p| p.lambda == lambda)
            .map(|p| p.name.clone())
            .collect();
        let m = params.len();
        let unassigned: Vec<usize> = (0..n).filter(|i| !order.contains(i)).collect();
        let remaining = slope_matrix(balance, &u, &unassigned, lambda)?;
        let slopes_for = |rows: &[usize]| -> Result<RatMatrix, RegularizeError> {
            let mut entries = Vec::new();
            for &i in rows {
                let mut row = Vec::new();
                for p in &params {
                    row.push(constant_slope(&u[i], lambda - k[i], p, lambda, i)?);
                }
                entries.push(row);
            }
            Ok(RatMatrix::from_rows(entries))
        };
        let rows: Vec<usize> = match &plan.order {
            Some(forced) => forced[order.len()..order.len() + m].to_vec(),
            None => {
                let mut pick = None;
                for rows in combinations(&unassigned, m) {
                    let a = slopes_for(&rows)?;
                    if !a.determinant().expect("square").is_zero() {
                        pick = Some(rows);
                        break;
                    }
                }
                match pick {
                    Some(r) => r,
                    None => {
                        return Err(RegularizeError::NoPivotBlock {
                            lambda,
                            matrix: remaining,
                        })
                    }
                }
            }
        };
        let block = slopes_for(&rows)?;
        let Some(block_inv) = block.inverse().expect("square") else {
            return Err(RegularizeError::NoPivotBlock { lambda, matrix: block });
        };
        let later: BTreeSet<Symbol> = param_symbols_from(balance, lambda).into_iter().collect();
        let mut rhos = Vec::new();
        let mut tails = Vec::new();
        let mut stage_vars = Vec::new();
        for &i in &rows {
            let pos = order.len();
            let e = lambda - k[i];
            let low = u[i].part_below(e);
            if let Some(bad) = low
                .terms()
                .flat_map(|(_, c)| c.symbols())
                .find(|s| later.contains(s))
            {
                return Err(RegularizeError::Internal(format!(
                    "parameter {bad} appears below order {e} in variable {}",
                    balance.vars[i]
                )));
            }
            let rho = names[pos].clone();
            let s = scales_in[pos].clone();
            let own = TruncatedSeries::monomial(tau.clone(), e, MultiPoly::symbol(rho.clone()).scale(&s));
            maps[i] = Some(&low + &own);
            rhos.push(TruncatedSeries::constant(tau.clone(), MultiPoly::symbol(rho.clone()).scale(&s)));
            tails.push(u[i].tail_from(e));
            stage_vars.push(rho);
            order.push(i);
            exponents.push(e);
        }
        // s rho = tail(r) solved as r = A^-1 (s rho - (tail(r) - A r)); one order per round
        let rounds = tails.iter().filter_map(|t| t.trunc()).max().unwrap_or(0).max(0) + 2;
        let mut r: Vec<TruncatedSeries> = vec![TruncatedSeries::zero(tau.clone(), None); m];
        let mut converged = false;
        for _ in 0..rounds {
            let bind: HashMap<Symbol, TruncatedSeries> =
                params.iter().cloned().zip(r.iter().cloned()).collect();
            let mut rhs = Vec::with_capacity(m);
            for (a, tail) in tails.iter().enumerate() {
                let mut f = tail.substitute_coeff_series(&bind)?;
                for (b, rb) in r.iter().enumerate() {
                    f = &f - &rb.scale_rational(&block[(a, b)]);
                }
                rhs.push(&rhos[a] - &f);
            }
            let next: Vec<TruncatedSeries> = (0..m)
                .map(|b| {
                    (0..m).fold(TruncatedSeries::zero(tau.clone(), None), |acc, a| {
                        &acc + &rhs[a].scale_rational(&block_inv[(b, a)])
                    })
                })
                .collect();
            if next == r {
                converged = true;
                break;
            }
            r = next;
        }
        if !converged {
            return Err(RegularizeError::Internal(format!(
                "parameter elimination at resonance {lambda} did not settle"
            )));
        }
        let bind: HashMap<Symbol, TruncatedSeries> = params.iter().cloned().zip(r).collect();
        for i in 0..n {
            if order.contains(&i) && !rows.contains(&i) {
                continue;
            }
            u[i] = u[i].substitute_coeff_series(&bind)?;
        }
        for &i in &rows {
            if !u[i].agrees_with(maps[i].as_ref().expect("assigned")) {
                return Err(RegularizeError::Internal(format!(
                    "variable {} does not reduce to its cut-off form",
                    balance.vars[i]
                )));
            }
        }
        stages.push(Stage {
            lambda,
            rows,
            params,
            new_vars: stage_vars,
            block,
            remaining,
        });
    }
    if order.len() != n {
        return Err(RegularizeError::Internal(format!(
            "{} of {n} variables received a new variable",
            order.len()
        )));
    }
    if let Some(forced) = &plan.order {
        if *forced != order {
            return Err(RegularizeError::Internal("forced order was not followed".into()));
        }
    }
    let mut scales = scales_in;
    scales[0] = Rational::one();
    Ok(Absorption {
        stages,
        order,
        names: names.to_vec(),
        scales,
        exponents,
        maps: maps.into_iter().map(|m| m.expect("all assigned")).collect(),
    })
}

/// Packages the stages into the triangular change of variable.
pub fn build_triangular_change(
    balance: &Balance,
    norm: &Normalization,
    absorbed: Absorption,
) -> ChangeOfVariable {
    ChangeOfVariable {
        tau: absorbed.names[0].clone(),
        original: balance.vars.clone(),
        new_vars: absorbed.names,
        pivot_order: absorbed.order,
        k1: norm.k1,
        root_beta: norm.beta.clone(),
        exponents: absorbed.exponents,
        scales: absorbed.scales,
        maps: absorbed.maps,
        stages: absorbed.stages,
    }
}

fn validate_plan(plan: &ChangePlan, n: usize) -> Result<(), RegularizeError> {
    if let Some(order) = &plan.order {
        let mut seen = order.clone();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            return Err(RegularizeError::Plan("order must be a permutation".into()));
        }
    }
    if let Some(names) = &plan.names {
        if names.len() != n {
            return Err(RegularizeError::Plan(format!("need {n} names")));
        }
    }
    Ok(())
}

/// Normalization, absorption and assembly in one call.
pub fn regularize(
    balance: &Balance,
    plan: &ChangePlan,
) -> Result<(Normalization, ChangeOfVariable), RegularizeError> {
    let n = balance.dim();
    validate_plan(plan, n)?;
    let wanted = plan.names.clone().unwrap_or_else(|| default_names(n));
    let names = fresh_names(&wanted, &symbols_in_use(balance));
    if names.iter().map(Symbol::name).ne(wanted.iter().map(String::as_str)) && plan.names.is_some() {
        return Err(RegularizeError::Plan("new variable names clash with the system".into()));
    }
    let pivot = plan.order.as_ref().map(|o| o[0]);
    let norm = indicial_normalization(balance, pivot, &names[0])?;
    let absorbed = absorb_resonances(balance, &norm, &names, plan)?;
    let cov = build_triangular_change(balance, &norm, absorbed);
    Ok((norm, cov))
}

fn divide_by_monomial(s: &TruncatedSeries, exp: i64, coef: &Rational) -> TruncatedSeries {
    s.shift(-exp).scale_rational(&coef.recip())
}

/// Right sides of the new system, exactly, by forward substitution through the
/// lower-triangular Jacobian.
pub fn transform_system(sys: &OdeSystem, cov: &ChangeOfVariable) -> TransformedSystem {
    let n = cov.dim();
    let tau = cov.tau.clone();
    let bind: HashMap<Symbol, TruncatedSeries> =
        cov.original.iter().cloned().zip(cov.maps.iter().cloned()).collect();
    let t = time();
    let mut g: Vec<TruncatedSeries> = Vec::with_capacity(n);
    for (pos, &i) in cov.pivot_order.iter().enumerate() {
        let f = substitute_poly(&sys.rhs[sys.index_of(&cov.original[i]).expect("same variables")], &bind, &tau)
            .expect("exact maps");
        let mut rhs = &f - &cov.maps[i].map_coeffs(|c| c.partial_derivative(&t));
        for (q, gq) in g.iter().enumerate() {
            let d = if q == 0 {
                cov.maps[i].derivative()
            } else {
                cov.maps[i].map_coeffs(|c| c.partial_derivative(&cov.new_vars[q]))
            };
            rhs = &rhs - &(&d * gq);
        }
        let gp = if pos == 0 {
            divide_by_monomial(&rhs, -cov.k1 - 1, &rat(-cov.k1))
        } else {
            divide_by_monomial(&rhs, cov.exponents[pos], &cov.scales[pos])
        };
        g.push(gp);
    }
    let singular_orders = g
        .iter()
        .map(|s| s.valuation().map_or(0, |v| (-v).max(0)))
        .collect();
    TransformedSystem {
        vars: cov.new_vars.clone(),
        rhs: g,
        singular_orders,
        params: Vec::new(),
    }
}

/// First right side with a nonzero coefficient at a negative power of `tau`.
pub fn verify_regularity(ts: &TransformedSystem) -> Result<(), SingularWitness> {
    for (position, g) in ts.rhs.iter().enumerate() {
        if let Some((order, c)) = g.terms().next() {
            if order < 0 {
                return Err(SingularWitness {
                    position,
                    order,
                    coefficient: c.clone(),
                });
            }
        }
    }
    Ok(())
}

struct TauPowers {
    tau: TruncatedSeries,
    inv: TruncatedSeries,
}

impl TauPowers {
    fn new(tau: TruncatedSeries) -> Result<Self, SeriesError> {
        let inv = tau.inverse()?;
        Ok(TauPowers { tau, inv })
    }

    fn pow(&self, e: i64) -> TruncatedSeries {
        if e >= 0 {
            self.tau.pow(e as u32)
        } else {
            self.inv.pow((-e) as u32)
        }
    }
}

/// Evaluates a Laurent polynomial in `tau` along series in `t - t0`.
fn evaluate_along(
    s: &TruncatedSeries,
    powers: &TauPowers,
    bind: &HashMap<Symbol, TruncatedSeries>,
) -> Result<TruncatedSeries, SeriesError> {
    let x = series_var();
    let mut out = TruncatedSeries::zero(x.clone(), None);
    for (e, c) in s.terms() {
        let coef = substitute_poly(c, bind, &x)?;
        out = out.checked_add(&coef.checked_mul(&powers.pow(e))?)?;
    }
    Ok(out)
}

fn time_binding() -> TruncatedSeries {
    TruncatedSeries::from_terms(series_var(), [(0, MultiPoly::symbol(time0())), (1, MultiPoly::one())])
}

/// The balance in the new variables: `tau(t)` and `rho_i(t)` as power series in `t - t0`.
pub fn transform_balance(
    balance: &Balance,
    cov: &ChangeOfVariable,
) -> Result<TransformedBalance, RegularizeError> {
    let p = cov.pivot_order[0];
    let alpha = Rational::new((-1).into(), cov.k1.into());
    let tau_x = balance.series(p).pow_rational(&alpha)?;
    if tau_x.coeff(1).as_constant().as_ref() != Some(&cov.root_beta) {
        return Err(RegularizeError::Internal("root branch differs from the change of variable".into()));
    }
    let powers = TauPowers::new(tau_x.clone())?;
    let mut bind: HashMap<Symbol, TruncatedSeries> = HashMap::from([(time(), time_binding())]);
    let mut series = vec![tau_x];
    for (pos, &i) in cov.pivot_order.iter().enumerate().skip(1) {
        let e = cov.exponents[pos];
        let low = evaluate_along(&cov.lower_terms(i), &powers, &bind)?;
        let rho = (&balance.series(i) - &low)
            .checked_mul(&powers.pow(-e))?
            .scale_rational(&cov.scales[pos].recip());
        if rho.valuation().is_some_and(|v| v < 0) {
            return Err(RegularizeError::Internal(format!(
                "{} has a pole along the balance",
                cov.new_vars[pos]
            )));
        }
        bind.insert(cov.new_vars[pos].clone(), rho.clone());
        series.push(rho);
    }
    Ok(TransformedBalance {
        vars: cov.new_vars.clone(),
        series,
    })
}

fn new_variable_binding(cov: &ChangeOfVariable, tb: &TransformedBalance) -> HashMap<Symbol, TruncatedSeries> {
    let mut bind: HashMap<Symbol, TruncatedSeries> = HashMap::from([(time(), time_binding())]);
    for (v, s) in cov.new_vars.iter().zip(&tb.series).skip(1) {
        bind.insert(v.clone(), s.clone());
    }
    bind
}

/// Substituting the transformed balance into the change of variable gives back
/// the original balance; returns the first variable where it does not.
pub fn round_trip(balance: &Balance, cov: &ChangeOfVariable, tb: &TransformedBalance) -> Result<(), usize> {
    let powers = TauPowers::new(tb.series[0].clone()).map_err(|_| cov.pivot_order[0])?;
    let bind = new_variable_binding(cov, tb);
    for i in 0..cov.dim() {
        let back = evaluate_along(&cov.maps[i], &powers, &bind).map_err(|_| i)?;
        if !back.agrees_with(&balance.series(i)) {
            return Err(i);
        }
    }
    Ok(())
}

/// The transformed balance solves the new system to its known order; returns
/// the first failing position.
pub fn transformed_residual(ts: &TransformedSystem, cov: &ChangeOfVariable, tb: &TransformedBalance) -> Result<(), usize> {
    let powers = TauPowers::new(tb.series[0].clone()).map_err(|_| 0usize)?;
    let bind = new_variable_binding(cov, tb);
    for (pos, g) in ts.rhs.iter().enumerate() {
        let lhs = tb.series[pos].derivative();
        let rhs = evaluate_along(g, &powers, &bind).map_err(|_| pos)?;
        if !lhs.agrees_with(&rhs) {
            return Err(pos);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_system;
    use crate::painleve::{run_test, TestOptions};

    fn principal_balance(src: &str) -> (OdeSystem, Balance) {
        let sys = parse_system(src).unwrap();
        let r = run_test(&sys, &TestOptions::default());
        let b = r.principal_candidates()[0].balance.clone().unwrap();
        (sys, b)
    }

    fn full(src: &str) -> (OdeSystem, Balance, ChangeOfVariable, TransformedSystem) {
        let (sys, b) = principal_balance(src);
        let (_, cov) = regularize(&b, &ChangePlan::default()).unwrap();
        let ts = transform_system(&sys, &cov);
        (sys, b, cov, ts)
    }

    #[test]
    fn riccati() {
        let (_, b, cov, ts) = full("vars: u\nu' = u^2");
        assert_eq!(cov.root_beta, rat(-1));
        assert_eq!(cov.maps[0].to_string(), "1*tau^-1");
        assert!(cov.stages.is_empty());
        assert_eq!(ts.rhs[0], TruncatedSeries::constant(Symbol::new(TAU), MultiPoly::int(-1)));
        let tb = transform_balance(&b, &cov).unwrap();
        assert_eq!(tb.series[0].coeff(0), MultiPoly::zero());
        assert_eq!(tb.tau_derivative(), MultiPoly::int(-1));
        assert_eq!(tb.series[0].coeff(2), MultiPoly::zero());
    }

    #[test]
    fn weierstrass() {
        let (_, b, cov, ts) = full("vars: u1, u2\nu1' = u2\nu2' = 6*u1^2");
        assert_eq!(cov.pivot_order, vec![0, 1]);
        assert_eq!(cov.exponents, vec![-2, 3]);
        assert_eq!(cov.stages.len(), 1);
        assert_eq!(cov.stages[0].block.rows(), 1);
        assert!(!cov.stages[0].block[(0, 0)].is_zero());
        assert_eq!(cov.maps[1].coeff(-3), MultiPoly::int(-2));
        assert!(cov.is_triangular());
        verify_regularity(&ts).unwrap();
        // tau' = 1 - rho tau^6 / 2, rho' = 3/2 rho^2 tau^5
        let rho = MultiPoly::var("rho2");
        assert_eq!(ts.rhs[0].coeff(0), MultiPoly::one());
        assert_eq!(ts.rhs[0].coeff(6), rho.scale(&Rational::new((-1).into(), 2.into())));
        assert_eq!(ts.rhs[1].coeff(5), rho.pow(2).scale(&Rational::new(3.into(), 2.into())));
        let tb = transform_balance(&b, &cov).unwrap();
        assert_eq!(tb.tau_derivative(), MultiPoly::one());
        round_trip(&b, &cov, &tb).unwrap();
        transformed_residual(&ts, &cov, &tb).unwrap();
        // rho(t0) = A r
        let a = &cov.stages[0].block[(0, 0)];
        assert_eq!(tb.initial_values()[1], MultiPoly::var("r2").scale(a));
    }

    #[test]
    fn corrupted_change_is_singular() {
        let (sys, _, mut cov, _) = full("vars: u1, u2\nu1' = u2\nu2' = 6*u1^2");
        let bump = TruncatedSeries::monomial(cov.tau.clone(), -3, MultiPoly::int(-1));
        cov.maps[1] = &cov.maps[1] + &bump;
        let w = verify_regularity(&transform_system(&sys, &cov)).unwrap_err();
        assert!(w.order < 0);
        assert!(!w.coefficient.is_zero());
    }

    #[test]
    fn non_autonomous_first_painleve() {
        let (sys, b, cov, ts) = full("vars: q, p\nq' = p\np' = 6*q^2 + t");
        assert!(!b.is_autonomous_data());
        verify_regularity(&ts).unwrap();
        assert!(ts.rhs.iter().any(|g| g.terms().any(|(_, c)| c.contains_symbol(&time()))));
        let tb = transform_balance(&b, &cov).unwrap();
        round_trip(&b, &cov, &tb).unwrap();
        transformed_residual(&ts, &cov, &tb).unwrap();
        assert_eq!(sys.dim(), 2);
    }

    #[test]
    fn gelfand_dikii_regularizes() {
        let (_, b, cov, ts) = full(
            "vars: q1, q2, p1, p2\nq1' = -2*p2\nq2' = -2*q1*p2 - 2*p1\n\
             p1' = p2^2 - 6*q1*q2 + 4*q1^3\np2' = -3*q1^2 + 2*q2",
        );
        assert_eq!(cov.stages.iter().map(|s| s.lambda).collect::<Vec<_>>(), vec![2, 5, 8]);
        for s in &cov.stages {
            assert_eq!(s.block.rows(), 1);
            assert!(!s.remaining.determinant().unwrap().is_zero());
        }
        assert!(cov.is_triangular());
        verify_regularity(&ts).unwrap();
        let tb = transform_balance(&b, &cov).unwrap();
        assert_eq!(tb.tau_derivative(), MultiPoly::one());
        round_trip(&b, &cov, &tb).unwrap();
        transformed_residual(&ts, &cov, &tb).unwrap();
    }
}
