//! Truncated Laurent series in one distinguished symbol with polynomial coefficients.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::rational::{format_rational, rat, rational_root, Rational};
use crate::algebra::{Monomial, MultiPoly, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series in `{0}` combined with series in `{1}`")]
    VariableMismatch(String, String),
    #[error("not enough known orders to produce a result")]
    TruncationUnderflow,
    #[error("series cannot be inverted or reverted: {0}")]
    NotReversible(String),
    #[error("operation needs a truncated series")]
    Unbounded,
}

/// Laurent series `sum_e coeff(e) * var^e` known exactly below `trunc`.
///
/// `trunc == None` means the series is an exact Laurent polynomial. Stored
/// coefficients are trimmed so the first and last are nonzero.
#[derive(Clone, PartialEq, Eq)]
pub struct TruncatedSeries {
    var: Symbol,
    min_exp: i64,
    coeffs: Vec<MultiPoly>,
    trunc: Option<i64>,
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn add_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    Some(a? + b?)
}

impl TruncatedSeries {
    pub fn new(var: Symbol, min_exp: i64, coeffs: Vec<MultiPoly>, trunc: Option<i64>) -> Self {
        let mut s = TruncatedSeries {
            var,
            min_exp,
            coeffs,
            trunc,
        };
        s.normalize();
        s
    }

    pub fn zero(var: Symbol, trunc: Option<i64>) -> Self {
        TruncatedSeries::new(var, 0, Vec::new(), trunc)
    }

    /// Exact `coef * var^exp`.
    pub fn monomial(var: Symbol, exp: i64, coef: MultiPoly) -> Self {
        TruncatedSeries::new(var, exp, vec![coef], None)
    }

    /// Exact constant series.
    pub fn constant(var: Symbol, c: MultiPoly) -> Self {
        TruncatedSeries::monomial(var, 0, c)
    }

    /// Exact Laurent polynomial from `(exponent, coefficient)` pairs.
    pub fn from_terms(var: Symbol, terms: impl IntoIterator<Item = (i64, MultiPoly)>) -> Self {
        let mut map: std::collections::BTreeMap<i64, MultiPoly> = Default::default();
        for (e, c) in terms {
            let entry = map.entry(e).or_default();
            *entry = &*entry + &c;
        }
        let Some(&lo) = map.keys().next() else {
            return TruncatedSeries::zero(var, None);
        };
        let hi = *map.keys().next_back().unwrap();
        let mut coeffs = vec![MultiPoly::zero(); (hi - lo + 1) as usize];
        for (e, c) in map {
            coeffs[(e - lo) as usize] = c;
        }
        TruncatedSeries::new(var, lo, coeffs, None)
    }

    fn normalize(&mut self) {
        if let Some(t) = self.trunc {
            let keep = (t - self.min_exp).clamp(0, self.coeffs.len() as i64) as usize;
            self.coeffs.truncate(keep);
        }
        while self.coeffs.last().is_some_and(MultiPoly::is_zero) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.min_exp += lead as i64;
        }
        if self.coeffs.is_empty() {
            self.min_exp = self.trunc.unwrap_or(0);
        }
    }

    pub fn var(&self) -> &Symbol {
        &self.var
    }

    pub fn trunc(&self) -> Option<i64> {
        self.trunc
    }

    pub fn is_exact(&self) -> bool {
        self.trunc.is_none()
    }

    /// True when no nonzero coefficient is known.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Order of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<i64> {
        (!self.coeffs.is_empty()).then_some(self.min_exp)
    }

    /// Largest order with a stored nonzero coefficient.
    pub fn max_exp(&self) -> Option<i64> {
        (!self.coeffs.is_empty()).then(|| self.min_exp + self.coeffs.len() as i64 - 1)
    }

    /// Lower bound on the order of everything the series may contain:
    /// the valuation, or the truncation for a zero series (`None` if exactly zero).
    fn low(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            self.trunc
        } else {
            Some(self.min_exp)
        }
    }

    pub fn coeff(&self, e: i64) -> MultiPoly {
        let idx = e - self.min_exp;
        if idx < 0 || idx >= self.coeffs.len() as i64 {
            MultiPoly::zero()
        } else {
            self.coeffs[idx as usize].clone()
        }
    }

    pub fn leading_coeff(&self) -> Option<&MultiPoly> {
        self.coeffs.first()
    }

    /// Nonzero `(exponent, coefficient)` pairs in increasing order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &MultiPoly)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.min_exp + i as i64, c))
    }

    fn check_var(&self, other: &TruncatedSeries) -> Result<(), SeriesError> {
        if self.var != other.var {
            return Err(SeriesError::VariableMismatch(
                self.var.name().to_string(),
                other.var.name().to_string(),
            ));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.check_var(other)?;
        if self.coeffs.is_empty() {
            return Ok(other.truncate_opt(self.trunc));
        }
        if other.coeffs.is_empty() {
            return Ok(self.truncate_opt(other.trunc));
        }
        let lo = self.min_exp.min(other.min_exp);
        let hi = self.max_exp().unwrap().max(other.max_exp().unwrap());
        let coeffs = (lo..=hi)
            .map(|e| &self.coeff(e) + &other.coeff(e))
            .collect();
        Ok(TruncatedSeries::new(
            self.var.clone(),
            lo,
            coeffs,
            min_opt(self.trunc, other.trunc),
        ))
    }

    pub fn checked_sub(&self, other: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.checked_add(&-other)
    }

    pub fn checked_mul(&self, other: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.check_var(other)?;
        let trunc = min_opt(
            add_opt(self.trunc, other.low()),
            add_opt(other.trunc, self.low()),
        );
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Ok(TruncatedSeries::zero(self.var.clone(), trunc));
        }
        let lo = self.min_exp + other.min_exp;
        let mut len = self.coeffs.len() + other.coeffs.len() - 1;
        if let Some(t) = trunc {
            len = len.min((t - lo).max(0) as usize);
        }
        let mut coeffs = vec![MultiPoly::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() || i >= len {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                if !b.is_zero() {
                    coeffs[i + j] = &coeffs[i + j] + &(a * b);
                }
            }
        }
        Ok(TruncatedSeries::new(self.var.clone(), lo, coeffs, trunc))
    }

    pub fn scale(&self, c: &MultiPoly) -> TruncatedSeries {
        TruncatedSeries::new(
            self.var.clone(),
            self.min_exp,
            self.coeffs.iter().map(|a| a * c).collect(),
            self.trunc,
        )
    }

    pub fn scale_rational(&self, c: &Rational) -> TruncatedSeries {
        TruncatedSeries::new(
            self.var.clone(),
            self.min_exp,
            self.coeffs.iter().map(|a| a.scale(c)).collect(),
            self.trunc,
        )
    }

    /// Multiplies by `var^k`.
    pub fn shift(&self, k: i64) -> TruncatedSeries {
        TruncatedSeries {
            var: self.var.clone(),
            min_exp: self.min_exp + k,
            coeffs: self.coeffs.clone(),
            trunc: self.trunc.map(|t| t + k),
        }
    }

    /// Forgets every order at or above `t`.
    pub fn truncate(&self, t: i64) -> TruncatedSeries {
        self.truncate_opt(Some(t))
    }

    fn truncate_opt(&self, t: Option<i64>) -> TruncatedSeries {
        TruncatedSeries::new(
            self.var.clone(),
            self.min_exp,
            self.coeffs.clone(),
            min_opt(self.trunc, t),
        )
    }

    pub fn pow(&self, e: u32) -> TruncatedSeries {
        let mut acc = TruncatedSeries::constant(self.var.clone(), MultiPoly::one());
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// The leading coefficient as a nonzero rational, or an explanation.
    fn rational_lead(&self) -> Result<Rational, SeriesError> {
        let lead = self
            .leading_coeff()
            .ok_or_else(|| SeriesError::NotReversible("zero series".into()))?;
        match lead.as_constant() {
            Some(c) if !c.is_zero() => Ok(c),
            _ => Err(SeriesError::NotReversible(format!(
                "leading coefficient {lead} is not a nonzero rational"
            ))),
        }
    }

    pub fn is_monomial(&self) -> bool {
        self.coeffs.len() == 1
    }

    /// Multiplicative inverse; the leading coefficient must be a nonzero rational.
    pub fn inverse(&self) -> Result<TruncatedSeries, SeriesError> {
        self.pow_rational(&rat(-1))
    }

    /// `self^alpha` for rational `alpha`, taking the positive branch of even roots.
    ///
    /// Requires a rational leading coefficient whose `alpha`-th power is rational
    /// and an integral leading order `alpha * valuation`.
    pub fn pow_rational(&self, alpha: &Rational) -> Result<TruncatedSeries, SeriesError> {
        let c0 = self.rational_lead()?;
        let v = self.min_exp;
        let new_v = alpha * rat(v);
        if !new_v.is_integer() {
            return Err(SeriesError::NotReversible(format!(
                "order {} is not integral",
                format_rational(&new_v)
            )));
        }
        let new_v: i64 = crate::algebra::rational::to_i64(&new_v).ok_or(SeriesError::Unbounded)?;
        let k: u32 = alpha
            .denom()
            .try_into()
            .map_err(|_| SeriesError::NotReversible("root too large".into()))?;
        let p: i64 = alpha
            .numer()
            .try_into()
            .map_err(|_| SeriesError::NotReversible("power too large".into()))?;
        let root = rational_root(&c0, k).ok_or_else(|| {
            SeriesError::NotReversible(format!(
                "{} has no rational root of order {k}",
                format_rational(&c0)
            ))
        })?;
        let w0 = crate::algebra::rational::rpow(&root, p);
        if self.is_monomial() {
            return Ok(TruncatedSeries::new(
                self.var.clone(),
                new_v,
                vec![MultiPoly::constant(w0)],
                self.trunc.map(|t| new_v + t - v),
            ));
        }
        let t = self.trunc.ok_or(SeriesError::Unbounded)?;
        let len = (t - v) as usize;
        // Miller's recurrence: n s0 w_n = sum_{m=1}^n ((alpha+1) m - n) s_m w_{n-m}
        let s: Vec<MultiPoly> = (0..len).map(|i| self.coeff(v + i as i64)).collect();
        let inv_s0 = c0.recip();
        let a1 = alpha + Rational::one();
        let mut w: Vec<MultiPoly> = Vec::with_capacity(len);
        w.push(MultiPoly::constant(w0));
        for n in 1..len {
            let mut acc = MultiPoly::zero();
            for m in 1..=n {
                if s[m].is_zero() || w[n - m].is_zero() {
                    continue;
                }
                let f = &a1 * rat(m as i64) - rat(n as i64);
                if f.is_zero() {
                    continue;
                }
                acc = acc + (&s[m] * &w[n - m]).scale(&f);
            }
            w.push(acc.scale(&(&inv_s0 / rat(n as i64))));
        }
        Ok(TruncatedSeries::new(
            self.var.clone(),
            new_v,
            w,
            Some(new_v + t - v),
        ))
    }

    pub fn derivative(&self) -> TruncatedSeries {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.scale(&rat(self.min_exp + i as i64)))
            .collect();
        TruncatedSeries::new(
            self.var.clone(),
            self.min_exp - 1,
            coeffs,
            self.trunc.map(|t| t - 1),
        )
    }

    /// Applies `f` to every coefficient.
    pub fn map_coeffs(&self, f: impl Fn(&MultiPoly) -> MultiPoly) -> TruncatedSeries {
        TruncatedSeries::new(
            self.var.clone(),
            self.min_exp,
            self.coeffs.iter().map(f).collect(),
            self.trunc,
        )
    }

    /// Substitutes polynomials for symbols inside the coefficients.
    pub fn substitute_coeffs(&self, bindings: &HashMap<Symbol, MultiPoly>) -> TruncatedSeries {
        self.map_coeffs(|c| c.substitute(bindings))
    }

    /// Substitutes series for symbols inside the coefficients.
    pub fn substitute_coeff_series(
        &self,
        bindings: &HashMap<Symbol, TruncatedSeries>,
    ) -> Result<TruncatedSeries, SeriesError> {
        let mut out = TruncatedSeries::zero(self.var.clone(), self.trunc);
        for (e, c) in self.terms() {
            let s = substitute_poly(c, bindings, &self.var)?;
            out = out.checked_add(&s.shift(e))?;
        }
        Ok(out)
    }

    /// `outer(inner(x))`; `inner` must have positive valuation.
    pub fn compose(&self, inner: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        let var = inner.var.clone();
        let Some(w) = inner.valuation() else {
            return Err(SeriesError::NotReversible("inner series is zero".into()));
        };
        if w < 1 {
            return Err(SeriesError::NotReversible(
                "inner series must vanish at the origin".into(),
            ));
        }
        if self.coeffs.is_empty() {
            return Ok(TruncatedSeries::zero(var, self.trunc.map(|t| t * w)));
        }
        let vo = self.min_exp;
        let rel = inner.trunc.map(|t| t - w);
        let trunc = min_opt(self.trunc.map(|t| t * w), rel.map(|p| vo * w + p));
        let cut = |s: TruncatedSeries| match trunc {
            Some(t) => s.truncate(t),
            None => s,
        };
        let mut out = TruncatedSeries::zero(var.clone(), trunc);
        let hi = self.max_exp().unwrap();
        if vo < 0 {
            let inv = inner.inverse()?;
            let mut p = TruncatedSeries::constant(var.clone(), MultiPoly::one());
            for e in (vo..0).rev() {
                p = &p * &inv;
                let c = self.coeff(e);
                if !c.is_zero() {
                    out = &out + &p.scale(&c);
                }
            }
        }
        if hi >= 0 {
            let mut p = TruncatedSeries::constant(var.clone(), MultiPoly::one());
            for e in 0..=hi {
                if e > 0 {
                    p = cut(&p * inner);
                }
                if let (Some(t), Some(v)) = (trunc, p.low()) {
                    if v >= t {
                        break;
                    }
                }
                let c = self.coeff(e);
                if !c.is_zero() {
                    out = &out + &p.scale(&c);
                }
            }
        }
        Ok(out.truncate_opt(trunc))
    }

    /// Compositional inverse `w` with `self(w(x)) = x` to the known order.
    ///
    /// Needs valuation 1 and a nonzero rational linear coefficient.
    pub fn revert(&self) -> Result<TruncatedSeries, SeriesError> {
        if self.valuation() != Some(1) {
            return Err(SeriesError::NotReversible(
                "series must start at order 1".into(),
            ));
        }
        let s1 = self.rational_lead()?;
        let inv = s1.recip();
        let var = self.var.clone();
        if self.is_monomial() {
            return Ok(TruncatedSeries::new(
                var,
                1,
                vec![MultiPoly::constant(inv)],
                self.trunc,
            ));
        }
        let t = self.trunc.ok_or(SeriesError::Unbounded)?;
        let mut w = TruncatedSeries::monomial(var.clone(), 1, MultiPoly::constant(inv.clone()));
        for n in 2..t {
            let probe = self.compose(&w.truncate(n + 1))?;
            let c = probe.coeff(n);
            if !c.is_zero() {
                let term = TruncatedSeries::monomial(var.clone(), n, c.scale(&-inv.clone()));
                w = &w + &term;
            }
        }
        Ok(w.truncate(t))
    }

    /// The same coefficients read as a series in another symbol.
    pub fn with_var(&self, var: Symbol) -> TruncatedSeries {
        TruncatedSeries {
            var,
            ..self.clone()
        }
    }

    /// Exact Laurent polynomial made of the terms below order `e`.
    pub fn part_below(&self, e: i64) -> TruncatedSeries {
        TruncatedSeries::from_terms(
            self.var.clone(),
            self.terms().filter(|(x, _)| *x < e).map(|(x, c)| (x, c.clone())),
        )
    }

    /// The terms at orders `>= e`, shifted down by `e`.
    pub fn tail_from(&self, e: i64) -> TruncatedSeries {
        let coeffs = (e..self.max_exp().map_or(e, |m| m + 1).max(e))
            .map(|x| self.coeff(x))
            .collect();
        TruncatedSeries::new(self.var.clone(), 0, coeffs, self.trunc.map(|t| t - e))
    }

    /// Reads an exact series without negative powers as a polynomial in its variable.
    pub fn to_poly(&self) -> Option<MultiPoly> {
        if self.trunc.is_some() || self.valuation().is_some_and(|v| v < 0) {
            return None;
        }
        let x = MultiPoly::symbol(self.var.clone());
        Some(self.terms().map(|(e, c)| c * &x.pow(e as u32)).sum())
    }

    /// `f` collected in the powers of `var`, as an exact series.
    pub fn from_poly(f: &MultiPoly, var: Symbol) -> TruncatedSeries {
        let terms: Vec<(i64, MultiPoly)> = f
            .collect_in(&var)
            .into_iter()
            .map(|(e, c)| (e as i64, c))
            .collect();
        TruncatedSeries::from_terms(var, terms)
    }

    /// Coefficient-wise equality on the orders both series know.
    pub fn agrees_with(&self, other: &TruncatedSeries) -> bool {
        match self.checked_sub(other) {
            Ok(d) => d.is_zero(),
            Err(_) => false,
        }
    }
}

/// Expands `f` with the bound symbols replaced by series in `var`.
///
/// Unbound symbols stay inside the coefficients. Terms sharing the same
/// exponents on the bound symbols are grouped so each product of powers is
/// formed once.
pub fn substitute_poly(
    f: &MultiPoly,
    bindings: &HashMap<Symbol, TruncatedSeries>,
    var: &Symbol,
) -> Result<TruncatedSeries, SeriesError> {
    for s in bindings.values() {
        if s.var() != var {
            return Err(SeriesError::VariableMismatch(
                var.name().to_string(),
                s.var().name().to_string(),
            ));
        }
    }
    let mut groups: std::collections::BTreeMap<Vec<(Symbol, u32)>, MultiPoly> = Default::default();
    for (m, c) in f.terms() {
        let mut bound = Vec::new();
        let mut free = Vec::new();
        for (s, e) in m.factors() {
            if bindings.contains_key(s) {
                bound.push((s.clone(), *e));
            } else {
                free.push((s.clone(), *e));
            }
        }
        groups
            .entry(bound)
            .or_default()
            .add_term(Monomial::from_pairs(free), c.clone());
    }
    let mut cache: HashMap<(Symbol, u32), TruncatedSeries> = HashMap::new();
    let mut out = TruncatedSeries::zero(var.clone(), None);
    let mut lowest: Option<i64> = None;
    for (bound, coef) in groups {
        let mut prod = TruncatedSeries::constant(var.clone(), coef);
        let mut low = 0i64;
        for (s, e) in bound {
            let base = &bindings[&s];
            low += base.low().unwrap_or(0) * e as i64;
            let pw = cache
                .entry((s.clone(), e))
                .or_insert_with(|| base.pow(e))
                .clone();
            prod = &prod * &pw;
        }
        lowest = Some(lowest.map_or(low, |l: i64| l.min(low)));
        out = &out + &prod;
    }
    if let (Some(t), Some(l)) = (out.trunc, lowest) {
        if t <= l {
            return Err(SeriesError::TruncationUnderflow);
        }
    }
    Ok(out)
}

fn panic_on<T>(r: Result<T, SeriesError>) -> T {
    r.unwrap_or_else(|e| panic!("{e}"))
}

impl Add<&TruncatedSeries> for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        panic_on(self.checked_add(rhs))
    }
}

impl Sub<&TruncatedSeries> for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        panic_on(self.checked_sub(rhs))
    }
}

impl Mul<&TruncatedSeries> for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        panic_on(self.checked_mul(rhs))
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        self.map_coeffs(|c| -c)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let body = if c.len() > 1 {
                format!("({c})")
            } else {
                c.to_string()
            };
            match e {
                0 => write!(f, "{body}")?,
                1 => write!(f, "{body}*{}", self.var)?,
                _ => write!(f, "{body}*{}^{e}", self.var)?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        if let Some(t) = self.trunc {
            write!(f, " + O({}^{t})", self.var)?;
        }
        Ok(())
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
