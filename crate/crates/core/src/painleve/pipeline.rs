//! The full Painlevé test over every candidate balance of a system.

use num_traits::Zero;

use super::balance::{check_principal, expand_balance, residual_check, Balance, PrincipalVerdict};
use super::dominant::{
    enumerate_fuchsian_exponents, is_fuchsian, solve_dominant, verify_dominant_balance,
    DominantData, DominantSolutions,
};
use super::resonance::{
    basic_resonance_check, basic_resonance_vector, kowalevskian, resonance_structure,
    ResonanceStructure,
};
use crate::algebra::{MultiPoly, RatMatrix};
use crate::model::OdeSystem;

#[derive(Clone, Debug)]
pub struct TestOptions {
    pub bound: i64,
    /// Truncation order `M`; defaults to the largest resonance plus 5.
    pub order: Option<usize>,
    pub exponents: Option<Vec<i64>>,
    pub leading: Option<Vec<MultiPoly>>,
    pub parameter_names: Vec<String>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            bound: 10,
            order: None,
            exponents: None,
            leading: None,
            parameter_names: Vec::new(),
        }
    }
}

pub const DEFAULT_MARGIN: usize = 5;

/// Everything computed for one candidate `(k, c)`, as far as the test got.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub exponents: Vec<i64>,
    pub leading: Option<Vec<MultiPoly>>,
    pub kowalevskian: Option<RatMatrix>,
    pub resonances: Option<ResonanceStructure>,
    pub balance: Option<Balance>,
    pub principal: Option<PrincipalVerdict>,
    pub residual_order: Option<i64>,
    /// `None` when the candidate reached a verdict; otherwise the failing stage and why.
    pub failure: Option<(String, String)>,
}

impl Candidate {
    fn new(exponents: Vec<i64>, leading: Option<Vec<MultiPoly>>) -> Self {
        Candidate {
            exponents,
            leading,
            kowalevskian: None,
            resonances: None,
            balance: None,
            principal: None,
            residual_order: None,
            failure: None,
        }
    }

    fn fail(mut self, stage: &str, detail: impl Into<String>) -> Self {
        self.failure = Some((stage.to_string(), detail.into()));
        self
    }

    pub fn is_principal(&self) -> bool {
        self.failure.is_none() && self.principal.as_ref().is_some_and(|p| p.principal)
    }

    /// `"principal"`, `"not_principal"` or `"fails:<stage>"`.
    pub fn verdict(&self) -> String {
        match (&self.failure, &self.principal) {
            (Some((stage, _)), _) => format!("fails:{stage}"),
            (None, Some(p)) if p.principal => "principal".into(),
            _ => "not_principal".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TestReport {
    pub candidates: Vec<Candidate>,
    /// Set when no candidate could be formed at all.
    pub global_failure: Option<(String, String)>,
}

impl TestReport {
    pub fn any_principal(&self) -> bool {
        self.candidates.iter().any(Candidate::is_principal)
    }

    pub fn verdict(&self) -> String {
        if let Some((stage, _)) = &self.global_failure {
            return format!("fails:{stage}");
        }
        if self.any_principal() {
            return "principal".into();
        }
        if self.candidates.iter().any(|c| c.failure.is_none()) {
            return "not_principal".into();
        }
        self.candidates
            .first()
            .map_or_else(|| "fails:dominant".into(), Candidate::verdict)
    }

    pub fn principal_candidates(&self) -> Vec<&Candidate> {
        self.candidates.iter().filter(|c| c.is_principal()).collect()
    }
}

/// Runs one candidate from verified dominant data to the principal verdict.
pub fn analyse_candidate(sys: &OdeSystem, dd: DominantData, opts: &TestOptions) -> Candidate {
    let mut cand = Candidate::new(dd.exponents.clone(), Some(dd.leading.clone()));
    if !dd.fuchsian {
        return cand.fail("exponents", "exponents are not Fuchsian");
    }
    let k = match kowalevskian(sys, &dd) {
        Ok(k) => k,
        Err(e) => {
            return cand.fail(
                "kowalevskian",
                format!("entry ({}, {}) is {} (not a constant)", e.row + 1, e.col + 1, e.entry),
            )
        }
    };
    cand.kowalevskian = Some(k.clone());
    if !basic_resonance_check(&dd, &k) {
        return cand.fail("basic_resonance", "(K + I)(-k c) does not vanish");
    }
    let rs = match resonance_structure(&k) {
        Ok(rs) => rs,
        Err(e) => return cand.fail("resonances", e.to_string()),
    };
    let basic = basic_resonance_vector(&dd).expect("rational leading coefficients");
    let rs = rs
        .with_basis(-1, vec![basic])
        .expect("the basic vector spans the -1 eigenspace");
    cand.resonances = Some(rs.clone());
    let order = opts
        .order
        .unwrap_or((rs.largest().max(0) as usize) + DEFAULT_MARGIN)
        .max(2);
    let balance = match expand_balance(sys, &dd, &rs, order, &opts.parameter_names) {
        Ok(b) => b,
        Err(e) => return cand.fail("expansion", e.to_string()),
    };
    match residual_check(sys, &balance) {
        Ok(o) => cand.residual_order = Some(o),
        Err(w) => {
            cand.balance = Some(balance);
            return cand.fail(
                "residual",
                format!("equation {} at order {}: {}", w.equation + 1, w.order, w.coefficient),
            );
        }
    }
    cand.principal = Some(check_principal(&balance));
    cand.balance = Some(balance);
    cand
}

/// Enumerates exponents (or uses the given ones), solves or verifies the
/// dominant balance, and analyses every resulting candidate.
pub fn run_test(sys: &OdeSystem, opts: &TestOptions) -> TestReport {
    let mut candidates = Vec::new();
    if let (Some(k), Some(c)) = (&opts.exponents, &opts.leading) {
        match verify_dominant_balance(sys, k, c) {
            Ok(dd) => candidates.push(analyse_candidate(sys, dd, opts)),
            Err(r) => candidates.push(Candidate::new(k.clone(), Some(c.clone())).fail(
                "dominant",
                format!("equation {} leaves {}", r.index + 1, r.residual),
            )),
        }
        return TestReport {
            candidates,
            global_failure: None,
        };
    }
    let ks: Vec<Vec<i64>> = match &opts.exponents {
        Some(k) => {
            if !is_fuchsian(sys, k) {
                return TestReport {
                    candidates,
                    global_failure: Some(("exponents".into(), "given exponents are not Fuchsian".into())),
                };
            }
            vec![k.clone()]
        }
        None => enumerate_fuchsian_exponents(sys, opts.bound)
            .into_iter()
            .map(|c| c.exponents)
            .collect(),
    };
    if ks.is_empty() {
        return TestReport {
            candidates,
            global_failure: Some((
                "exponents".into(),
                format!("no Fuchsian exponents with entries up to {}", opts.bound),
            )),
        };
    }
    let explicit = opts.exponents.is_some();
    for k in ks {
        match solve_dominant(sys, &k) {
            DominantSolutions::Solved(sols) => {
                for c in sols {
                    let c: Vec<MultiPoly> = c.into_iter().map(MultiPoly::constant).collect();
                    let dd = verify_dominant_balance(sys, &k, &c).expect("solutions satisfy the balance");
                    candidates.push(analyse_candidate(sys, dd, opts));
                }
            }
            DominantSolutions::Unsolved { reason } => {
                // only worth reporting when the user asked for these exponents
                if explicit {
                    candidates.push(Candidate::new(k.clone(), None).fail("dominant", reason));
                }
            }
        }
    }
    if candidates.is_empty() {
        return TestReport {
            candidates,
            global_failure: Some(("dominant".into(), "no dominant balance at any Fuchsian exponent".into())),
        };
    }
    TestReport {
        candidates,
        global_failure: None,
    }
}

/// True when the `-1` column of `R` is `-k*c`.
pub fn minus_one_column_is_basic(b: &Balance) -> bool {
    let Some(v) = basic_resonance_vector(&b.dominant) else {
        return false;
    };
    b.resonances
        .block(-1)
        .is_some_and(|blk| blk.basis.len() == 1 && blk.basis[0] == v && !v.iter().all(Zero::is_zero))
}
