//! ODE and Hamiltonian systems, their text format, and JSON report helpers.

mod parser;
pub mod report;

use std::collections::HashSet;
use std::fmt::Write as _;

pub use parser::{parse_expr, parse_file, parse_hamiltonian, parse_system, ParseError, ParseErrorKind};

use crate::algebra::{MultiPoly, Symbol};

/// The reserved name of the independent variable.
pub const TIME: &str = "t";
/// The reserved name of the singularity location.
pub const TIME0: &str = "t0";

/// `u_i' = f_i(t, u_1, ..., u_n)` with polynomial right sides.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSystem {
    pub vars: Vec<Symbol>,
    pub rhs: Vec<MultiPoly>,
    /// Optional names for the resonance parameters, in injection order.
    pub params: Vec<String>,
}

/// Hamiltonian `H(t, q, p)`; equations are ordered `q_1..q_n, p_1..p_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSystem {
    pub q: Vec<Symbol>,
    pub p: Vec<Symbol>,
    pub h: MultiPoly,
    pub params: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelFile {
    System(OdeSystem),
    Hamiltonian(HamiltonianSystem),
}

pub fn time() -> Symbol {
    Symbol::new(TIME)
}

pub fn time0() -> Symbol {
    Symbol::new(TIME0)
}

impl OdeSystem {
    pub fn new(vars: Vec<Symbol>, rhs: Vec<MultiPoly>) -> Self {
        assert_eq!(vars.len(), rhs.len());
        OdeSystem {
            vars,
            rhs,
            params: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn is_autonomous(&self) -> bool {
        let t = time();
        !self.rhs.iter().any(|f| f.contains_symbol(&t))
    }

    pub fn index_of(&self, s: &Symbol) -> Option<usize> {
        self.vars.iter().position(|v| v == s)
    }

    /// Text in the input format; parsing it gives back an equal system.
    pub fn to_text(&self) -> String {
        let mut out = String::from("system\n");
        let names: Vec<&str> = self.vars.iter().map(Symbol::name).collect();
        let _ = writeln!(out, "vars: {}", names.join(", "));
        if !self.params.is_empty() {
            let _ = writeln!(out, "params: {}", self.params.join(", "));
        }
        for (v, f) in self.vars.iter().zip(&self.rhs) {
            let _ = writeln!(out, "{v}' = {f}");
        }
        out
    }
}

impl HamiltonianSystem {
    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_autonomous(&self) -> bool {
        !self.h.contains_symbol(&time())
    }

    /// Variables in equation order `q_1..q_n, p_1..p_n`.
    pub fn vars(&self) -> Vec<Symbol> {
        self.q.iter().chain(&self.p).cloned().collect()
    }

    /// `q_i' = dH/dp_i`, `p_i' = -dH/dq_i`.
    pub fn to_system(&self) -> OdeSystem {
        let mut rhs: Vec<MultiPoly> = self.p.iter().map(|p| self.h.partial_derivative(p)).collect();
        rhs.extend(self.q.iter().map(|q| -self.h.partial_derivative(q)));
        OdeSystem {
            vars: self.vars(),
            rhs,
            params: self.params.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("hamiltonian\n");
        let q: Vec<&str> = self.q.iter().map(Symbol::name).collect();
        let p: Vec<&str> = self.p.iter().map(Symbol::name).collect();
        let _ = writeln!(out, "vars: {} ; {}", q.join(", "), p.join(", "));
        if !self.params.is_empty() {
            let _ = writeln!(out, "params: {}", self.params.join(", "));
        }
        let _ = writeln!(out, "H = {}", self.h);
        out
    }
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        match self {
            ModelFile::System(s) => s.to_text(),
            ModelFile::Hamiltonian(h) => h.to_text(),
        }
    }

    /// The first-order system to analyse.
    pub fn system(&self) -> OdeSystem {
        match self {
            ModelFile::System(s) => s.clone(),
            ModelFile::Hamiltonian(h) => h.to_system(),
        }
    }
}

/// Free function form of [`HamiltonianSystem::to_system`].
pub fn hamiltonian_to_system(hs: &HamiltonianSystem) -> OdeSystem {
    hs.to_system()
}

pub(crate) fn reserved(name: &str) -> bool {
    name == TIME || name == TIME0
}

pub(crate) fn distinct(names: &[Symbol]) -> bool {
    let set: HashSet<&Symbol> = names.iter().collect();
    set.len() == names.len()
}
