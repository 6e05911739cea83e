use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

/// A variable or parameter name. Ordered "naturally", so `r2 < r10`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    fn split(&self) -> (&str, Option<u64>, &str) {
        let s: &str = &self.0;
        let digits_start = s
            .char_indices()
            .rev()
            .take_while(|(_, c)| c.is_ascii_digit())
            .last()
            .map(|(i, _)| i);
        match digits_start {
            Some(i) if i > 0 => match s[i..].parse::<u64>() {
                Ok(n) => (&s[..i], Some(n), &s[i..]),
                Err(_) => (s, None, ""),
            },
            _ => (s, None, ""),
        }
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        let (pa, na, ra) = self.split();
        let (pb, nb, rb) = other.split();
        pa.cmp(pb)
            .then_with(|| na.cmp(&nb))
            .then_with(|| ra.cmp(rb))
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut v: Vec<Symbol> = ["r10", "r2", "q1", "r3", "p2", "t", "t0"]
            .iter()
            .map(|s| Symbol::new(s))
            .collect();
        v.sort();
        let names: Vec<&str> = v.iter().map(|s| s.name()).collect();
        assert_eq!(names, ["p2", "q1", "r2", "r3", "r10", "t", "t0"]);
    }
}
