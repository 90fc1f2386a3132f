//! Typed variable contexts and their finite state spaces.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::AlgebraError;

/// A program value: an exact number, a symbolic atom, or an array of values.
///
/// Booleans are the numbers 0 and 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Num(BigRational),
    Atom(Arc<str>),
    Array(Vec<Value>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn atom(s: &str) -> Value {
        Value::Atom(Arc::from(s))
    }

    pub fn bool(b: bool) -> Value {
        Value::int(b as i64)
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Value::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Value::Num(r) if r.is_one())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Value::Num(r) if r.is_zero())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(r) => write!(f, "{}", r),
            Value::Atom(a) => write!(f, "{}", a),
            Value::Array(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", v)?;
                }
                write!(f, "]")
            }
        }
    }
}

/// A named variable with an explicit finite domain.
#[derive(Clone)]
pub struct Var {
    name: String,
    domain: Vec<Value>,
    lookup: HashMap<Value, usize>,
}

impl Var {
    pub fn new(name: impl Into<String>, domain: Vec<Value>) -> Result<Self, AlgebraError> {
        let name = name.into();
        if domain.is_empty() {
            return Err(AlgebraError::EmptyDomain(name));
        }
        let mut lookup = HashMap::with_capacity(domain.len());
        for (i, v) in domain.iter().enumerate() {
            if lookup.insert(v.clone(), i).is_some() {
                return Err(AlgebraError::DuplicateValue(name, v.to_string()));
            }
        }
        Ok(Var { name, domain, lookup })
    }

    /// Integer range `lo..=hi`.
    pub fn range(name: impl Into<String>, lo: i64, hi: i64) -> Result<Self, AlgebraError> {
        Var::new(name, (lo..=hi).map(Value::int).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &[Value] {
        &self.domain
    }

    pub fn index_of(&self, v: &Value) -> Option<usize> {
        self.lookup.get(v).copied()
    }

    pub fn renamed(&self, name: impl Into<String>) -> Var {
        Var { name: name.into(), domain: self.domain.clone(), lookup: self.lookup.clone() }
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.domain == other.domain
    }
}

impl Eq for Var {}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{{", self.name)?;
        for (i, v) in self.domain.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v)?;
        }
        write!(f, "}}")
    }
}

/// An ordered list of distinct variables. Its states are the cartesian
/// product of the domains, enumerated lexicographically with the first
/// declared variable most significant.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct VarContext {
    vars: Arc<Vec<Var>>,
}

impl VarContext {
    pub fn empty() -> Self {
        VarContext::default()
    }

    pub fn new(vars: Vec<Var>) -> Result<Self, AlgebraError> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(AlgebraError::NameClash(v.name.clone()));
            }
        }
        Ok(VarContext { vars: Arc::new(vars) })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn state_count(&self) -> usize {
        self.vars.iter().map(|v| v.domain.len()).product()
    }

    /// Domain indices of the state with the given index.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars.len()];
        for (slot, var) in out.iter_mut().zip(self.vars.iter()).rev() {
            let n = var.domain.len();
            *slot = index % n;
            index /= n;
        }
        out
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.vars.len());
        digits
            .iter()
            .zip(self.vars.iter())
            .fold(0, |acc, (d, var)| acc * var.domain.len() + d)
    }

    pub fn values_of(&self, index: usize) -> Vec<Value> {
        self.decode(index)
            .into_iter()
            .zip(self.vars.iter())
            .map(|(d, var)| var.domain[d].clone())
            .collect()
    }

    /// Looks up the state index of a full assignment in declaration order.
    pub fn index_of_values(&self, values: &[Value]) -> Option<usize> {
        if values.len() != self.vars.len() {
            return None;
        }
        let digits: Option<Vec<usize>> =
            values.iter().zip(self.vars.iter()).map(|(v, var)| var.index_of(v)).collect();
        digits.map(|d| self.encode(&d))
    }

    pub fn is_disjoint(&self, other: &VarContext) -> bool {
        other.names().all(|n| !self.contains(n))
    }

    /// `self` followed by `other`; names must be disjoint.
    pub fn merge(&self, other: &VarContext) -> Result<VarContext, AlgebraError> {
        let mut vars: Vec<Var> = self.vars.to_vec();
        vars.extend(other.vars.iter().cloned());
        VarContext::new(vars)
    }

    /// Inserts a variable at `pos`.
    pub fn insert(&self, pos: usize, var: Var) -> Result<VarContext, AlgebraError> {
        let mut vars: Vec<Var> = self.vars.to_vec();
        vars.insert(pos.min(vars.len()), var);
        VarContext::new(vars)
    }

    pub fn push(&self, var: Var) -> Result<VarContext, AlgebraError> {
        self.insert(self.len(), var)
    }

    pub fn remove(&self, name: &str) -> Result<VarContext, AlgebraError> {
        let pos = self.position(name).ok_or_else(|| AlgebraError::Unbound(name.to_string()))?;
        let mut vars: Vec<Var> = self.vars.to_vec();
        vars.remove(pos);
        VarContext::new(vars)
    }

    /// The first `n` variables.
    pub fn prefix(&self, n: usize) -> VarContext {
        VarContext { vars: Arc::new(self.vars[..n.min(self.len())].to_vec()) }
    }

    /// The variables from position `n` on.
    pub fn suffix(&self, n: usize) -> VarContext {
        VarContext { vars: Arc::new(self.vars[n.min(self.len())..].to_vec()) }
    }

    /// Same variables (names and domains), possibly in another order.
    pub fn same_vars(&self, other: &VarContext) -> bool {
        self.len() == other.len() && self.vars.iter().all(|v| other.var(&v.name) == Some(v))
    }

    /// For each variable of `self`, its position in `source`.
    pub fn positions_in(&self, source: &VarContext) -> Result<Vec<usize>, AlgebraError> {
        self.vars
            .iter()
            .map(|v| match source.var(&v.name) {
                Some(w) if w == v => Ok(source.position(&v.name).unwrap()),
                _ => Err(AlgebraError::ContextMismatch(format!(
                    "variable {} not available in {}",
                    v, source
                ))),
            })
            .collect()
    }

    /// For every state of `self`, the index of the state of `target` that
    /// agrees with it on the variables of `target` (a projection map).
    pub fn projection_onto(&self, target: &VarContext) -> Result<Vec<usize>, AlgebraError> {
        let pos = target.positions_in(self)?;
        let mut out = Vec::with_capacity(self.state_count());
        let mut digits = vec![0usize; self.len()];
        let mut sub = vec![0usize; target.len()];
        for idx in 0..self.state_count() {
            if idx > 0 {
                self.increment(&mut digits);
            }
            for (s, p) in sub.iter_mut().zip(pos.iter()) {
                *s = digits[*p];
            }
            out.push(target.encode(&sub));
        }
        Ok(out)
    }

    /// Advances a digit vector to the next state in enumeration order.
    pub fn increment(&self, digits: &mut [usize]) {
        for (d, var) in digits.iter_mut().zip(self.vars.iter()).rev() {
            *d += 1;
            if *d < var.domain.len() {
                return;
            }
            *d = 0;
        }
    }

    /// Renders a state as `(v1,v2,...)`.
    pub fn show_state(&self, index: usize) -> String {
        let vals: Vec<String> = self.values_of(index).iter().map(|v| v.to_string()).collect();
        format!("({})", vals.join(","))
    }
}

impl fmt::Debug for VarContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for VarContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vars.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Convenience for tests and builders: `ctx(&[("n", 4), ("b", 2)])` gives
/// integer ranges starting at zero.
pub fn int_context(spec: &[(&str, i64)]) -> VarContext {
    VarContext::new(
        spec.iter()
            .map(|(n, k)| Var::range(*n, 0, k - 1).expect("nonempty range"))
            .collect(),
    )
    .expect("distinct names")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_enumeration() {
        let c = int_context(&[("n", 4), ("b", 2)]);
        assert_eq!(c.state_count(), 8);
        assert_eq!(c.decode(0), vec![0, 0]);
        assert_eq!(c.decode(1), vec![0, 1]);
        assert_eq!(c.decode(2), vec![1, 0]);
        assert_eq!(c.encode(&[3, 1]), 7);
        for i in 0..8 {
            assert_eq!(c.encode(&c.decode(i)), i);
        }
    }

    #[test]
    fn duplicate_names_and_empty_domains_rejected() {
        let v = Var::range("x", 0, 1).unwrap();
        assert!(VarContext::new(vec![v.clone(), v]).is_err());
        assert!(Var::new("y", vec![]).is_err());
    }

    #[test]
    fn empty_context_has_one_state() {
        assert_eq!(VarContext::empty().state_count(), 1);
        assert_eq!(VarContext::empty().decode(0), Vec::<usize>::new());
    }

    #[test]
    fn projection_drops_variables() {
        let c = int_context(&[("n", 3), ("b", 2)]);
        let b = int_context(&[("b", 2)]);
        assert_eq!(c.projection_onto(&b).unwrap(), vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn equality_is_order_sensitive() {
        let a = int_context(&[("n", 3), ("b", 2)]);
        let b = int_context(&[("b", 2), ("n", 3)]);
        assert_ne!(a, b);
        assert!(a.same_vars(&b));
    }
}
