//! Terms, conditions and their three-valued evaluation.
//!
//! Evaluation is strict in the undefined value: a term that reads an item the
//! device does not hold is undefined, and any atom, negation or conjunction
//! with an undefined operand is undefined. There is no short-circuiting, so
//! `undefined ∧ false` is undefined.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::timestamp::Timestamp;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Date(Timestamp),
    Str(String),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Date(_) => "date",
            Value::Str(_) => "string",
        }
    }

    /// JSON form used by scenario files: numbers are integers, strings of the
    /// form `DD/MM/YYYY` are dates, any other string is a string.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Date(t) => serde_json::Value::from(t.to_string()),
            Value::Str(s) => serde_json::Value::from(s.as_str()),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Number(n) => n.as_i64().map(Value::Int),
            serde_json::Value::String(s) => Some(match s.parse::<Timestamp>() {
                Ok(t) => Value::Date(t),
                Err(_) => Value::Str(s.clone()),
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Date(t) => write!(f, "{t}"),
            Value::Str(s) if crate::text::is_bare_string(s) => f.write_str(s),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Value::from_json(&v).ok_or_else(|| serde::de::Error::custom("value must be an integer or a string"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Item(String),
    Const(Value),
    Apply(String, Vec<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Predicate {
    pub const ALL: [Predicate; 6] = [
        Predicate::Eq,
        Predicate::Ne,
        Predicate::Lt,
        Predicate::Le,
        Predicate::Gt,
        Predicate::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Predicate::Eq => "=",
            Predicate::Ne => "!=",
            Predicate::Lt => "<",
            Predicate::Le => "<=",
            Predicate::Gt => ">",
            Predicate::Ge => ">=",
        }
    }

    fn interpret(self, l: &Value, r: &Value) -> Result<bool, EvalError> {
        use std::cmp::Ordering::*;
        let ord = match (l, r) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => match self {
                Predicate::Eq => return Ok(a == b),
                Predicate::Ne => return Ok(a != b),
                _ => {
                    return Err(EvalError::TypeMismatch(format!(
                        "`{}` is not defined on strings",
                        self.symbol()
                    )))
                }
            },
            _ => {
                return Err(EvalError::TypeMismatch(format!(
                    "cannot compare {} with {}",
                    l.type_name(),
                    r.type_name()
                )))
            }
        };
        Ok(match self {
            Predicate::Eq => ord == Equal,
            Predicate::Ne => ord != Equal,
            Predicate::Lt => ord == Less,
            Predicate::Le => ord != Greater,
            Predicate::Gt => ord == Greater,
            Predicate::Ge => ord != Less,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    True,
    False,
    Atom(Predicate, Term, Term),
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TruthValue {
    True,
    False,
    Undefined,
}

impl TruthValue {
    pub fn is_true(self) -> bool {
        self == TruthValue::True
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue::True => "true",
            TruthValue::False => "false",
            TruthValue::Undefined => "undefined",
        })
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{function}` expects {expected} arguments, got {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

/// Built-in interpreted functions. All of them are strict in undefined
/// arguments.
pub const FUNCTIONS: &[(&str, usize)] = &[("add", 2), ("sub", 2), ("min", 2), ("max", 2)];

fn apply_function(name: &str, args: &[Value]) -> Result<Value, EvalError> {
    let expected = FUNCTIONS
        .iter()
        .find(|(f, _)| *f == name)
        .map(|(_, a)| *a)
        .ok_or_else(|| EvalError::UnknownFunction(name.to_string()))?;
    if args.len() != expected {
        return Err(EvalError::Arity {
            function: name.to_string(),
            expected,
            found: args.len(),
        });
    }
    let (Value::Int(a), Value::Int(b)) = (&args[0], &args[1]) else {
        return Err(EvalError::TypeMismatch(format!("`{name}` takes integers")));
    };
    Ok(Value::Int(match name {
        "add" => a.saturating_add(*b),
        "sub" => a.saturating_sub(*b),
        "min" => *a.min(b),
        _ => *a.max(b),
    }))
}

/// Local view of one device's database.
pub trait Valuation {
    fn lookup(&self, item: &str) -> Option<&Value>;
}

impl Valuation for BTreeMap<String, Value> {
    fn lookup(&self, item: &str) -> Option<&Value> {
        self.get(item)
    }
}

impl<V: Valuation + ?Sized> Valuation for &V {
    fn lookup(&self, item: &str) -> Option<&Value> {
        (**self).lookup(item)
    }
}

impl Term {
    /// `Ok(None)` is the undefined value.
    pub fn evaluate(&self, env: &dyn Valuation) -> Result<Option<Value>, EvalError> {
        match self {
            Term::Item(i) => Ok(env.lookup(i).cloned()),
            Term::Const(c) => Ok(Some(c.clone())),
            Term::Apply(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                let mut undefined = false;
                for a in args {
                    match a.evaluate(env)? {
                        Some(v) => vals.push(v),
                        None => undefined = true,
                    }
                }
                if undefined {
                    // still surface unknown symbols / arity errors
                    check_function(f, args.len())?;
                    return Ok(None);
                }
                apply_function(f, &vals).map(Some)
            }
        }
    }

    fn collect_items<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Item(i) => {
                out.insert(i);
            }
            Term::Const(_) => {}
            Term::Apply(_, args) => args.iter().for_each(|a| a.collect_items(out)),
        }
    }

    fn check_symbols(&self) -> Result<(), EvalError> {
        match self {
            Term::Apply(f, args) => {
                check_function(f, args.len())?;
                args.iter().try_for_each(Term::check_symbols)
            }
            _ => Ok(()),
        }
    }
}

fn check_function(name: &str, arity: usize) -> Result<(), EvalError> {
    match FUNCTIONS.iter().find(|(f, _)| *f == name) {
        None => Err(EvalError::UnknownFunction(name.to_string())),
        Some((_, a)) if *a != arity => Err(EvalError::Arity {
            function: name.to_string(),
            expected: *a,
            found: arity,
        }),
        Some(_) => Ok(()),
    }
}

impl Condition {
    pub fn atom(pred: Predicate, lhs: Term, rhs: Term) -> Self {
        Condition::Atom(pred, lhs, rhs)
    }

    pub fn and(self, other: Condition) -> Self {
        Condition::And(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Condition::Not(Box::new(self))
    }

    pub fn evaluate(&self, env: &dyn Valuation) -> Result<TruthValue, EvalError> {
        Ok(match self {
            Condition::True => TruthValue::True,
            Condition::False => TruthValue::False,
            Condition::Atom(p, l, r) => {
                let (l, r) = (l.evaluate(env)?, r.evaluate(env)?);
                match (l, r) {
                    (Some(l), Some(r)) => p.interpret(&l, &r)?.into(),
                    _ => TruthValue::Undefined,
                }
            }
            Condition::Not(c) => match c.evaluate(env)? {
                TruthValue::Undefined => TruthValue::Undefined,
                v => (!v.is_true()).into(),
            },
            Condition::And(a, b) => {
                let (a, b) = (a.evaluate(env)?, b.evaluate(env)?);
                if a == TruthValue::Undefined || b == TruthValue::Undefined {
                    TruthValue::Undefined
                } else {
                    (a.is_true() && b.is_true()).into()
                }
            }
        })
    }

    /// Every item the condition reads.
    pub fn items(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_items(&mut out);
        out
    }

    fn collect_items<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Condition::True | Condition::False => {}
            Condition::Atom(_, l, r) => {
                l.collect_items(out);
                r.collect_items(out);
            }
            Condition::Not(c) => c.collect_items(out),
            Condition::And(a, b) => {
                a.collect_items(out);
                b.collect_items(out);
            }
        }
    }

    /// Checks that every function symbol is registered with its arity.
    pub fn check_symbols(&self) -> Result<(), EvalError> {
        match self {
            Condition::True | Condition::False => Ok(()),
            Condition::Atom(_, l, r) => {
                l.check_symbols()?;
                r.check_symbols()
            }
            Condition::Not(c) => c.check_symbols(),
            Condition::And(a, b) => {
                a.check_symbols()?;
                b.check_symbols()
            }
        }
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Condition> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Condition, out: &mut Vec<&'a Condition>) {
            if let Condition::And(a, b) = c {
                walk(a, out);
                walk(b, out);
            } else {
                out.push(c);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Left-nested conjunction of `parts`; `tt` when empty.
    pub fn conjunction<I: IntoIterator<Item = Condition>>(parts: I) -> Condition {
        parts.into_iter().reduce(|acc, c| acc.and(c)).unwrap_or(Condition::True)
    }

    /// Canonical form: conjunctions flattened, sorted and deduplicated, `tt`
    /// conjuncts dropped, and conjunctions containing `ff` collapsed to `ff`
    /// unless they sit under a negation.
    ///
    /// Evaluation is preserved on every valuation that defines the items the
    /// condition reads. The `ff` collapse drops items, so on partial
    /// valuations the result can be `false` where the input was undefined;
    /// it is never applied under `not`, where that would turn undefined into
    /// true.
    pub fn normalize(&self) -> Condition {
        self.normalize_in(true)
    }

    fn normalize_in(&self, collapse: bool) -> Condition {
        match self {
            Condition::True | Condition::False | Condition::Atom(..) => self.clone(),
            Condition::Not(c) => c.normalize_in(false).not(),
            Condition::And(..) => {
                let mut parts = BTreeSet::new();
                for c in self.conjuncts() {
                    for n in c.normalize_in(collapse).conjuncts() {
                        match n {
                            Condition::True => {}
                            Condition::False if collapse => return Condition::False,
                            other => {
                                parts.insert(other.clone());
                            }
                        }
                    }
                }
                Condition::conjunction(parts)
            }
        }
    }
}

/// Sound, incomplete entailment: `true` only if every valuation, total or
/// partial, that makes `strong` true also makes `weak` true.
pub fn entails(strong: &Condition, weak: &Condition) -> bool {
    entails_normal(&strong.normalize(), &weak.normalize())
}

fn entails_normal(a: &Condition, b: &Condition) -> bool {
    if *b == Condition::True || *a == Condition::False || a == b {
        return true;
    }
    if matches!(b, Condition::And(..)) {
        return b.conjuncts().into_iter().all(|bi| entails_normal(a, bi));
    }
    if matches!(a, Condition::And(..)) {
        return a.conjuncts().into_iter().any(|ai| entails_normal(ai, b));
    }
    false
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Item(i) => f.write_str(i),
            Term::Const(c) => write!(f, "{c}"),
            Term::Apply(name, args) => {
                write!(f, "{name}(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Concrete syntax; equality is written `is`.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::True => f.write_str("true"),
            Condition::False => f.write_str("false"),
            Condition::Atom(Predicate::Eq, l, r) => write!(f, "{l} is {r}"),
            Condition::Atom(p, l, r) => write!(f, "{l} {} {r}", p.symbol()),
            Condition::Not(c) if matches!(**c, Condition::And(..)) => write!(f, "not ({c})"),
            Condition::Not(c) => write!(f, "not {c}"),
            Condition::And(a, b) if matches!(**b, Condition::And(..)) => write!(f, "{a} and ({b})"),
            Condition::And(a, b) => write!(f, "{a} and {b}"),
        }
    }
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        crate::text::parse_condition(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(i: &str) -> Term {
        Term::Item(i.into())
    }
    fn int(i: i64) -> Term {
        Term::Const(Value::Int(i))
    }
    fn s(v: &str) -> Term {
        Term::Const(Value::Str(v.into()))
    }
    fn env(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn constants_evaluate_to_themselves() {
        let e = env(&[]);
        assert_eq!(Condition::True.evaluate(&e).unwrap(), TruthValue::True);
        assert_eq!(Condition::False.evaluate(&e).unwrap(), TruthValue::False);
    }

    #[test]
    fn missing_item_is_undefined() {
        let c = Condition::atom(Predicate::Eq, item("car_location"), s("Lyon"));
        assert_eq!(c.evaluate(&env(&[])).unwrap(), TruthValue::Undefined);
        let e = env(&[("car_location", Value::Str("Lyon".into()))]);
        assert_eq!(c.evaluate(&e).unwrap(), TruthValue::True);
    }

    #[test]
    fn age_conjunction() {
        let c = Condition::atom(Predicate::Ge, item("age"), int(18)).and(Condition::True);
        let e = env(&[("age", Value::Int(21))]);
        assert_eq!(c.evaluate(&e).unwrap(), TruthValue::True);
    }

    #[test]
    fn conjunction_is_strict_in_undefined() {
        let c = Condition::atom(Predicate::Eq, item("a"), int(1)).and(Condition::False);
        assert_eq!(c.evaluate(&env(&[])).unwrap(), TruthValue::Undefined);
        assert_eq!(c.clone().not().evaluate(&env(&[])).unwrap(), TruthValue::Undefined);
    }

    #[test]
    fn ordering_on_strings_is_a_type_error() {
        let c = Condition::atom(Predicate::Lt, s("A"), s("B"));
        assert!(matches!(c.evaluate(&env(&[])), Err(EvalError::TypeMismatch(_))));
        let c = Condition::atom(Predicate::Eq, int(1), s("B"));
        assert!(c.evaluate(&env(&[])).is_err());
    }

    #[test]
    fn functions_are_checked() {
        let c = Condition::atom(
            Predicate::Eq,
            Term::Apply("add".into(), vec![item("a"), int(2)]),
            int(5),
        );
        assert_eq!(c.evaluate(&env(&[("a", Value::Int(3))])).unwrap(), TruthValue::True);
        assert_eq!(c.evaluate(&env(&[])).unwrap(), TruthValue::Undefined);
        let bad = Condition::atom(Predicate::Eq, Term::Apply("hash".into(), vec![]), int(5));
        assert!(matches!(bad.evaluate(&env(&[])), Err(EvalError::UnknownFunction(_))));
        let arity = Condition::atom(Predicate::Eq, Term::Apply("add".into(), vec![int(1)]), int(5));
        assert!(matches!(arity.check_symbols(), Err(EvalError::Arity { .. })));
    }

    #[test]
    fn normalize_unit_idempotence_annihilator() {
        let lyon = Condition::atom(Predicate::Eq, item("car_location"), s("Lyon"));
        assert_eq!(Condition::True.and(lyon.clone()).normalize(), lyon);
        assert_eq!(lyon.clone().and(lyon.clone()).normalize(), lyon);
        let a1 = Condition::atom(Predicate::Eq, item("a"), int(1));
        assert_eq!(a1.and(Condition::False).normalize(), Condition::False);
        assert_eq!(Condition::True.and(Condition::True).normalize(), Condition::True);
    }

    #[test]
    fn normalize_sorts_and_flattens() {
        let a = Condition::atom(Predicate::Eq, item("a"), int(1));
        let b = Condition::atom(Predicate::Eq, item("b"), int(1));
        let c = Condition::atom(Predicate::Eq, item("c"), int(1));
        let x = c.clone().and(a.clone().and(b.clone()));
        let y = b.clone().and(c.clone()).and(a.clone());
        assert_eq!(x.normalize(), y.normalize());
        assert_eq!(x.normalize(), a.and(b).and(c));
    }

    #[test]
    fn entailment_rules() {
        let lyon = Condition::atom(Predicate::Eq, item("car_location"), s("Lyon"));
        let adult = Condition::atom(Predicate::Ge, item("age"), int(18));
        assert!(entails(&lyon, &Condition::True));
        assert!(entails(&lyon, &lyon));
        assert!(!entails(&Condition::True, &adult));
        assert!(entails(&Condition::False, &adult));
        let both = lyon.clone().and(adult.clone());
        assert!(entails(&both, &lyon));
        assert!(entails(&both, &adult));
        assert!(entails(&both, &adult.clone().and(lyon.clone())));
        assert!(!entails(&lyon, &both));
        assert!(!entails(&adult.clone().not(), &adult));
    }

    #[test]
    fn rendering() {
        let lyon = Condition::atom(Predicate::Eq, item("car_location"), s("Lyon"));
        assert_eq!(lyon.to_string(), "car_location is Lyon");
        let a = Condition::atom(Predicate::Ge, item("age"), int(-3));
        let nested = a.clone().and(lyon.clone().and(Condition::True)).not();
        assert_eq!(
            nested.to_string(),
            "not (age >= -3 and (car_location is Lyon and true))"
        );
        let q = Condition::atom(Predicate::Eq, item("x"), s("two words"));
        assert_eq!(q.to_string(), "x is \"two words\"");
    }
}
