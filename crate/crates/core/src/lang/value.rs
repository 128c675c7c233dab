//! Runtime values.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::TypeTag;

/// Heap reference with the provenance of the class version that built it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjRef {
    pub id: usize,
    pub class: String,
    pub library: String,
    pub version: String,
}

/// Multiset with an internal insertion order.
///
/// `PartialEq` is order-sensitive; [`Bag::canonical_eq`] compares as a
/// multiset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub items: Vec<Value>,
}

impl Bag {
    pub fn canonical_items(&self) -> Vec<Value> {
        let mut items = self.items.clone();
        items.sort_by(total_cmp);
        items
    }

    pub fn canonical_eq(&self, other: &Bag) -> bool {
        self.items.len() == other.items.len()
            && self
                .canonical_items()
                .iter()
                .zip(other.canonical_items().iter())
                .all(|(a, b)| total_cmp(a, b) == Ordering::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", content = "v")]
pub enum Value {
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    Obj(ObjRef),
    Bag(Bag),
}

impl Value {
    pub fn default_for(tag: &TypeTag) -> Value {
        match tag {
            TypeTag::Int => Value::Int(0),
            TypeTag::Str => Value::Str(String::new()),
            TypeTag::Bool => Value::Bool(false),
            TypeTag::Bag => Value::Bag(Bag::default()),
            TypeTag::Void | TypeTag::Class(_) => Value::Null,
        }
    }

    pub fn type_name(&self) -> &str {
        match self {
            Value::Int(_) => "Int",
            Value::Str(_) => "Str",
            Value::Bool(_) => "Bool",
            Value::Null => "Null",
            Value::Obj(o) => &o.class,
            Value::Bag(_) => "Bag",
        }
    }

    pub fn as_obj(&self) -> Option<&ObjRef> {
        match self {
            Value::Obj(o) => Some(o),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => f.write_str("null"),
            Value::Obj(o) => write!(f, "<{}#{}>", o.class, o.id),
            Value::Bag(b) => {
                f.write_str("bag[")?;
                for (i, v) in b.items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

fn rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Int(_) => 2,
        Value::Str(_) => 3,
        Value::Bag(_) => 4,
        Value::Obj(_) => 5,
    }
}

/// Total order over values used for canonical bag ordering: by variant,
/// then by content. Objects order by class name then heap id.
pub fn total_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Bag(x), Value::Bag(y)) => {
            let (xs, ys) = (x.canonical_items(), y.canonical_items());
            for (p, q) in xs.iter().zip(ys.iter()) {
                let o = total_cmp(p, q);
                if o != Ordering::Equal {
                    return o;
                }
            }
            xs.len().cmp(&ys.len())
        }
        (Value::Obj(x), Value::Obj(y)) => x.class.cmp(&y.class).then(x.id.cmp(&y.id)),
        _ => rank(a).cmp(&rank(b)),
    }
}

/// Equality used by the `==` operator: objects by identity, bags as
/// multisets, everything else by content. Values of different kinds are
/// unequal.
pub fn language_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Obj(x), Value::Obj(y)) => x.id == y.id,
        (Value::Bag(x), Value::Bag(y)) => x.canonical_eq(y),
        _ => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bag_equality_modes() {
        let a = Bag {
            items: vec![Value::Int(2), Value::Str("x".into()), Value::Int(1)],
        };
        let b = Bag {
            items: vec![Value::Int(1), Value::Int(2), Value::Str("x".into())],
        };
        assert_ne!(a, b);
        assert!(a.canonical_eq(&b));
        assert!(language_eq(&Value::Bag(a), &Value::Bag(b)));
    }

    #[test]
    fn total_order_ranks_variants() {
        assert_eq!(total_cmp(&Value::Null, &Value::Int(-5)), Ordering::Less);
        assert_eq!(
            total_cmp(&Value::Str("a".into()), &Value::Int(i64::MAX)),
            Ordering::Greater
        );
        assert!(!language_eq(&Value::Int(1), &Value::Str("1".into())));
    }
}
