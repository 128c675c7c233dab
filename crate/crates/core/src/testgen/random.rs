use rand::Rng;

use crate::lang::ast::TypeTag;
use crate::lang::{Bag, Value};

pub const INT_RANGE: std::ops::RangeInclusive<i64> = -100..=1000;
pub const MAX_STR_LEN: usize = 10;
const STR_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789*#/.-_!@ ";

/// Random primitive. Class and void tags yield `Null`; bags hold up to
/// three random integers.
pub fn random_value<R: Rng + ?Sized>(tag: &TypeTag, rng: &mut R) -> Value {
    match tag {
        TypeTag::Int => Value::Int(rng.gen_range(INT_RANGE)),
        TypeTag::Str => {
            let len = rng.gen_range(0..=MAX_STR_LEN);
            Value::Str(
                (0..len)
                    .map(|_| STR_CHARS[rng.gen_range(0..STR_CHARS.len())] as char)
                    .collect(),
            )
        }
        TypeTag::Bool => Value::Bool(rng.gen_bool(0.5)),
        TypeTag::Bag => Value::Bag(Bag {
            items: (0..rng.gen_range(0..=3))
                .map(|_| Value::Int(rng.gen_range(INT_RANGE)))
                .collect(),
        }),
        TypeTag::Void | TypeTag::Class(_) => Value::Null,
    }
}

pub(crate) fn random_char<R: Rng + ?Sized>(rng: &mut R) -> char {
    STR_CHARS[rng.gen_range(0..STR_CHARS.len())] as char
}
