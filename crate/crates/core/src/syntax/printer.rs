use std::fmt;

use super::Formula;

// Binding strength; a child printed in a slot demanding a higher level
// than its own gets parenthesized.
const IFF: u8 = 0;
const IMP: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const UNARY: u8 = 4;
const ATOM: u8 = 5;

fn level(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => IFF,
        Formula::Implies(..) => IMP,
        Formula::Or(..) => OR,
        Formula::And(..) => AND,
        Formula::Not(_) | Formula::A(_) | Formula::E(_) => UNARY,
        Formula::Prop(_) | Formula::Top | Formula::Bot | Formula::Kh(..) => ATOM,
    }
}

fn write_at(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if level(f) < min {
        out.write_str("(")?;
        write_at(f, IFF, out)?;
        return out.write_str(")");
    }
    match f {
        Formula::Prop(p) => out.write_str(p),
        Formula::Top => out.write_str("true"),
        Formula::Bot => out.write_str("false"),
        Formula::Not(g) => {
            out.write_str("~")?;
            write_at(g, UNARY, out)
        }
        Formula::A(g) => {
            out.write_str("A ")?;
            write_at(g, UNARY, out)
        }
        Formula::E(g) => {
            out.write_str("E ")?;
            write_at(g, UNARY, out)
        }
        Formula::And(a, b) => binary(a, " & ", b, AND, AND + 1, out),
        Formula::Or(a, b) => binary(a, " | ", b, OR, OR + 1, out),
        Formula::Implies(a, b) => binary(a, " -> ", b, IMP + 1, IMP, out),
        Formula::Iff(a, b) => binary(a, " <-> ", b, IFF, IFF + 1, out),
        Formula::Kh(a, b) => {
            out.write_str("Kh(")?;
            write_at(a, IFF, out)?;
            out.write_str(", ")?;
            write_at(b, IFF, out)?;
            out.write_str(")")
        }
    }
}

fn binary(
    a: &Formula,
    op: &str,
    b: &Formula,
    left: u8,
    right: u8,
    out: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    write_at(a, left, out)?;
    out.write_str(op)?;
    write_at(b, right, out)
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(self, IFF, f)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{desugar, parse};
    use super::*;
    use proptest::prelude::*;

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            "[a-z][a-z0-9_]{0,2}"
                .prop_filter("keyword", |s| s != "true" && s != "false")
                .prop_map(Formula::Prop),
            Just(Formula::Top),
            Just(Formula::Bot),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                inner.clone().prop_map(Formula::univ),
                inner.clone().prop_map(Formula::exists),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::iff(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::kh(a, b)),
            ]
        })
    }

    #[test]
    fn prints_minimal_parentheses() {
        let f = parse("(p -> q) -> r").unwrap();
        assert_eq!(f.to_string(), "(p -> q) -> r");
        let f = parse("p -> q -> r").unwrap();
        assert_eq!(f.to_string(), "p -> q -> r");
        let f = parse("~(p & q) | Kh(A ~p, E (q | r))").unwrap();
        assert_eq!(f.to_string(), "~(p & q) | Kh(A ~p, E (q | r))");
        assert_eq!(parse("p & (q & r)").unwrap().to_string(), "p & (q & r)");
    }

    proptest! {
        #[test]
        fn parse_print_round_trip(f in arb_formula()) {
            let printed = f.to_string();
            let back = parse(&printed).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(desugar(&back), desugar(&f));
        }
    }
}
