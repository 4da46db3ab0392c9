mod support;

use support::ad::{check_composition, check_mlp, random_case, Expr};

#[test]
fn random_compositions_match_finite_differences() {
    let failures: Vec<String> = (0..100).filter_map(|s| check_composition(s).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn random_mlps_match_finite_differences() {
    let failures: Vec<String> = (0..100).filter_map(|s| check_mlp(1000 + s).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn generator_covers_every_primitive() {
    fn walk(e: &Expr, seen: &mut Vec<String>) {
        if let Expr::Op(p, args) = e {
            let name = format!("{p:?}");
            let name = name.split([' ', '{']).next().unwrap().to_string();
            if !seen.contains(&name) {
                seen.push(name);
            }
            args.iter().for_each(|a| walk(a, seen));
        }
    }
    let mut seen = Vec::new();
    for s in 0..100 {
        walk(&random_case(s).0, &mut seen);
    }
    assert_eq!(seen.len(), 11, "{seen:?}");
}
