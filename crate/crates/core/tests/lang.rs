use astprove::lang::{
    normalize, parse, pretty_print, Expr, Guard, LangError, Literal, Monomial, Poly, Program, Rel, SingleWhileLoop, Stmt,
    StmtKind, Term,
};
use proptest::prelude::*;

const HEADER: &str = "pvar x; pvar y; rvar r ~ table{-1:1/2, 1:1/2}; rvar s ~ uniform(0..2); skip";

fn header() -> Program {
    parse(HEADER).unwrap()
}

fn coeff() -> impl Strategy<Value = i64> {
    prop_oneof![-9i64..=-1, 1i64..=9]
}

fn expr() -> impl Strategy<Value = Expr> {
    let term = prop_oneof![
        Just(Term::Pvar("x".into())),
        Just(Term::Pvar("y".into())),
        Just(Term::Rvar("r".into())),
        Just(Term::Rvar("s".into())),
        Just(Term::RvarIsqrt { rvar: "r".into(), pvar: "x".into() }),
        Just(Term::RvarIsqrt { rvar: "s".into(), pvar: "y".into() }),
    ];
    (-20i64..20, prop::collection::btree_map(term, coeff(), 0..4)).prop_map(|(constant, terms)| Expr { constant, terms })
}

fn poly() -> impl Strategy<Value = Poly> {
    let mono = prop::sample::select(vec![vec!["x"], vec!["y"], vec!["x", "x"], vec!["x", "y"], vec!["y", "y"]])
        .prop_map(|v| Monomial::new(v.into_iter().map(String::from).collect()));
    (-20i64..20, prop::collection::btree_map(mono, coeff(), 0..3)).prop_map(|(constant, terms)| Poly { constant, terms })
}

fn guard() -> impl Strategy<Value = Guard> {
    let lit = (poly(), prop_oneof![Just(Rel::Le), Just(Rel::Ge)], poly())
        .prop_map(|(lhs, rel, rhs)| Guard::Lit(Literal { lhs, rel, rhs }));
    lit.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|g| Guard::Not(Box::new(g))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Guard::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Guard::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        1 => Just(Stmt::skip()),
        4 => (prop::sample::select(vec!["x", "y"]), expr())
            .prop_map(|(v, e)| Stmt::new(StmtKind::Assign { var: v.into(), expr: e })),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Stmt::seq),
            (guard(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| Stmt::new(StmtKind::If {
                cond: c,
                then_branch: Box::new(t),
                else_branch: Box::new(e),
            })),
            (guard(), inner).prop_map(|(c, b)| Stmt::new(StmtKind::While { cond: c, body: Box::new(b) })),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pretty_print_reparses_to_equal_ast(body in stmt()) {
        let prog = Program { body, ..header() };
        let text = pretty_print(&prog);
        let back = parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        prop_assert_eq!(&back, &prog);
        prop_assert_eq!(pretty_print(&back), text);
    }
}

#[test]
fn example_walk_parses_to_one_loop() {
    let text = "pvar x;\nrvar r ~ table{-1:1/2, 1:1/2};\nwhile x >= 1 do x := x + r od\n";
    let prog = parse(text).unwrap();
    let StmtKind::While { cond, .. } = &prog.body.kind else { panic!("{:?}", prog.body) };
    let Guard::Lit(lit) = cond else { panic!() };
    assert_eq!(lit.rel, Rel::Ge);
    assert_eq!(lit.rhs, Poly::constant(1));
    assert_eq!(pretty_print(&prog).lines().last().unwrap(), "while x >= 1 do x := x + r od");
}

#[test]
fn parabola_body_is_identity_increment() {
    let l = SingleWhileLoop::from_source(
        "pvar x; pvar y; rvar r1 ~ table{0:1/2, 2:1/2}; rvar r2 ~ table{0:1/2, 2:1/2};
         while y >= x * x + 1 do x := x + r1; y := y + r2 od",
    )
    .unwrap();
    let a = l.incremental.clone().expect("incremental");
    assert_eq!(a, vec![vec![1, 0], vec![0, 1]]);
    let joint = l.sampling.joint_support().unwrap();
    for x in -2..=2 {
        for y in -2..=2 {
            for (rv, _) in &joint {
                let f = l.apply(&[x, y], rv).unwrap();
                let expected: Vec<i64> =
                    [x, y].iter().zip(&a).map(|(p, row)| p + row.iter().zip(rv).map(|(c, r)| c * r).sum::<i64>()).collect();
                assert_eq!(f, expected, "pv = ({x}, {y}), rv = {rv:?}");
            }
        }
    }
}

#[test]
fn isqrt_body_is_not_incremental() {
    let l = SingleWhileLoop::from_source(
        "pvar x; rvar r ~ table{-1:1/2, 1:1/2}; while x >= 1 do x := x + r * isqrt(x) od",
    )
    .unwrap();
    assert!(l.incremental.is_none());
    assert_eq!(l.apply(&[9], &[1]).unwrap(), vec![12]);
    assert_eq!(l.apply(&[10], &[-1]).unwrap(), vec![7]);
}

#[test]
fn single_walk_increment_matrix() {
    let l = SingleWhileLoop::from_source("pvar x; rvar r ~ point(-1); while x >= 1 do x := x + r od").unwrap();
    assert_eq!(l.incremental, Some(vec![vec![1]]));
    assert_eq!(l.apply(&[3], &[-1]).unwrap(), vec![2]);
}

#[test]
fn errors_carry_locations() {
    let e = parse("pvar x;\nwhile x >= 1 do x := x +* 1 od").unwrap_err();
    assert_eq!(e.location(), Some((2, 25)));
    let e = parse("pvar x; rvar r ~ point(1);\nwhile r >= 1 do x := x od").unwrap_err();
    assert!(matches!(e, LangError::SamplingVarInGuard { line: 2, .. }), "{e:?}");
    let prog = parse("pvar x; rvar r ~ point(1);\nwhile x >= 1 do while x >= 2 do x := x + r od od").unwrap();
    assert!(matches!(normalize(&prog), Err(LangError::NestedLoop { .. })));
}

#[test]
fn normalize_splits_components() {
    let prog = parse("pvar x; pvar n; rvar r ~ point(-1); n := 3; while x >= 1 do x := x + r od; n := n + 1").unwrap();
    let norm = normalize(&prog).unwrap();
    assert_eq!(norm.loops().count(), 1);
    assert_eq!(norm.components.len(), 3);
}
