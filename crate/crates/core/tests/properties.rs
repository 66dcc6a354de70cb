use std::sync::OnceLock;

use proptest::prelude::*;

use weakfix_core::condition::{check_condition, condition_sides, SamplePlan};
use weakfix_core::expr::{BinOp, CmpOp, Func};
use weakfix_core::lambda::{analyze_lambda, DerivedSequence, LambdaAnalysis, LambdaReading, SequenceVariant};
use weakfix_core::solver::power_scenario;
use weakfix_core::{builtin, Bindings, Carrier, ConditionVariant, Expr, Scenario, Space, Var};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(m, e)| Expr::Num(m as f64 / 10f64.powi(e as i32))),
        prop::sample::select(vec![Var::X, Var::Y, Var::I, Var::J, Var::N, Var::T]).prop_map(Expr::Var),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        let op = prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]);
        let unary = prop::sample::select(vec![Func::Sqrt, Func::Abs, Func::Exp, Func::Log]);
        let cmp = prop::sample::select(vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq]);
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone())
                .prop_map(|(o, a, b)| Expr::Binary(o, Box::new(a), Box::new(b))),
            (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (prop::bool::ANY, inner.clone(), inner.clone()).prop_map(|(min, a, b)| {
                Expr::Call(if min { Func::Min } else { Func::Max }, vec![a, b])
            }),
            (inner.clone(), cmp, inner.clone(), inner.clone(), inner).prop_map(
                |(l, op, r, t, o)| Expr::If {
                    lhs: Box::new(l),
                    op,
                    rhs: Box::new(r),
                    then: Box::new(t),
                    otherwise: Box::new(o),
                }
            ),
        ]
    })
}

fn builtins() -> &'static [Scenario] {
    static CELL: OnceLock<Vec<Scenario>> = OnceLock::new();
    CELL.get_or_init(|| {
        ["example-1", "example-2", "example-3"].iter().map(|n| builtin(n).unwrap()).collect()
    })
}

fn bindings(x: f64, y: f64) -> Bindings {
    Bindings::new()
        .with(Var::X, x)
        .with(Var::Y, y)
        .with(Var::I, 2.0)
        .with(Var::J, 3.0)
        .with(Var::N, 5.0)
        .with(Var::T, 0.5)
}

fn same_value(a: weakfix_core::Result<f64>, b: weakfix_core::Result<f64>) -> bool {
    match (a, b) {
        (Ok(p), Ok(q)) => p.to_bits() == q.to_bits() || (p.is_nan() && q.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_expressions_parse_back(e in expr(), x in 0.0..2.0f64, y in 0.0..2.0f64) {
        let text = e.to_string();
        let back = Expr::parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        prop_assert!(same_value(e.eval(&bindings(x, y)), back.eval(&bindings(x, y))), "{}", text);
    }

    #[test]
    fn symmetrization_is_symmetric_and_settled(
        x in 0.0..4.0f64,
        y in 0.0..4.0f64,
        w in 0.1..3.0f64,
    ) {
        let carrier = Carrier::new(0.0, 4.0).unwrap();
        let quasi = Space::new(carrier, Expr::parse(&format!("max(y - x, 0) + {w} * max(x - y, 0)")).unwrap(), 1.0, 3, false).unwrap();
        let sym = quasi.symmetrize().unwrap();
        let d = sym.distance(x, y).unwrap();
        prop_assert_eq!(d, sym.distance(y, x).unwrap());
        prop_assert_eq!(d, sym.sym_distance(x, y).unwrap());
        prop_assert_eq!(d, quasi.sym_distance(x, y).unwrap());
        prop_assert_eq!(d, quasi.distance(x, y).unwrap().max(quasi.distance(y, x).unwrap()));
    }

    #[test]
    fn lambda_certificates_bound_every_later_average(
        head in prop::collection::vec(0.0..3.0f64, 1..6),
        ratio in 0.05..0.95f64,
        scale in 0.01..2.0f64,
    ) {
        let mut values = head;
        let mut v = scale;
        while values.len() < 64 {
            values.push(v);
            v *= ratio;
        }
        let seq = DerivedSequence::from_values(values.clone(), SequenceVariant::Plain, 1.0);
        if let LambdaAnalysis::Certified(cert) = analyze_lambda(&seq, LambdaReading::RawValues) {
            prop_assert!(cert.lambda < 1.0);
            let mut sum = 0.0;
            for (k, v) in values.iter().enumerate() {
                sum += v;
                let l = k + 1;
                if l >= cert.n_lambda {
                    prop_assert!(sum / l as f64 <= cert.lambda + 1e-12, "L = {} average {}", l, sum / l as f64);
                }
            }
            // n(λ) is the first admissible start.
            if cert.n_lambda > 1 {
                let mut sum = 0.0;
                let late_max = values.iter().enumerate().map(|(k, v)| { sum += v; (k + 1, sum / (k + 1) as f64) })
                    .filter(|&(l, _)| l >= cert.n_lambda - 1)
                    .map(|(_, a)| a)
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(late_max >= 1.0);
            }
        }
    }

    #[test]
    fn asymmetric_forms_agree_with_kannan_on_symmetric_spaces(
        x in 0.0..1.0f64,
        y in 0.0..1.0f64,
        i in 1u64..6,
        j in 1u64..6,
        which in 0usize..3,
    ) {
        let sc = &builtins()[which];
        for (asym, base) in [("ASYM_KC", "KC_noPsi"), ("ASYM_KC3", "KC3_noPsi")] {
            let a = condition_sides(sc, asym.parse().unwrap(), x, y, i, j);
            let b = condition_sides(sc, base.parse().unwrap(), x, y, i, j);
            match (a, b) {
                (Ok(p), Ok(q)) => {
                    prop_assert_eq!(p.lhs.to_bits(), q.lhs.to_bits());
                    prop_assert_eq!(p.rhs.to_bits(), q.rhs.to_bits());
                }
                (Err(_), Err(_)) => {}
                (p, q) => prop_assert!(false, "{:?} vs {:?}", p, q),
            }
        }
    }

    #[test]
    fn power_variant_matches_composed_family(
        x in 0.0..1.0f64,
        y in 0.0..1.0f64,
        i in 1u64..5,
        j in 1u64..5,
        p in 1u32..5,
    ) {
        let sc = &builtins()[0];
        let composed = power_scenario(sc, p).unwrap();
        let power: ConditionVariant = format!("POWER_KC3:{p}").parse().unwrap();
        let a = condition_sides(sc, power, x, y, i, j).unwrap();
        let b = condition_sides(&composed, "KC3".parse().unwrap(), x, y, i, j).unwrap();
        prop_assert_eq!(a.lhs.to_bits(), b.lhs.to_bits());
        prop_assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn condition_reports_ignore_thread_count(seed in 0u64..1_000, which in 0usize..3) {
        let sc = &builtins()[which];
        let plan = SamplePlan::grid(sc.space.carrier().grid(9), 4, true, 300, seed);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| check_condition(sc, sc.variant, &plan, 1e-9).unwrap())
        };
        let one = run(1);
        prop_assert_eq!(&one, &run(3));
        prop_assert_eq!(&one, &run(8));
    }
}
