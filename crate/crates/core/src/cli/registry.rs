//! Built-in example systems.

use super::config::{SystemConfig, SystemKind, TransitionSpec, Value};
use crate::regularize::PhiKind;

pub struct Example {
    pub name: &'static str,
    pub description: &'static str,
    /// What the example is expected to show.
    pub expected: &'static str,
    pub config: fn() -> SystemConfig,
}

fn nums(v: &[f64]) -> Value {
    Value::List(v.iter().map(|x| Value::Num(*x)).collect())
}

fn saddle() -> SystemConfig {
    SystemConfig::piecewise(&["0", "-1"], &["x1", "-x2+1"], "x2")
        .with_experiment("range", Value::Str("x1=-1:1".into()))
        .with_experiment("n", Value::Num(201.0))
        .with_experiment("at", nums(&[0.0, 0.0]))
        .with_experiment("deltas", nums(&[0.1, 0.01, 0.001]))
        .with_experiment("x0", nums(&[0.5, 1.0]))
        .with_experiment("t1", Value::Num(2.0))
}

fn spiral() -> SystemConfig {
    SystemConfig::piecewise(
        &["0", "2*x1+2*x2*(sqrt(x1^2+x2^2)-1)", "-1"],
        &["-2*x2+2*x1*(sqrt(x1^2+x2^2)-1)", "0", "1"],
        "x3",
    )
    .with_experiment("range", Value::Str("x1=-2:2".into()))
    .with_experiment("n", Value::Num(201.0))
    .with_experiment("at", nums(&[0.0, 0.0, 0.0]))
    .with_experiment("deltas", nums(&[0.1, 0.01, 0.001]))
    .with_experiment("x0", nums(&[0.1, 0.0, 0.5]))
    .with_experiment("t1", Value::Num(5.0))
}

fn exblow() -> SystemConfig {
    let mut c = SystemConfig::piecewise(&["x2-1", "-1"], &["x2", "1"], "x1")
        .with_experiment("range", Value::Str("x2=-1:2".into()))
        .with_experiment("n", Value::Num(300.0))
        .with_experiment("x0", nums(&[-0.5, 0.2]))
        .with_experiment("t1", Value::Num(20.0));
    c.transition = TransitionSpec::Psi {
        a0: 0.0,
        b0: -2.0,
        coord: 2,
        amp: 1.0,
        width: 1.0,
    };
    c
}

fn ex2() -> SystemConfig {
    SystemConfig {
        kind: SystemKind::Nsff,
        dim: 2,
        h: "x1".into(),
        xplus: vec!["x2-1".into(), "-1+eps".into()],
        xminus: vec!["x1+x2+eps".into(), "x2+1-eps".into()],
        xtilde: vec![],
        fast: Some("y".into()),
        transition: TransitionSpec::Phi(PhiKind::Cubic),
        experiment: Default::default(),
    }
    .with_experiment("range", Value::Str("x2=-1:2".into()))
    .with_experiment("n", Value::Num(300.0))
    .with_experiment("at", nums(&[0.0, (5f64.sqrt() - 1.0) / 2.0, 0.0]))
    .with_experiment("eps", nums(&[0.1, 0.05, 0.01]))
}

fn ex1() -> SystemConfig {
    SystemConfig {
        kind: SystemKind::Ccomb,
        dim: 2,
        h: "x1".into(),
        xplus: vec!["x2-1+eps".into(), "-1+eps".into()],
        xminus: vec!["x2+eps".into(), "1+eps".into()],
        xtilde: vec!["lambda^2*(x2+eps)-(lambda+1)/2".into(), "lambda^2-lambda-1+eps".into()],
        fast: Some("y".into()),
        transition: TransitionSpec::Phi(PhiKind::Cubic),
        experiment: Default::default(),
    }
    .with_experiment("range", Value::Str("x2=0.05:3".into()))
    .with_experiment("n", Value::Num(60.0))
    .with_experiment("at", nums(&[0.0, 0.5, 0.0]))
    .with_experiment("eps", nums(&[0.1, 0.01]))
    .with_experiment("branch", Value::Num(0.0))
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "ex-s2-1",
        description: "planar Filippov system with a saddle pseudo-equilibrium at the origin",
        expected: "sliding field (x1/2, 0) on x1 in (-1, 1); regularized equilibria Q = (0, y0) are saddles with eigenvalue 1/2",
        config: saddle,
    },
    Example {
        name: "ex-s2-2",
        description: "three-dimensional system whose sliding field has the cycle x1^2 + x2^2 = 1",
        expected: "sliding field spirals around the origin; the unit circle is a periodic orbit that persists under regularization",
        config: spiral,
    },
    Example {
        name: "ex-exblow",
        description: "planar system with sliding region 0 < x2 < 1 and a non-monotone transition",
        expected: "attracting sliding on 0 < x2 < 1, tangencies at x2 = 0 and x2 = 1, sliding field (0, 1 - 2 x2)",
        config: exblow,
    },
    Example {
        name: "ex-ex2",
        description: "non-smooth slow-fast system with fast variable y and H = y",
        expected: "equilibria p(eps) = (0, (-1 + 2 eps + sqrt(5 - 12 eps + 8 eps^2))/2, 0)",
        config: ex2,
    },
    Example {
        name: "ex-ex1",
        description: "quadratic continuous combination with one or two c-sliding fields",
        expected: "branches lambda = (1 +- sqrt(1 + 8 x2))/(4 x2); c-sliding equilibrium x2 = 1/2",
        config: ex1,
    },
];

pub fn find(name: &str) -> Option<&'static Example> {
    EXAMPLES.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::super::config::load_str;
    use super::*;

    #[test]
    fn every_example_round_trips() {
        for ex in EXAMPLES {
            let c = (ex.config)();
            c.build().unwrap();
            c.transition.build().unwrap();
            assert_eq!(load_str(&c.to_text()).unwrap(), c, "{}", ex.name);
        }
    }
}
