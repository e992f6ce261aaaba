//! Random expressions rendered to text and evaluated directly from the
//! generating tree, compared against the parser/evaluator.

use latrel::mathcore::RandomSource;
use latrel::problem::{eval_limit_state, parse_limit_state};

const DIM: usize = 4;

enum Tree {
    Num(f64),
    Var(usize),
    Neg(Box<Tree>),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Square(Box<Tree>),
    Cube(Box<Tree>),
    Func(&'static str, Box<Tree>),
    /// sum over x_lo..=x_hi of coef * x_i + i
    Sum(usize, usize, f64),
}

fn gen(rng: &mut RandomSource, depth: u32) -> Tree {
    let leaf = depth == 0 || rng.bernoulli(0.25);
    if leaf {
        return match rng.index(3) {
            0 => Tree::Num((rng.uniform_range(-5.0, 5.0) * 100.0).round() / 100.0),
            1 => Tree::Var(rng.index(DIM)),
            _ => {
                let lo = 1 + rng.index(DIM);
                let hi = lo + rng.index(DIM + 1 - lo);
                Tree::Sum(lo, hi, (rng.uniform_range(-3.0, 3.0) * 10.0).round() / 10.0)
            }
        };
    }
    let kind = rng.index(9);
    let pick = rng.index(6);
    let mut sub = || Box::new(gen(rng, depth - 1));
    match kind {
        0 => Tree::Neg(sub()),
        1 => Tree::Add(sub(), sub()),
        2 => Tree::Sub(sub(), sub()),
        3 => Tree::Mul(sub(), sub()),
        4 => Tree::Div(sub(), sub()),
        5 => Tree::Square(sub()),
        6 => Tree::Cube(sub()),
        7 => Tree::Func(["cos", "sin", "abs"][pick % 3], sub()),
        _ => Tree::Func(
            ["exp", "sqrt"][pick % 2],
            Box::new(Tree::Func("abs", sub())),
        ),
    }
}

fn num(v: f64) -> String {
    // negative literals are written as a unary minus applied to a positive literal
    if v < 0.0 {
        format!("(-{})", -v)
    } else {
        format!("{v}")
    }
}

fn render(t: &Tree) -> String {
    match t {
        Tree::Num(v) => num(*v),
        Tree::Var(i) => format!("x{}", i + 1),
        Tree::Neg(a) => format!("-({})", render(a)),
        Tree::Add(a, b) => format!("({} + {})", render(a), render(b)),
        Tree::Sub(a, b) => format!("({} - {})", render(a), render(b)),
        Tree::Mul(a, b) => format!("({} * {})", render(a), render(b)),
        Tree::Div(a, b) => format!("({} / {})", render(a), render(b)),
        Tree::Square(a) => format!("({})^2", render(a)),
        Tree::Cube(a) => format!("({})^3", render(a)),
        Tree::Func(f, a) => format!("{f}({})", render(a)),
        Tree::Sum(lo, hi, c) => format!("sum(i = {lo}..{hi}, {} * x_i + i)", num(*c)),
    }
}

/// `None` on division by zero.
fn reference(t: &Tree, x: &[f64]) -> Option<f64> {
    Some(match t {
        Tree::Num(v) => *v,
        Tree::Var(i) => x[*i],
        Tree::Neg(a) => -reference(a, x)?,
        Tree::Add(a, b) => reference(a, x)? + reference(b, x)?,
        Tree::Sub(a, b) => reference(a, x)? - reference(b, x)?,
        Tree::Mul(a, b) => reference(a, x)? * reference(b, x)?,
        Tree::Div(a, b) => {
            let (l, r) = (reference(a, x)?, reference(b, x)?);
            if r == 0.0 {
                return None;
            }
            l / r
        }
        Tree::Square(a) => {
            let v = reference(a, x)?;
            v * v
        }
        Tree::Cube(a) => {
            let v = reference(a, x)?;
            v * v * v
        }
        Tree::Func(f, a) => {
            let v = reference(a, x)?;
            match *f {
                "cos" => v.cos(),
                "sin" => v.sin(),
                "abs" => v.abs(),
                "exp" => v.exp(),
                "sqrt" => v.sqrt(),
                _ => unreachable!(),
            }
        }
        Tree::Sum(lo, hi, c) => (*lo..=*hi).map(|i| c * x[i - 1] + i as f64).sum(),
    })
}

#[test]
fn parser_agrees_with_tree_evaluation() {
    let mut rng = RandomSource::new(2024);
    let mut compared = 0;
    for case in 0..1000 {
        let tree = gen(&mut rng, 1 + (case % 5) as u32);
        let text = render(&tree);
        let expr = parse_limit_state(&text, DIM).unwrap_or_else(|e| panic!("{text}: {e}"));
        let x: Vec<f64> = (0..DIM).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        match (reference(&tree, &x), eval_limit_state(&expr, &x)) {
            (Some(want), Ok(got)) => {
                assert!(
                    (want - got).abs() <= 1e-12 * (1.0 + want.abs()),
                    "{text} at {x:?}: {got} vs {want}"
                );
                compared += 1;
            }
            (Some(want), Err(e)) => assert!(!want.is_finite(), "{text}: {e} but reference {want}"),
            (None, res) => assert!(res.is_err(), "{text}: expected division error"),
        }
    }
    assert!(compared > 900, "only {compared} finite comparisons");
}

#[test]
fn unary_minus_binds_looser_than_power() {
    let e = parse_limit_state("-x1^2", 1).unwrap();
    assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
    let e = parse_limit_state("2^3^2", 1).unwrap();
    assert_eq!(e.eval(&[0.0]).unwrap(), 512.0);
}
