//! Robustness sugar: `robust f at x̂ eps ε delta δ` expands to a universally
//! quantified first-order formula.

use super::ast::*;
use crate::rational::Rational;
use num_traits::Signed;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DesugarError {
    #[error("eps must be positive")]
    NonPositiveEps,
    #[error("delta must be positive")]
    NonPositiveDelta,
    #[error("dimension mismatch: center has {got} coordinates, network {net} expects {expected}")]
    DimensionMismatch {
        net: String,
        expected: usize,
        got: usize,
    },
}

/// Builds `∀x. ‖x̂ − x‖ ≤ ε ⇒ ‖f(x̂) − f(x)‖ ≤ δ`.
///
/// Both norms quantify over the box `[x̂ − ε, x̂ + ε]`. For `Linf` the box is
/// exactly the ε-ball, so the antecedent is dropped. For `L1` the box is a
/// superset and the antecedent stays as an implication in the body.
/// Bound variable names avoid everything in `reserved`.
pub fn desugar_robustness(
    net: &NetworkDecl,
    center: &[Rational],
    eps: &Rational,
    delta: &Rational,
    norm: NormKind,
    reserved: &[&str],
) -> Result<Formula, DesugarError> {
    if !eps.is_positive() {
        return Err(DesugarError::NonPositiveEps);
    }
    if !delta.is_positive() {
        return Err(DesugarError::NonPositiveDelta);
    }
    if center.len() != net.input_dim {
        return Err(DesugarError::DimensionMismatch {
            net: net.name.clone(),
            expected: net.input_dim,
            got: center.len(),
        });
    }

    let vars: Vec<String> = (0..center.len())
        .map(|i| {
            let mut name = format!("x{i}");
            while reserved.contains(&name.as_str()) {
                name.push('_');
            }
            name
        })
        .collect();
    let bounds = center.iter().map(|c| (c - eps, c + eps)).collect();

    let center_terms: Vec<Term> = center.iter().cloned().map(Term::Const).collect();
    let var_terms: Vec<Term> = vars.iter().map(Term::var).collect();
    let outputs = |args: &[Term]| -> Vec<Term> {
        (0..net.output_dim)
            .map(|k| Term::net(net.name.clone(), args.to_vec(), k))
            .collect()
    };
    let consequent = Formula::Atom(Atom::new(
        Term::NormDiff {
            norm,
            left: outputs(&center_terms),
            right: outputs(&var_terms),
        },
        Cmp::Le,
        Term::Const(delta.clone()),
    ));

    let body = match norm {
        NormKind::Linf => consequent,
        NormKind::L1 => Formula::implies(
            Formula::Atom(Atom::new(
                Term::NormDiff {
                    norm,
                    left: center_terms.clone(),
                    right: var_terms.clone(),
                },
                Cmp::Le,
                Term::Const(eps.clone()),
            )),
            consequent,
        ),
    };

    Ok(Formula::forall(
        vars,
        QuantDomain {
            bounds,
            side_constraints: Vec::new(),
        },
        body,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn decl(m: usize, n: usize) -> NetworkDecl {
        NetworkDecl {
            name: "f".into(),
            input_dim: m,
            output_dim: n,
            span: Span::default(),
        }
    }

    #[test]
    fn linf_absorbs_antecedent_into_box() {
        let f = desugar_robustness(
            &decl(2, 1),
            &[int(0), int(0)],
            &ratio(1, 10),
            &ratio(1, 2),
            NormKind::Linf,
            &[],
        )
        .unwrap();
        let Formula::Forall(q) = f else { panic!() };
        assert_eq!(q.domain.bounds, vec![(ratio(-1, 10), ratio(1, 10)); 2]);
        assert!(q.domain.side_constraints.is_empty());
        let Formula::Atom(a) = q.body.as_ref() else {
            panic!("antecedent should be absorbed")
        };
        assert_eq!(a.cmp, Cmp::Le);
        assert_eq!(a.rhs, Term::Const(ratio(1, 2)));
        assert!(matches!(&a.lhs, Term::NormDiff { norm: NormKind::Linf, left, right }
            if left.len() == 1 && right.len() == 1));
    }

    #[test]
    fn l1_keeps_implication() {
        let f = desugar_robustness(&decl(1, 1), &[int(3)], &int(1), &int(1), NormKind::L1, &[]).unwrap();
        let Formula::Forall(q) = f else { panic!() };
        assert!(matches!(q.body.as_ref(), Formula::Implies(_, _)));
    }

    #[test]
    fn rejects_degenerate_ball_and_bad_dims() {
        let d = decl(2, 1);
        let c = [int(0), int(0)];
        assert_eq!(
            desugar_robustness(&d, &c, &int(0), &int(1), NormKind::Linf, &[]).unwrap_err().to_string(),
            "eps must be positive"
        );
        assert_eq!(
            desugar_robustness(&d, &c, &int(1), &int(-1), NormKind::Linf, &[]),
            Err(DesugarError::NonPositiveDelta)
        );
        assert!(matches!(
            desugar_robustness(&d, &[int(0)], &int(1), &int(1), NormKind::Linf, &[]),
            Err(DesugarError::DimensionMismatch { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn fresh_names_avoid_reserved() {
        let f = desugar_robustness(&decl(1, 1), &[int(0)], &int(1), &int(1), NormKind::Linf, &["x0"])
            .unwrap();
        let Formula::Forall(q) = f else { panic!() };
        assert_eq!(q.vars, vec!["x0_"]);
    }
}
