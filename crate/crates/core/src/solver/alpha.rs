use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaBoundInputs {
    /// Total-variation radius of the quantizer.
    pub epsilon: Rational,
    /// Largest stage cost.
    pub cost_sup: Rational,
    /// Lipschitz constant of the quantized value functions.
    pub lipschitz: Rational,
    /// `next_sup[t]`: sup-norm of the stage-`t+1` quantized value function,
    /// zero at `t = T`.
    pub next_sup: Vec<Rational>,
}

impl AlphaBoundInputs {
    pub fn to_json(&self) -> Value {
        json!({
            "epsilon": self.epsilon.to_string(),
            "cost_sup": self.cost_sup.to_string(),
            "lipschitz": self.lipschitz.to_string(),
            "next_sup": self.next_sup.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        })
    }
}

/// `alpha[t] = 2 (eps |c| + 3 eps |J[t+1]| + 3 eps L + alpha[t+1])` with
/// `alpha[T+1] = 0`; returned indexed by `t`, so `alpha[0]` comes first.
pub fn alpha_bound(inputs: &AlphaBoundInputs, horizon: usize) -> Result<Vec<Rational>> {
    if inputs.next_sup.len() != horizon + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} sup-norms for horizon {horizon}",
            inputs.next_sup.len()
        )));
    }
    let negative = [&inputs.epsilon, &inputs.cost_sup, &inputs.lipschitz]
        .into_iter()
        .chain(&inputs.next_sup)
        .any(|v| v.is_negative());
    if negative {
        return Err(Error::OutOfRange("bound inputs must be non-negative".into()));
    }
    let two = Rational::from_integer(2);
    let three = Rational::from_integer(3);
    let eps = &inputs.epsilon;
    let mut alphas = vec![Rational::zero(); horizon + 1];
    let mut next = Rational::zero();
    for t in (0..=horizon).rev() {
        let inner = eps * &inputs.cost_sup
            + &three * eps * &inputs.next_sup[t]
            + &three * eps * &inputs.lipschitz
            + &next;
        next = &two * &inner;
        alphas[t] = next.clone();
    }
    Ok(alphas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn exact_lattice_gives_zero() {
        let inputs = AlphaBoundInputs {
            epsilon: Rational::zero(),
            cost_sup: r(9, 1),
            lipschitz: r(4, 1),
            next_sup: vec![r(7, 1), r(3, 1), Rational::zero()],
        };
        assert!(alpha_bound(&inputs, 2).unwrap().iter().all(Rational::is_zero));
    }

    #[test]
    fn single_unrolling() {
        let inputs = AlphaBoundInputs {
            epsilon: r(1, 4),
            cost_sup: r(1, 1),
            lipschitz: Rational::zero(),
            next_sup: vec![Rational::zero()],
        };
        assert_eq!(alpha_bound(&inputs, 0).unwrap(), vec![r(1, 2)]);
    }

    #[test]
    fn two_stages() {
        let inputs = AlphaBoundInputs {
            epsilon: r(1, 2),
            cost_sup: r(2, 1),
            lipschitz: r(1, 1),
            next_sup: vec![r(4, 1), Rational::zero()],
        };
        // alpha[1] = 2 (1 + 0 + 3/2) = 5; alpha[0] = 2 (1 + 6 + 3/2 + 5) = 27.
        assert_eq!(alpha_bound(&inputs, 1).unwrap(), vec![r(27, 1), r(5, 1)]);
        assert!(alpha_bound(&inputs, 2).is_err());
    }
}
