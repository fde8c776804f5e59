use serde::Serialize;

use super::words::{Letter, Word};
use crate::error::{Error, Result};

/// One summand of a word's contribution.
///
/// Variables are numbered `1..=m` with `t_1 > t_2 > … > t_m`; variable `i` is
/// created by letter `w_{m-i+1}`. Vectors are stored 0-based by variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTerm {
    pub coefficient: f64,
    /// `a_i`: 2 for `J`-created variables, 1 for `I`-created ones.
    pub exponents: Vec<u8>,
    /// `α(i)` (1-based) for `I`-created variables: the kernel factor is
    /// `φ(t_{α(i)} - t_i)`.
    pub alpha: Vec<Option<usize>>,
}

/// Applies the operators of `w` right to left to the constant 1 at power `N`.
pub fn expand_word(w: &Word, n: usize, sigmas: (f64, f64, f64)) -> Result<Vec<MomentTerm>> {
    if w.length() != n {
        return Err(Error::Contract(format!(
            "word {w} has length {} but N = {n}",
            w.length()
        )));
    }
    let (sp, sv, rho) = sigmas;
    let mut terms = vec![MomentTerm {
        coefficient: 1.0,
        exponents: Vec::new(),
        alpha: Vec::new(),
    }];
    let mut power = n;
    for &letter in w.letters().iter().rev() {
        let k = power as f64;
        let mut next = Vec::new();
        for t in terms {
            match letter {
                Letter::J => {
                    let mut t = t;
                    t.coefficient *= sp * sp * k * (k - 1.0) / 2.0;
                    t.exponents.push(2);
                    t.alpha.push(None);
                    next.push(t);
                }
                Letter::I => {
                    for j in 0..t.exponents.len() {
                        let mut nt = t.clone();
                        nt.coefficient *= rho * sp * sv * k * f64::from(t.exponents[j]);
                        nt.exponents.push(1);
                        nt.alpha.push(Some(j + 1));
                        next.push(nt);
                    }
                }
            }
        }
        terms = next;
        power -= letter.weight();
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::words::enumerate_words;
    use std::collections::BTreeSet;

    const S: (f64, f64, f64) = (1.3, 0.4, -0.6);

    #[test]
    fn hand_expansions() {
        let (sp, sv, rho) = S;
        let j = expand_word(&Word::parse("J").unwrap(), 2, S).unwrap();
        assert_eq!(j.len(), 1);
        assert!((j[0].coefficient - sp * sp).abs() < 1e-15);
        assert_eq!(j[0].exponents, vec![2]);

        let ij = expand_word(&Word::parse("IJ").unwrap(), 3, S).unwrap();
        assert_eq!(ij.len(), 1);
        assert!((ij[0].coefficient - 6.0 * rho * sp.powi(3) * sv).abs() < 1e-14);
        assert_eq!(ij[0].alpha, vec![None, Some(1)]);

        let jj = expand_word(&Word::parse("JJ").unwrap(), 4, S).unwrap();
        assert!((jj[0].coefficient - 6.0 * sp.powi(4)).abs() < 1e-13);

        let iij = expand_word(&Word::parse("IIJ").unwrap(), 4, S).unwrap();
        let base = rho * rho * sp.powi(4) * sv * sv;
        assert_eq!(iij.len(), 2);
        assert!((iij[0].coefficient - 48.0 * base).abs() < 1e-13);
        assert_eq!(iij[0].alpha, vec![None, Some(1), Some(1)]);
        assert!((iij[1].coefficient - 24.0 * base).abs() < 1e-13);
        assert_eq!(iij[1].alpha, vec![None, Some(1), Some(2)]);
        assert_eq!(iij[1].exponents, vec![2, 1, 1]);
    }

    #[test]
    fn wrong_length_is_contract_error() {
        assert!(matches!(
            expand_word(&Word::parse("IJ").unwrap(), 4, S),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn zero_correlation_kills_i_words() {
        for n in 2..=6 {
            for w in enumerate_words(n).unwrap() {
                let has_i = w.letters().contains(&Letter::I);
                for t in expand_word(&w, n, (1.0, 0.5, 0.0)).unwrap() {
                    assert_eq!(t.coefficient == 0.0, has_i, "{w}");
                }
            }
        }
    }

    /// Closed-form structure: exponent 2 exactly at the positions of J letters
    /// (variable i ↔ letter m-i+1) and α ranging over Π_{I-vars} {1..i-1}.
    #[test]
    fn structure_matches_closed_form() {
        for n in 2..=8 {
            for w in enumerate_words(n)
                .unwrap()
                .into_iter()
                .filter(|w| w.size() <= 5)
            {
                let m = w.size();
                let terms = expand_word(&w, w.length(), S).unwrap();
                let expected_exp: Vec<u8> = (1..=m)
                    .map(|i| {
                        if w.letters()[m - i] == Letter::J {
                            2
                        } else {
                            1
                        }
                    })
                    .collect();
                let mut admissible: BTreeSet<Vec<Option<usize>>> = BTreeSet::new();
                admissible.insert(Vec::new());
                for i in 1..=m {
                    let choices: Vec<Option<usize>> = if expected_exp[i - 1] == 2 {
                        vec![None]
                    } else {
                        (1..i).map(Some).collect()
                    };
                    admissible = admissible
                        .into_iter()
                        .flat_map(|p| {
                            choices.iter().map(move |c| {
                                let mut q = p.clone();
                                q.push(*c);
                                q
                            })
                        })
                        .collect();
                }
                let got: BTreeSet<_> = terms.iter().map(|t| t.alpha.clone()).collect();
                assert_eq!(got, admissible, "{w}");
                assert_eq!(terms.len(), admissible.len());
                for t in &terms {
                    assert_eq!(t.exponents, expected_exp);
                    let n_kernel = t.alpha.iter().filter(|a| a.is_some()).count();
                    let n_i = w.letters().iter().filter(|l| **l == Letter::I).count();
                    assert_eq!(n_kernel, n_i);
                }
            }
        }
    }
}
