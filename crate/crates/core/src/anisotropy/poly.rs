//! Sparse multivariate polynomials with real coefficients, enough to carry
//! homogeneous harmonics and their partial derivatives.

use crate::linalg::MAXD;
use crate::scalar::Real;

type Exps = [u8; MAXD];

#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    pub vars: usize,
    pub terms: Vec<(Exps, T)>,
}

impl<T: Real> Poly<T> {
    pub fn zero(vars: usize) -> Self {
        Poly { vars, terms: Vec::new() }
    }

    pub fn constant(vars: usize, c: T) -> Self {
        Poly { vars, terms: vec![([0; MAXD], c)] }
    }

    pub fn var(vars: usize, i: usize) -> Self {
        let mut e = [0; MAXD];
        e[i] = 1;
        Poly { vars, terms: vec![(e, T::one())] }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(e, _)| e.iter().map(|&k| k as usize).sum()).max().unwrap_or(0)
    }

    fn normalize(mut self) -> Self {
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Exps, T)> = Vec::with_capacity(self.terms.len());
        for (e, c) in self.terms {
            match out.last_mut() {
                Some((le, lc)) if *le == e => *lc += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|(_, c)| *c != T::zero());
        Poly { vars: self.vars, terms: out }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        Poly { vars: self.vars, terms }.normalize()
    }

    pub fn scale(&self, c: T) -> Self {
        Poly { vars: self.vars, terms: self.terms.iter().map(|&(e, v)| (e, v * c)).collect() }.normalize()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let mut e = [0; MAXD];
                for i in 0..MAXD {
                    e[i] = ea[i] + eb[i];
                }
                terms.push((e, *ca * *cb));
            }
        }
        Poly { vars: self.vars, terms }.normalize()
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::constant(self.vars, T::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn deriv(&self, i: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[i] > 0)
            .map(|&(e, c)| {
                let mut e2 = e;
                e2[i] -= 1;
                (e2, c * T::from_count(e[i] as usize))
            })
            .collect();
        Poly { vars: self.vars, terms }.normalize()
    }

    pub fn eval(&self, x: &[T]) -> T {
        let deg = self.degree();
        let mut pw = [[T::one(); 16]; MAXD];
        for v in 0..self.vars {
            for k in 1..=deg.min(15) {
                pw[v][k] = pw[v][k - 1] * x[v];
            }
        }
        let mut s = T::zero();
        for (e, c) in &self.terms {
            let mut t = *c;
            for v in 0..self.vars {
                if e[v] > 0 {
                    t *= pw[v][e[v] as usize];
                }
            }
            s += t;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivative() {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        let p = x.mul(&x).mul(&y).add(&y.scale(3.0)); // x²y + 3y
        assert_eq!(p.eval(&[2.0, 5.0, 0.0]), 35.0);
        assert_eq!(p.deriv(0).eval(&[2.0, 5.0, 0.0]), 20.0);
        assert_eq!(p.deriv(1).eval(&[2.0, 5.0, 0.0]), 7.0);
        assert_eq!(p.degree(), 3);
        assert!(p.sub_check());
    }

    impl Poly<f64> {
        fn sub_check(&self) -> bool {
            self.add(&self.scale(-1.0)).terms.is_empty()
        }
    }
}
