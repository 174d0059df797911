use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{DiophantineError, EstimateMethod, IrrationalityEstimate, Record};

/// Rational enclosure of a real number at a requested number of digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Approx {
    Exact(BigRational),
    /// `lo <= x <= hi`.
    Interval(BigRational, BigRational),
}

/// A real number that can be enclosed to any number of decimal digits up to
/// `max_digits`.
pub trait HighPrecisionReal {
    fn approx(&self, digits: u32) -> Approx;
    fn max_digits(&self) -> u32 {
        u32::MAX
    }
    fn describe(&self) -> String;
}

/// Exact rational `p/q`.
#[derive(Debug, Clone)]
pub struct RationalReal {
    pub value: BigRational,
}

impl RationalReal {
    pub fn new(p: i64, q: i64) -> Self {
        RationalReal {
            value: BigRational::new(p.into(), q.into()),
        }
    }
}

impl HighPrecisionReal for RationalReal {
    fn approx(&self, _digits: u32) -> Approx {
        Approx::Exact(self.value.clone())
    }
    fn describe(&self) -> String {
        self.value.to_string()
    }
}

/// `(a + b sqrt(d)) / c` with `d` not a perfect square, `b >= 0`, `c > 0`.
#[derive(Debug, Clone)]
pub struct QuadraticSurd {
    pub a: i64,
    pub b: i64,
    pub d: u64,
    pub c: i64,
}

impl QuadraticSurd {
    pub fn sqrt(d: u64) -> Self {
        QuadraticSurd {
            a: 0,
            b: 1,
            d,
            c: 1,
        }
    }

    pub fn golden_ratio() -> Self {
        QuadraticSurd {
            a: 1,
            b: 1,
            d: 5,
            c: 2,
        }
    }
}

impl HighPrecisionReal for QuadraticSurd {
    fn approx(&self, digits: u32) -> Approx {
        let scale = BigInt::from(10u32).pow(digits);
        let rad =
            BigInt::from(self.b) * BigInt::from(self.b) * BigInt::from(self.d) * &scale * &scale;
        let s = rad.sqrt();
        if &s * &s == rad {
            let v = BigRational::new(
                BigInt::from(self.a) * &scale + s,
                BigInt::from(self.c) * &scale,
            );
            return Approx::Exact(v);
        }
        let den = BigInt::from(self.c) * &scale;
        let base = BigInt::from(self.a) * &scale;
        Approx::Interval(
            BigRational::new(&base + &s, den.clone()),
            BigRational::new(&base + &s + 1, den),
        )
    }
    fn describe(&self) -> String {
        format!("({} + {}*sqrt({}))/{}", self.a, self.b, self.d, self.c)
    }
}

/// Liouville's constant `sum_k 10^{-k!}` known through `terms` terms; the
/// enclosure `[S_K, S_K + 2*10^{-(K+1)!}]` bounds the rest of the series.
#[derive(Debug, Clone)]
pub struct LiouvilleTruncated {
    pub terms: u32,
}

fn factorial(n: u32) -> u32 {
    (1..=n).product()
}

impl HighPrecisionReal for LiouvilleTruncated {
    fn approx(&self, _digits: u32) -> Approx {
        let kmax = factorial(self.terms);
        let den = BigInt::from(10u32).pow(kmax);
        let mut num = BigInt::zero();
        for k in 1..=self.terms {
            num += BigInt::from(10u32).pow(kmax - factorial(k));
        }
        let lo = BigRational::new(num, den);
        let tail = BigRational::new(
            BigInt::from(2),
            BigInt::from(10u32).pow(factorial(self.terms + 1)),
        );
        let hi = &lo + tail;
        Approx::Interval(lo, hi)
    }
    fn max_digits(&self) -> u32 {
        factorial(self.terms + 1) - 1
    }
    fn describe(&self) -> String {
        format!("liouville[{} terms]", self.terms)
    }
}

/// Continued fraction `[a_0; a_1, ...]` with its convergents `p_k / q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub partial_quotients: Vec<BigInt>,
    pub convergents: Vec<(BigInt, BigInt)>,
    /// The expansion ended exactly (the input is rational).
    pub terminated: bool,
    /// Enclosure of the expanded number, used for distances.
    pub enclosure: (BigRational, BigRational),
}

/// Natural log of a positive big integer or rational without overflow.
pub fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let shift = bits - 60;
    let top: BigInt = x >> shift;
    top.to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_rational(x: &BigRational) -> f64 {
    ln_big(x.numer()) - ln_big(x.denom())
}

fn expand_interval(lo: &BigRational, hi: &BigRational, depth: usize) -> (Vec<BigInt>, bool) {
    let mut out = Vec::new();
    let (mut x, mut y) = (lo.clone(), hi.clone());
    while out.len() < depth {
        let fa = x.floor().to_integer();
        let fb = y.floor().to_integer();
        if fa != fb {
            break;
        }
        let fr = BigRational::from_integer(fa.clone());
        out.push(fa);
        let dx = &x - &fr;
        let dy = &y - &fr;
        if dx.is_zero() || dy.is_zero() {
            break;
        }
        let (nx, ny) = (dx.recip(), dy.recip());
        if nx <= ny {
            x = nx;
            y = ny;
        } else {
            x = ny;
            y = nx;
        }
    }
    (out, false)
}

fn expand_exact(v: &BigRational, depth: usize) -> (Vec<BigInt>, bool) {
    let mut out = Vec::new();
    let (mut p, mut q) = (v.numer().clone(), v.denom().clone());
    while !q.is_zero() && out.len() < depth {
        let (a, r) = p.div_mod_floor(&q);
        out.push(a);
        p = q;
        q = r;
    }
    let done = q.is_zero();
    (out, done)
}

/// Continued-fraction expansion to `depth` partial quotients. Every quotient
/// is certified by the evaluator's enclosure; when the enclosure cannot decide
/// the next quotient the precision is raised, up to `max_digits`.
pub fn cf_expand(
    x: &dyn HighPrecisionReal,
    depth: usize,
) -> Result<ContinuedFraction, DiophantineError> {
    if depth == 0 {
        return Err(DiophantineError::InvalidInput(
            "depth must be at least 1".into(),
        ));
    }
    let mut digits = 32u32.min(x.max_digits());
    loop {
        let approx = x.approx(digits);
        let (quotients, terminated, enclosure) = match &approx {
            Approx::Exact(v) => {
                let (q, t) = expand_exact(v, depth);
                (q, t, (v.clone(), v.clone()))
            }
            Approx::Interval(lo, hi) => {
                let (q, t) = expand_interval(lo, hi, depth);
                (q, t, (lo.clone(), hi.clone()))
            }
        };
        if quotients.len() >= depth || terminated {
            return Ok(build(quotients, terminated, enclosure));
        }
        if digits >= x.max_digits() {
            return Err(DiophantineError::PrecisionExhausted {
                requested: depth,
                certified: quotients.len(),
                digits,
            });
        }
        digits = digits.saturating_mul(2).min(x.max_digits());
    }
}

fn build(
    quotients: Vec<BigInt>,
    terminated: bool,
    enclosure: (BigRational, BigRational),
) -> ContinuedFraction {
    let mut convergents = Vec::with_capacity(quotients.len());
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    for a in &quotients {
        let p2 = a * &p1 + &p0;
        let q2 = a * &q1 + &q0;
        convergents.push((p2.clone(), q2.clone()));
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
    }
    ContinuedFraction {
        partial_quotients: quotients,
        convergents,
        terminated,
        enclosure,
    }
}

/// `mu = 1 + max ln q_{k+1} / ln q_k` over the tail steps, those that land in
/// the upper half of the log-denominator range (`ln q_{k+1} >= ln q_n / 2`,
/// skipping `q_k = 1`); exactly 1 for a terminated expansion.
pub fn estimate_mu(cf: &ContinuedFraction) -> Result<IrrationalityEstimate, DiophantineError> {
    let mid = {
        let (lo, hi) = &cf.enclosure;
        (lo + hi) / BigRational::from_integer(BigInt::from(2))
    };
    let evidence: Vec<Record> = cf
        .convergents
        .iter()
        .filter_map(|(p, q)| {
            let d = (&mid - BigRational::new(p.clone(), q.clone())).abs();
            if d.is_zero() {
                return None;
            }
            Some(Record::from_logs(ln_big(q), ln_rational(&d)))
        })
        .fold(Vec::<Record>::new(), |mut acc, r| {
            if acc
                .last()
                .is_none_or(|l| r.ln_distance < l.ln_distance && r.ln_t > l.ln_t)
            {
                acc.push(r);
            }
            acc
        });
    if cf.terminated {
        return Ok(IrrationalityEstimate {
            exponent: 1.0,
            evidence,
            method: EstimateMethod::ContinuedFraction,
            window: (0, cf.convergents.len()),
            fit_residual: None,
            lattice_periodic: true,
        });
    }
    let n = cf.convergents.len();
    if n < 3 {
        return Err(DiophantineError::TooFewConvergents(n));
    }
    let logs: Vec<f64> = cf.convergents.iter().map(|(_, q)| ln_big(q)).collect();
    let half = 0.5 * logs[n - 1];
    let start = (0..n - 1)
        .find(|&k| logs[k] > 0.0 && logs[k + 1] >= half)
        .unwrap_or(n - 1);
    let mut best = f64::NEG_INFINITY;
    for k in start..n - 1 {
        if logs[k] > 0.0 {
            best = best.max(logs[k + 1] / logs[k]);
        }
    }
    if !best.is_finite() {
        return Err(DiophantineError::TooFewConvergents(n));
    }
    Ok(IrrationalityEstimate {
        exponent: 1.0 + best,
        evidence,
        method: EstimateMethod::ContinuedFraction,
        window: (start, n),
        fit_residual: None,
        lattice_periodic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_third() {
        let cf = cf_expand(&RationalReal::new(1, 3), 5).unwrap();
        assert!(cf.terminated);
        let q: Vec<i64> = cf
            .partial_quotients
            .iter()
            .map(|a| a.to_i64().unwrap())
            .collect();
        assert_eq!(q, vec![0, 3]);
        assert_eq!(estimate_mu(&cf).unwrap().exponent, 1.0);
    }

    #[test]
    fn sqrt2_quotients() {
        let cf = cf_expand(&QuadraticSurd::sqrt(2), 40).unwrap();
        assert_eq!(cf.partial_quotients[0], BigInt::from(1));
        assert!(cf.partial_quotients[1..]
            .iter()
            .all(|a| *a == BigInt::from(2)));
    }

    #[test]
    fn precision_exhausted() {
        let e = cf_expand(&LiouvilleTruncated { terms: 3 }, 500).unwrap_err();
        assert!(matches!(e, DiophantineError::PrecisionExhausted { .. }));
    }

    #[test]
    fn ln_big_large() {
        let x = BigInt::from(10u32).pow(400);
        assert!((ln_big(&x) - 400.0 * 10f64.ln()).abs() < 1e-9);
    }
}
