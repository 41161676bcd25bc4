//! Continued fractions: quotient sequences, convergents, perturbed rotation
//! numbers α_n with their offsets ε_n, Brjuno partial sums and the α_0
//! quotient construction.
//!
//! Integers are exact (`rug::Integer`). Quotients of the form 3^(2^e) that
//! are too large to hold in memory stay symbolic; convergents past such a
//! quotient are only available as residues modulo large primes.

use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error::{Error, Result};

/// Quotients whose bit length exceeds this stay symbolic.
pub const MATERIALIZE_BITS: u64 = 1 << 22;

/// A single partial quotient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Quotient {
    Exact(Integer),
    /// The integer 3^(2^exponent), kept symbolic.
    Tower { exponent: Integer },
}

impl Quotient {
    /// 3^(2^e), materialized when small enough.
    pub fn tower(exponent: &Integer) -> Quotient {
        let small = exponent
            .to_u32()
            .filter(|&e| e < 64 && (1u64 << e) as f64 * 3f64.log2() < MATERIALIZE_BITS as f64);
        match small {
            Some(e) => Quotient::Exact(Integer::from(3).pow(1u32 << e)),
            None => Quotient::Tower { exponent: exponent.clone() },
        }
    }

    pub fn exact(&self) -> Option<&Integer> {
        match self {
            Quotient::Exact(a) => Some(a),
            Quotient::Tower { .. } => None,
        }
    }

    /// Natural logarithm, to about 50 significant bits.
    pub fn ln(&self) -> f64 {
        match self {
            Quotient::Exact(a) => Float::with_val(64, a).ln().to_f64(),
            Quotient::Tower { exponent } => {
                let two_e = Float::with_val(64, 2).pow(exponent);
                (two_e * 3f64.ln()).to_f64()
            }
        }
    }

    /// Residue modulo a prime `m` (with 3 invertible mod m).
    pub fn residue(&self, m: u64) -> u64 {
        let mi = Integer::from(m);
        match self {
            Quotient::Exact(a) => Integer::from(a % &mi).to_u64().unwrap(),
            Quotient::Tower { exponent } => {
                let order = Integer::from(m - 1);
                let e = Integer::from(2).pow_mod(exponent, &order).unwrap();
                Integer::from(3).pow_mod(&e, &mi).unwrap().to_u64().unwrap()
            }
        }
    }
}

/// Exact bit length of 3^(2^e): floor(2^e·log2 3) + 1.
pub fn tower_bit_length(exponent: u64) -> Integer {
    let prec = exponent as u32 + 96;
    let log2_3 = Float::with_val(prec, 3).log2();
    let scaled = log2_3 * Float::with_val(prec, 2).pow(exponent as u32);
    scaled.floor().to_integer().expect("finite") + 1
}

/// How a quotient sequence continues past its prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tail {
    Finite,
    Periodic(Vec<Integer>),
    /// a_m = n except a_{n_j+1} = 3^(2^{q_{n_j}}).
    Alpha0 { n: Integer, indices: Vec<usize> },
}

/// α = [0; a_1, a_2, ...].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientSequence {
    prefix: Vec<Integer>,
    tail: Tail,
}

impl QuotientSequence {
    pub fn new(prefix: Vec<Integer>, tail: Tail) -> Result<Self> {
        if prefix.iter().any(|a| *a < 1) {
            return Err(Error::InvalidInput("quotients must be >= 1".into()));
        }
        match &tail {
            Tail::Finite if prefix.is_empty() => {
                return Err(Error::InvalidInput("empty finite sequence".into()))
            }
            Tail::Periodic(p) if p.is_empty() || p.iter().any(|a| *a < 1) => {
                return Err(Error::InvalidInput("period must be nonempty with quotients >= 1".into()))
            }
            Tail::Alpha0 { n, indices } => {
                if *n < 1 {
                    return Err(Error::InvalidInput("N must be >= 1".into()));
                }
                if indices.first() == Some(&0) || indices.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidInput("indices must be positive and strictly increasing".into()));
                }
            }
            _ => {}
        }
        Ok(QuotientSequence { prefix, tail })
    }

    pub fn finite(quotients: &[u64]) -> Result<Self> {
        Self::new(quotients.iter().map(|&a| Integer::from(a)).collect(), Tail::Finite)
    }

    pub fn periodic(prefix: &[u64], period: &[u64]) -> Result<Self> {
        Self::new(
            prefix.iter().map(|&a| Integer::from(a)).collect(),
            Tail::Periodic(period.iter().map(|&a| Integer::from(a)).collect()),
        )
    }

    /// The golden mean [0; 1, 1, 1, ...].
    pub fn golden() -> Self {
        Self::periodic(&[], &[1]).unwrap()
    }

    pub fn prefix(&self) -> &[Integer] {
        &self.prefix
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    /// Number of quotients, or `None` when infinite.
    pub fn len(&self) -> Option<usize> {
        match self.tail {
            Tail::Finite => Some(self.prefix.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// The first `k` quotients a_1..a_k.
    pub fn quotients(&self, k: usize) -> Result<Vec<Quotient>> {
        if let Some(len) = self.len() {
            if k > len {
                return Err(Error::InsufficientQuotients { needed: k, available: len });
            }
        }
        let mut out = Vec::with_capacity(k);
        // exact q_{m-1}, q_{m-2}; only tracked for the α_0 generator
        let mut q1 = Some(Integer::from(1));
        let mut q2 = Some(Integer::from(0));
        for m in 1..=k {
            let a = if m <= self.prefix.len() {
                Quotient::Exact(self.prefix[m - 1].clone())
            } else {
                let i = m - self.prefix.len() - 1;
                match &self.tail {
                    Tail::Finite => unreachable!(),
                    Tail::Periodic(p) => Quotient::Exact(p[i % p.len()].clone()),
                    Tail::Alpha0 { n, indices } => {
                        if indices.contains(&(m - 1)) {
                            match &q1 {
                                Some(q) => Quotient::tower(q),
                                None => return Err(Error::Unmaterializable { index: m }),
                            }
                        } else {
                            Quotient::Exact(n.clone())
                        }
                    }
                }
            };
            if matches!(self.tail, Tail::Alpha0 { .. }) {
                let next = match (&a, &q1, &q2) {
                    (Quotient::Exact(a), Some(q1), Some(q2)) => Some(Integer::from(a * q1) + q2),
                    _ => None,
                };
                q2 = q1;
                q1 = next;
            }
            out.push(a);
        }
        Ok(out)
    }
}

impl fmt::Display for QuotientSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Integer]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(f, "prefix: {}", join(&self.prefix))?;
        match &self.tail {
            Tail::Finite => writeln!(f, "tail: finite"),
            Tail::Periodic(p) => writeln!(f, "tail: periodic {}", join(p)),
            Tail::Alpha0 { n, indices } => {
                let idx = indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
                writeln!(f, "tail: expr N={n} idx={idx}")
            }
        }
    }
}

fn parse_ints(s: &str) -> Result<Vec<Integer>> {
    s.split_whitespace()
        .map(|t| Integer::from_str(t).map_err(|_| Error::InvalidInput(format!("bad integer '{t}'"))))
        .collect()
}

impl FromStr for QuotientSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut prefix = None;
        let mut tail = None;
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("expected 'key: value', got '{line}'")))?;
            match key.trim() {
                "prefix" => prefix = Some(parse_ints(rest)?),
                "tail" => {
                    let rest = rest.trim();
                    let (kind, args) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                    tail = Some(match kind {
                        "finite" => Tail::Finite,
                        "periodic" => Tail::Periodic(parse_ints(args)?),
                        "expr" => {
                            let mut n = None;
                            let mut indices = Vec::new();
                            for tok in args.split_whitespace() {
                                match tok.split_once('=') {
                                    Some(("N", v)) => n = Some(parse_ints(v)?.pop().unwrap_or_default()),
                                    Some(("idx", v)) => {
                                        indices = v
                                            .split(',')
                                            .filter(|t| !t.is_empty())
                                            .map(|t| t.parse::<usize>())
                                            .collect::<std::result::Result<_, _>>()
                                            .map_err(|_| Error::InvalidInput(format!("bad idx list '{v}'")))?
                                    }
                                    _ => return Err(Error::InvalidInput(format!("bad expr token '{tok}'"))),
                                }
                            }
                            let n = n.ok_or_else(|| Error::InvalidInput("expr tail needs N=".into()))?;
                            Tail::Alpha0 { n, indices }
                        }
                        other => return Err(Error::InvalidInput(format!("unknown tail kind '{other}'"))),
                    });
                }
                other => return Err(Error::InvalidInput(format!("unknown key '{other}'"))),
            }
        }
        QuotientSequence::new(prefix.unwrap_or_default(), tail.unwrap_or(Tail::Finite))
    }
}

/// The k-th convergent p_k/q_k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub k: usize,
    pub p: Integer,
    pub q: Integer,
}

/// Convergents p_1/q_1 .. p_k/q_k in exact arithmetic.
pub fn convergents(seq: &QuotientSequence, k: usize) -> Result<Vec<Convergent>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let qs = seq.quotients(k)?;
    let (mut p2, mut p1) = (Integer::from(1), Integer::from(0));
    let (mut q2, mut q1) = (Integer::from(0), Integer::from(1));
    let mut out = Vec::with_capacity(k);
    for (i, a) in qs.iter().enumerate() {
        let a = a.exact().ok_or(Error::Unmaterializable { index: i + 1 })?;
        let p = Integer::from(a * &p1) + &p2;
        let q = Integer::from(a * &q1) + &q2;
        p2 = std::mem::replace(&mut p1, p.clone());
        q2 = std::mem::replace(&mut q1, q.clone());
        out.push(Convergent { k: i + 1, p, q });
    }
    Ok(out)
}

/// p_{k-1} q_k - p_k q_{k-1}; with p_0/q_0 = 0/1 before the first.
pub fn determinant(prev: Option<&Convergent>, cur: &Convergent) -> Integer {
    let (pp, qp) = prev.map_or((Integer::from(0), Integer::from(1)), |c| (c.p.clone(), c.q.clone()));
    Integer::from(&pp * &cur.q) - Integer::from(&cur.p * &qp)
}

/// Convergents reduced modulo the prime `m`, valid past symbolic quotients.
pub fn convergents_mod(seq: &QuotientSequence, k: usize, m: u64) -> Result<Vec<(u64, u64)>> {
    let qs = seq.quotients(k)?;
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % m as u128) as u64;
    let (mut p2, mut p1, mut q2, mut q1) = (1u64, 0u64, 0u64, 1u64);
    let mut out = Vec::with_capacity(k);
    for a in &qs {
        let a = a.residue(m);
        let p = (mul(a, p1) + p2) % m;
        let q = (mul(a, q1) + q2) % m;
        (p2, p1, q2, q1) = (p1, p, q1, q);
        out.push((p, q));
    }
    Ok(out)
}

/// Outcome of checking p_{k-1}q_k − p_k q_{k-1} = (−1)^k for k = 1..K.
#[derive(Clone, Debug)]
pub struct DeterminantReport {
    pub checked: usize,
    /// Indices verified over the integers.
    pub exact_up_to: usize,
    /// Primes used for the indices beyond `exact_up_to`.
    pub moduli: Vec<u64>,
    pub holds: bool,
}

/// Four primes just above 2^61 used for residue checks.
pub fn residue_primes() -> Vec<u64> {
    let mut p = Integer::from(1u64 << 61);
    (0..4)
        .map(|_| {
            p = p.clone().next_prime();
            p.to_u64().unwrap()
        })
        .collect()
}

/// Verifies the determinant identity for k ≤ `k_max`: exactly while the
/// quotients are materialized, then modulo several primes.
pub fn check_determinant(seq: &QuotientSequence, k_max: usize) -> Result<DeterminantReport> {
    let qs = seq.quotients(k_max)?;
    let exact_len = qs.iter().take_while(|a| a.exact().is_some()).count();
    let mut holds = true;
    if exact_len > 0 {
        let cs = convergents(seq, exact_len)?;
        for (i, c) in cs.iter().enumerate() {
            let expect = if c.k % 2 == 0 { 1 } else { -1 };
            holds &= determinant(i.checked_sub(1).map(|j| &cs[j]), c) == expect;
        }
    }
    let mut moduli = Vec::new();
    if exact_len < k_max {
        moduli = residue_primes();
        for &m in &moduli {
            let cs = convergents_mod(seq, k_max, m)?;
            let mul = |a: u64, b: u64| ((a as u128 * b as u128) % m as u128) as u64;
            for k in 1..=k_max {
                let (pp, qp) = if k == 1 { (0, 1) } else { cs[k - 2] };
                let (p, q) = cs[k - 1];
                let det = (mul(pp, q) + m - mul(p, qp)) % m;
                let expect = if k % 2 == 0 { 1 } else { m - 1 };
                holds &= det == expect;
            }
        }
    }
    Ok(DeterminantReport { checked: k_max, exact_up_to: exact_len, moduli, holds })
}

/// A real value with a bound on its distance to the true number, in log2.
#[derive(Clone, Debug)]
pub struct RealValue {
    pub value: Float,
    /// log2 of the error bound; −∞ when the value is exact up to rounding.
    pub error_log2: f64,
}

fn log2_int(a: &Integer) -> f64 {
    Float::with_val(64, a).log2().to_f64()
}

/// [0; a_1..a_depth] at `precision_bits`, with the convergent-interval bound
/// 1/(q_depth q_{depth+1}) when a further quotient exists.
pub fn eval_real(seq: &QuotientSequence, depth: usize, precision_bits: u32) -> Result<RealValue> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be >= 1".into()));
    }
    let cs = convergents(seq, depth)?;
    let last = cs.last().unwrap();
    let value = Float::with_val(precision_bits, &last.p) / &last.q;
    let has_next = seq.len().is_none_or(|l| l > depth);
    let error_log2 = if has_next {
        let next = seq.quotients(depth + 1)?.pop().unwrap();
        let q_prev = if depth >= 2 { cs[depth - 2].q.clone() } else { Integer::from(1) };
        match next {
            Quotient::Exact(a) => -(log2_int(&last.q) + log2_int(&(a * &last.q + q_prev))),
            Quotient::Tower { .. } => -(2.0 * log2_int(&last.q) + next.ln() / std::f64::consts::LN_2),
        }
    } else {
        f64::NEG_INFINITY
    };
    Ok(RealValue { value, error_log2 })
}

/// Evaluates with the depth chosen so the truncation error is below
/// 2^−precision_bits, stopping early at a symbolic quotient (whose tail
/// contribution is far below any precision).
pub fn eval_to_precision(seq: &QuotientSequence, precision_bits: u32) -> Result<RealValue> {
    let mut depth = 1;
    loop {
        let v = match eval_real(seq, depth, precision_bits) {
            Ok(v) => v,
            Err(Error::Unmaterializable { .. }) if depth > 1 => return eval_real(seq, depth - 1, precision_bits),
            Err(e) => return Err(e),
        };
        if v.error_log2 < -(precision_bits as f64) - 2.0 {
            return Ok(v);
        }
        depth += 1;
    }
}

/// Everything about the perturbed rotation number α_n = [0; a_1..a_n, A_n, t_1, t_2, ...].
#[derive(Clone, Debug)]
pub struct PerturbationSetup {
    pub alpha: QuotientSequence,
    pub theta: QuotientSequence,
    pub n: usize,
    pub a_n: Integer,
    pub p_n: Integer,
    pub q_n: Integer,
    pub p_nm1: Integer,
    pub q_nm1: Integer,
    pub alpha_n: Float,
    pub epsilon_n: Float,
    pub theta_value: Float,
    pub precision_bits: u32,
    /// log2 of the relative gap between the two ε_n evaluations.
    pub dual_gap_log2: f64,
}

impl PerturbationSetup {
    pub fn q(&self) -> usize {
        self.q_n.to_usize().expect("q_n fits in usize")
    }
    pub fn q_prev(&self) -> usize {
        self.q_nm1.to_usize().expect("q_{n-1} fits in usize")
    }
    pub fn p(&self) -> i64 {
        self.p_n.to_i64().expect("p_n fits in i64")
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon_n.to_f64()
    }
    pub fn theta(&self) -> f64 {
        self.theta_value.to_f64()
    }
    pub fn alpha_n_f64(&self) -> f64 {
        self.alpha_n.to_f64()
    }
    /// A_n as f64 (saturating for huge values).
    pub fn a_n_f64(&self) -> f64 {
        self.a_n.to_f64()
    }
}

/// Builds α_n and ε_n, evaluating ε_n both by the closed form
/// (−1)^n/(q_n²(A_n+θ) + q_n q_{n−1}) and directly as α_n − p_n/q_n.
pub fn make_setup(
    alpha: &QuotientSequence,
    theta: &QuotientSequence,
    n: usize,
    a_n: &Integer,
    precision_bits: u32,
) -> Result<PerturbationSetup> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if *a_n < 1 {
        return Err(Error::InvalidInput("A_n must be >= 1".into()));
    }
    let quots = alpha.quotients(n)?;
    let cs = convergents(alpha, n)?;
    let (p_n, q_n) = (cs[n - 1].p.clone(), cs[n - 1].q.clone());
    let (p_nm1, q_nm1) = if n >= 2 {
        (cs[n - 2].p.clone(), cs[n - 2].q.clone())
    } else {
        (Integer::from(0), Integer::from(1))
    };
    // bits lost to cancellation in α_n − p_n/q_n
    let denom_bound = Integer::from(&q_n * &q_n) * Integer::from(a_n + 1u32) + Integer::from(&q_n * &q_nm1);
    let cancel = log2_int(&denom_bound).ceil() as u32 + 2;
    if precision_bits < 32 || precision_bits < cancel + 16 {
        return Err(Error::PrecisionExhausted { advisory_bits: (cancel + 64).max(64) });
    }
    let work = precision_bits + cancel + 32;
    let theta_value = eval_to_precision(theta, work)?.value;

    let x = Float::with_val(work, a_n) + &theta_value;
    let closed_den = Float::with_val(work, Integer::from(&q_n * &q_n)) * &x
        + Float::with_val(work, Integer::from(&q_n * &q_nm1));
    let sign = if n % 2 == 0 { 1 } else { -1 };
    let eps_closed = Float::with_val(work, sign) / closed_den;

    let mut y = Float::with_val(work, 1) / &x;
    for a in quots.iter().rev() {
        let a = a.exact().expect("convergents succeeded");
        y = Float::with_val(work, 1) / (y + a);
    }
    let alpha_n = y;
    let eps_direct = Float::with_val(work, &alpha_n) - Float::with_val(work, &p_n) / &q_n;

    let eps_closed = Float::with_val(precision_bits, &eps_closed);
    let eps_direct = Float::with_val(precision_bits, &eps_direct);
    let gap = Float::with_val(precision_bits, &eps_closed - &eps_direct).abs() / eps_closed.clone().abs();
    let dual_gap_log2 = if gap.is_zero() { f64::NEG_INFINITY } else { gap.log2().to_f64() };
    if dual_gap_log2 > -((precision_bits - 20) as f64) {
        return Err(Error::DualEvaluationMismatch { log2_gap: dual_gap_log2 });
    }
    Ok(PerturbationSetup {
        alpha: alpha.clone(),
        theta: theta.clone(),
        n,
        a_n: a_n.clone(),
        p_n,
        q_n,
        p_nm1,
        q_nm1,
        alpha_n: Float::with_val(precision_bits, &alpha_n),
        epsilon_n: eps_closed,
        theta_value: Float::with_val(precision_bits, &theta_value),
        precision_bits,
        dual_gap_log2,
    })
}

/// Σ_{k=1}^{K} log(q_{k+1})/q_k with every term retained.
#[derive(Clone, Debug)]
pub struct BrjunoPartialSum {
    pub k: usize,
    pub value: Float,
    pub terms: Vec<Float>,
    /// Natural log of each term; finite even where the term underflows.
    pub ln_terms: Vec<f64>,
}

pub fn brjuno_sum(seq: &QuotientSequence, k: usize) -> Result<BrjunoPartialSum> {
    const PREC: u32 = 128;
    if k == 0 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let qs = seq.quotients(k + 1)?;
    // exact denominators while possible, ln q_k always
    let (mut q2, mut q1) = (Some(Integer::from(0)), Some(Integer::from(1)));
    let mut ln_q = Vec::with_capacity(k + 1);
    let mut q_exact = Vec::with_capacity(k + 1);
    let mut ln_prev = 0.0;
    for a in &qs {
        let q = match (a.exact(), &q1, &q2) {
            (Some(a), Some(q1), Some(q2)) => Some(Integer::from(a * q1) + q2),
            _ => None,
        };
        let ln = match &q {
            Some(q) => Float::with_val(PREC, q).ln().to_f64(),
            None => a.ln() + ln_prev,
        };
        ln_prev = ln;
        ln_q.push(ln);
        q_exact.push(q.clone());
        q2 = q1;
        q1 = q;
    }
    let mut terms = Vec::with_capacity(k);
    let mut ln_terms = Vec::with_capacity(k);
    for i in 0..k {
        let ln_next = ln_q[i + 1];
        let (term, ln_term) = match (&q_exact[i], &q_exact[i + 1]) {
            (Some(qk), Some(qn)) => {
                let t = Float::with_val(PREC, qn).ln() / Float::with_val(PREC, qk);
                let lt = t.clone().ln().to_f64();
                (t, lt)
            }
            _ => {
                let lt = ln_next.ln() - ln_q[i];
                (Float::with_val(PREC, lt).exp(), lt)
            }
        };
        terms.push(term);
        ln_terms.push(ln_term);
    }
    let value = terms.iter().fold(Float::with_val(PREC, 0), |acc, t| acc + t);
    Ok(BrjunoPartialSum { k, value, terms, ln_terms })
}

/// The α_0 quotient sequence: a_m = N except a_{n_j+1} = 3^(2^{q_{n_j}}).
pub fn build_alpha0(n: u64, indices: &[usize]) -> Result<QuotientSequence> {
    QuotientSequence::new(Vec::new(), Tail::Alpha0 { n: Integer::from(n), indices: indices.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rug::Rational;

    fn pq(cs: &[Convergent]) -> Vec<(i64, i64)> {
        cs.iter().map(|c| (c.p.to_i64().unwrap(), c.q.to_i64().unwrap())).collect()
    }

    #[test]
    fn golden_convergents_match_folded_fraction() {
        let seq = QuotientSequence::finite(&[1, 1, 1, 1, 1]).unwrap();
        let cs = convergents(&seq, 5).unwrap();
        assert_eq!(pq(&cs), vec![(1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]);
        // fold [0;1,1,1,1,1] from the bottom with big rationals
        let mut x = Rational::from(0);
        for _ in 0..5 {
            x = Rational::from(1) / (x + 1);
        }
        assert_eq!(x, Rational::from((5, 8)));
    }

    #[test]
    fn single_level() {
        let seq = QuotientSequence::finite(&[2]).unwrap();
        assert_eq!(pq(&convergents(&seq, 1).unwrap()), vec![(1, 2)]);
    }

    #[test]
    fn exhausted_tail_and_bad_quotient() {
        let seq = QuotientSequence::finite(&[2]).unwrap();
        assert!(matches!(convergents(&seq, 2), Err(Error::InsufficientQuotients { .. })));
        assert!(QuotientSequence::finite(&[1, 0]).is_err());
        assert!(convergents(&seq, 0).is_err());
    }

    #[test]
    fn eval_two_fifths() {
        let seq = QuotientSequence::finite(&[2, 2]).unwrap();
        let v = eval_real(&seq, 2, 64).unwrap();
        assert_eq!(v.value, Float::with_val(64, 2) / 5);
        assert_eq!(v.error_log2, f64::NEG_INFINITY);
    }

    #[test]
    fn golden_value_at_depth_40() {
        let v = eval_real(&QuotientSequence::golden(), 40, 128).unwrap();
        let g = (Float::with_val(128, 5).sqrt() - 1u32) / 2u32;
        assert!(Float::with_val(128, &v.value - &g).abs().to_f64() < 1e-15);
        assert!(v.error_log2 < -50.0);
    }

    #[test]
    fn epsilon_n4_dual_evaluation() {
        let g = QuotientSequence::golden();
        let s = make_setup(&g, &g, 4, &Integer::from(10), 200).unwrap();
        assert_eq!((s.p(), s.q()), (3, 5));
        assert!(s.dual_gap_log2 < -180.0);
        let theta = s.theta_value.clone();
        let expect = Float::with_val(200, 1) / (Float::with_val(200, 25) * (theta + 10u32) + 15u32);
        let rel = Float::with_val(200, &s.epsilon_n - &expect).abs() / &expect;
        assert!(rel.to_f64() < 1e-55);
    }

    #[test]
    fn epsilon_n1_hand_value() {
        let g = QuotientSequence::golden();
        let s = make_setup(&g, &g, 1, &Integer::from(1), 128).unwrap();
        assert_eq!((s.q(), s.q_prev()), (1, 1));
        let theta = (5f64.sqrt() - 1.0) / 2.0;
        let expect = -1.0 / ((1.0 + theta) + 1.0);
        assert!((s.epsilon() - expect).abs() < 1e-15);
    }

    #[test]
    fn low_precision_is_refused() {
        let g = QuotientSequence::golden();
        let r = make_setup(&g, &g, 8, &Integer::from(1_000_000), 40);
        assert!(matches!(r, Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn alpha0_hand_walk() {
        let seq = build_alpha0(1, &[2]).unwrap();
        let qs = seq.quotients(4).unwrap();
        assert_eq!(qs[2], Quotient::Exact(Integer::from(81)));
        assert_eq!(qs[3], Quotient::Exact(Integer::from(1)));
    }

    #[test]
    fn alpha0_symbolic_quotient_and_residue_check() {
        let seq = build_alpha0(1, &[2, 4]).unwrap();
        let qs = seq.quotients(6).unwrap();
        // q_4 = 165, so a_5 = 3^(2^165) stays symbolic
        assert_eq!(qs[4], Quotient::Tower { exponent: Integer::from(165) });
        let rep = check_determinant(&seq, 50).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.exact_up_to, 4);
        assert_eq!(rep.moduli.len(), 4);
    }

    #[test]
    fn tower_bit_length_matches_materialized() {
        for e in [1u64, 2, 3, 5, 10, 16] {
            let a = Integer::from(3).pow(1u32 << e);
            assert_eq!(Integer::from(a.significant_bits()), tower_bit_length(e));
        }
    }

    #[test]
    fn brjuno_golden_converges() {
        let s = brjuno_sum(&QuotientSequence::golden(), 20).unwrap();
        let diffs: Vec<f64> = s.terms.iter().map(|t| t.to_f64()).collect();
        assert!(diffs.iter().all(|&t| t > 0.0));
        assert!(diffs[19] < 1e-3 && diffs[19] < diffs[10] / 20.0);
        // direct summation over Fibonacci denominators
        let (mut a, mut b) = (1f64, 2f64);
        let mut direct = 0.0;
        for _ in 0..20 {
            direct += b.ln() / a;
            (a, b) = (b, a + b);
        }
        assert!((s.value.to_f64() - direct).abs() < 1e-13);
    }

    #[test]
    fn brjuno_finite_is_insufficient() {
        let seq = QuotientSequence::finite(&[3]).unwrap();
        assert!(matches!(brjuno_sum(&seq, 2), Err(Error::InsufficientQuotients { .. })));
    }

    #[test]
    fn brjuno_alpha0_large_term() {
        let seq = build_alpha0(1, &[2]).unwrap();
        let s = brjuno_sum(&seq, 3).unwrap();
        // term k=2: log(q_3)/q_2 with q_3 = 81·2 + 1
        assert!((s.terms[1].to_f64() - (163f64).ln() / 2.0).abs() < 1e-14);
        let s = brjuno_sum(&build_alpha0(1, &[2, 4]).unwrap(), 6).unwrap();
        assert!(s.ln_terms.iter().all(|t| t.is_finite()));
        // k=4: log(q_5)/q_4 with q_5 ≈ 3^(2^165)·165
        let expect = ((2f64).powi(165) * 3f64.ln() + 165f64.ln()).ln() - 165f64.ln();
        assert!((s.ln_terms[3] - expect).abs() < 1e-9);
    }

    #[test]
    fn text_round_trip() {
        for text in ["prefix: 1 1 1 1\ntail: periodic 1\n", "prefix: \ntail: expr N=1 idx=2,5,9\n", "prefix: 3 7 15\ntail: finite\n"] {
            let seq: QuotientSequence = text.parse().unwrap();
            assert_eq!(seq.to_string().parse::<QuotientSequence>().unwrap(), seq);
        }
        assert!("prefix: 1\ntail: bogus".parse::<QuotientSequence>().is_err());
        assert!("pre: 1".parse::<QuotientSequence>().is_err());
    }

    proptest! {
        #[test]
        fn determinant_identity(qs in prop::collection::vec(1u64..1000, 1..40)) {
            let seq = QuotientSequence::finite(&qs).unwrap();
            let cs = convergents(&seq, qs.len()).unwrap();
            for (i, c) in cs.iter().enumerate() {
                let expect = if c.k % 2 == 0 { 1 } else { -1 };
                prop_assert_eq!(determinant(i.checked_sub(1).map(|j| &cs[j]), c), expect);
                prop_assert_eq!(Integer::from(c.p.gcd_ref(&c.q)), 1);
            }
        }

        #[test]
        fn eval_lies_between_convergents(qs in prop::collection::vec(1u64..50, 3..30), depth in 2usize..29) {
            let period = [1u64, 2];
            let seq = QuotientSequence::periodic(&qs, &period).unwrap();
            let v = eval_real(&seq, depth, 256).unwrap();
            let deep = eval_real(&seq, depth + 20, 256).unwrap();
            let cs = convergents(&seq, depth).unwrap();
            let a = Float::with_val(256, &cs[depth - 1].p) / &cs[depth - 1].q;
            let b = Float::with_val(256, &cs[depth - 2].p) / &cs[depth - 2].q;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(v.value >= lo && v.value <= hi);
            let gap = Float::with_val(256, &deep.value - &v.value).abs();
            // the bound covers truncation only; allow a few ulps of rounding
            let bound = v.error_log2.exp2() * (1.0 + 1e-9) + 2f64.powi(-250);
            prop_assert!(gap.to_f64() <= bound);
        }

        #[test]
        fn epsilon_sign_and_bound(n in 2usize..9, a in 1u64..100_000) {
            let g = QuotientSequence::golden();
            let s = make_setup(&g, &g, n, &Integer::from(a), 160).unwrap();
            let eps = s.epsilon();
            prop_assert_eq!(eps > 0.0, n % 2 == 0);
            let q = s.q() as f64;
            prop_assert!(eps.abs() <= 1.0 / (q * q * a as f64));
        }
    }
}
