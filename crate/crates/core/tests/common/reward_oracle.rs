//! Exact-arithmetic evaluation of the answer, accuracy, penalty, gain and
//! overall rewards, with an independent re-implementation of the metrics.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

fn max(a: BigRational, b: BigRational) -> BigRational {
    if a >= b {
        a
    } else {
        b
    }
}

/// gamma^k for any integer k.
pub fn pow(gamma: &BigRational, k: i64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= gamma;
    }
    if k < 0 {
        acc.recip()
    } else {
        acc
    }
}

pub fn penalty(t: i64, i: i64, gamma: f64, beta: f64) -> BigRational {
    max(q(beta), BigRational::one() - pow(&q(gamma), t - i))
}

pub fn gain(recall: &BigRational, penalty: &BigRational, alpha: f64) -> BigRational {
    q(alpha) * (recall - penalty)
}

pub fn accuracy(format_ok: bool, r_ans: &BigRational) -> BigRational {
    if format_ok {
        max(int(1) / int(10), r_ans.clone())
    } else {
        BigRational::zero()
    }
}

/// Lowercase, strip non-alphanumerics, drop articles, split.
pub fn norm(s: &str) -> Vec<String> {
    let kept: String = s
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    kept.split_whitespace()
        .filter(|w| !["a", "an", "the"].contains(w))
        .map(String::from)
        .collect()
}

pub fn f1(pred: &[String], gold: &[String]) -> BigRational {
    if pred.is_empty() && gold.is_empty() {
        return BigRational::one();
    }
    let mut pool: Vec<&String> = gold.iter().collect();
    let mut common = 0i64;
    for p in pred {
        if let Some(k) = pool.iter().position(|g| *g == p) {
            pool.swap_remove(k);
            common += 1;
        }
    }
    if common == 0 {
        return BigRational::zero();
    }
    // 2PR/(P+R) = 2c / (|pred| + |gold|)
    int(2 * common) / int((pred.len() + gold.len()) as i64)
}

pub fn cover(pred: &[String], gold: &[String]) -> BigRational {
    let hit = gold.is_empty() || pred.windows(gold.len()).any(|w| w == gold);
    if hit {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

pub fn exact(pred: &[String], gold: &[String]) -> BigRational {
    if pred == gold {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

pub fn answer(pred: &str, golds: &[String], n: u32) -> BigRational {
    let p = norm(pred);
    golds
        .iter()
        .map(|g| {
            let g = norm(g);
            if p.len() >= n as usize * g.len() {
                f1(&p, &g)
            } else {
                cover(&p, &g)
            }
        })
        .fold(BigRational::zero(), max)
}
