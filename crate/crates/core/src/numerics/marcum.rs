use crate::error::{Error, Result};

/// First-order Marcum Q function `Q1(a, b)`.
///
/// Uses the Poisson-mixture form of the noncentral chi-square tail with two
/// degrees of freedom:
///
/// ```text
/// Q1(a, b) = sum_j Pois(j; a^2/2) * P[Pois(b^2/2) <= j]
/// ```
///
/// Every term is nonnegative and evaluated in the log domain, so there is no
/// cancellation and no overflow for large `a * b`. The sum is restricted to
/// the window of `j` that carries non-negligible Poisson mass (tails below
/// 1e-20 are dropped).
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::Domain {
            func: "marcum_q1",
            value: a,
        });
    }
    if !b.is_finite() || b < 0.0 {
        return Err(Error::Domain {
            func: "marcum_q1",
            value: b,
        });
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok((-0.5 * b * b).exp());
    }

    let mu = 0.5 * a * a;
    let y = 0.5 * b * b;
    if poisson_window(y).0 > poisson_window(mu).1 {
        // the two Poisson laws have disjoint bulk: Q1 = P[Pois(y) <= Pois(mu)] ~ 0
        return Ok(0.0);
    }
    if y < mu {
        // Q1 is close to one here; sum the complement so that it keeps full
        // relative precision.
        Ok((1.0 - mixture_sum(mu, y, true)).clamp(0.0, 1.0))
    } else {
        Ok(mixture_sum(mu, y, false).clamp(0.0, 1.0))
    }
}

fn poisson_window(mean: f64) -> (usize, usize) {
    let spread = 12.0 * mean.sqrt() + 40.0;
    (
        (mean - spread).floor().max(0.0) as usize,
        (mean + spread).ceil() as usize,
    )
}

/// `sum_j Pois(j; mu) * G_j(y)` where `G_j` is `P[Pois(y) <= j]`, or
/// `P[Pois(y) > j]` when `upper_tail` is set.
fn mixture_sum(mu: f64, y: f64, upper_tail: bool) -> f64 {
    let (j_lo, j_hi) = poisson_window(mu);
    let i_top = if upper_tail {
        j_hi.max(poisson_window(y).1) + 1
    } else {
        j_hi
    };
    let ln_mu = mu.ln();
    let ln_y = y.ln();

    // ln(i!) for i = 0..=i_top
    let mut ln_fact = Vec::with_capacity(i_top + 1);
    let mut acc = 0.0;
    ln_fact.push(0.0);
    for i in 1..=i_top {
        acc += (i as f64).ln();
        ln_fact.push(acc);
    }
    let pois_y = |i: usize| (i as f64 * ln_y - y - ln_fact[i]).exp();
    let pois_mu = |j: usize| (j as f64 * ln_mu - mu - ln_fact[j]).exp();

    let mut total = 0.0;
    if upper_tail {
        // tail = P[Pois(y) > j], accumulated downward from i_top
        let mut tail = 0.0;
        for i in (j_hi + 1..=i_top).rev() {
            tail += pois_y(i);
        }
        for j in (j_lo..=j_hi).rev() {
            total += pois_mu(j) * tail;
            tail += pois_y(j);
        }
    } else {
        let mut cdf = 0.0;
        for j in 0..=j_hi {
            cdf += pois_y(j);
            if j >= j_lo {
                total += pois_mu(j) * cdf.min(1.0);
            }
        }
    }
    total
}
