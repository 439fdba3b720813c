//! Small numeric helpers: bracketed bisection and tolerance scales.

/// Bisection on a sign-changing bracket. Returns the midpoint of the final
/// bracket once its width drops below `tol` or after 200 halvings.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `max(1, |v|...)`, the usual relative tolerance scale.
pub fn scale_of(values: &[f64]) -> f64 {
    values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

pub fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn scale_is_at_least_one() {
        assert_eq!(scale_of(&[0.1, -0.5]), 1.0);
        assert_eq!(scale_of(&[3.0, -7.0]), 7.0);
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(v.iter().sum::<f64>(), 0.0);
        assert_eq!(compensated_sum(v), 2e-16);
        let thirds = std::iter::repeat(1.0 / 3.0).take(30_000);
        assert!((compensated_sum(thirds) - 10_000.0).abs() <= 2e-12);
    }
}
