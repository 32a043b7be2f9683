use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricDirection {
    LowerIsBetter,
    HigherIsBetter,
}

impl MetricDirection {
    /// `true` when `a` is strictly better than `b`. A NaN never beats
    /// anything and loses to every number.
    fn beats(self, a: f64, b: f64) -> bool {
        match (a.is_nan(), b.is_nan()) {
            (true, _) => false,
            (false, true) => true,
            _ => match self {
                Self::LowerIsBetter => a < b,
                Self::HigherIsBetter => a > b,
            },
        }
    }
}

/// Fraction of instances on which method `a` beats method `b`.
///
/// `a[i]` and `b[i]` are the metric vectors of the two methods on instance
/// `i`. On each instance the method that wins more metrics scores 1, the
/// other 0, and a tie scores one half for both. The result is the mean
/// score of `a`.
///
/// The value is rounded onto the grid `k / 2^52`, which is exact in both
/// directions, so `compute_win_rate(a, b) == 1 - compute_win_rate(b, a)`
/// holds bit for bit and comparing a method with itself gives exactly 0.5.
pub fn compute_win_rate<A, B>(a: &[A], b: &[B], directions: &[MetricDirection]) -> Result<f64>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if a.is_empty() {
        return Err(Error::Empty { what: "win-rate instances" });
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "win-rate instances",
            expected: a.len(),
            found: b.len(),
        });
    }
    // half-points: win 2, tie 1, loss 0
    let mut half_points: u128 = 0;
    for (ma, mb) in a.iter().zip(b) {
        let (ma, mb) = (ma.as_ref(), mb.as_ref());
        for m in [ma, mb] {
            if m.len() != directions.len() {
                return Err(Error::LengthMismatch {
                    what: "metric vector",
                    expected: directions.len(),
                    found: m.len(),
                });
            }
        }
        let mut votes_a = 0usize;
        let mut votes_b = 0usize;
        for ((x, y), d) in ma.iter().zip(mb).zip(directions) {
            votes_a += usize::from(d.beats(*x, *y));
            votes_b += usize::from(d.beats(*y, *x));
        }
        half_points += match votes_a.cmp(&votes_b) {
            core::cmp::Ordering::Greater => 2,
            core::cmp::Ordering::Equal => 1,
            core::cmp::Ordering::Less => 0,
        };
    }
    let total = 2 * a.len() as u128;
    const ONE: u128 = 1 << 52;
    // round the smaller side and give the other side the complement
    let k = if 2 * half_points <= total {
        round_ratio(half_points, total, ONE)
    } else {
        ONE - round_ratio(total - half_points, total, ONE)
    };
    Ok(k as f64 / ONE as f64)
}

/// `round(num * scale / den)` with ties rounded up.
fn round_ratio(num: u128, den: u128, scale: u128) -> u128 {
    (2 * num * scale + den) / (2 * den)
}
