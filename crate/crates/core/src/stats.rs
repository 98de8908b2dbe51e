//! Small order-stable summaries.

/// Neumaier-compensated sum, accumulated in iteration order.
pub fn sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut n = 0usize;
    let s = sum(xs.into_iter().inspect(|_| n += 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Mean and standard error of the mean (`sd / √n`, with the `n - 1` denominator).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs.iter().copied());
    if n < 2 {
        return (m, 0.0);
    }
    let ss = sum(xs.iter().map(|x| (x - m).powi(2)));
    (m, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
