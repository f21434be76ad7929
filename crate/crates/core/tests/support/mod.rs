//! Independent oracles shared by the integration suites. Nothing here calls
//! into the optimized code paths it is compared against.

#![allow(dead_code)]

/// Direct 1-based evaluation of the truncated long-run variance sums.
#[derive(Debug, Clone, Copy)]
pub struct NaiveComponents {
    pub kappa_sq: f64,
    pub tau_sq: f64,
    pub nu: f64,
    pub rho: f64,
    pub sigma_sq: f64,
    pub gamma_sq_raw: f64,
}

pub fn naive_bandwidth(n: usize, k: usize) -> usize {
    let mut c = 0usize;
    while (c + 1).pow(3) <= n {
        c += 1;
    }
    (c + 1).min(n - k - 2)
}

pub fn naive_components(x: &[f64], k: usize, b: usize) -> NaiveComponents {
    let n = x.len();
    // 1-based accessors.
    let xs = |i: usize| x[i - 1];
    let mut xbar = 0.0;
    for i in 1..=n {
        xbar += xs(i);
    }
    xbar /= n as f64;
    let y = |i: usize| (xs(i) - xbar) * (xs(i + k) - xbar);
    let z = |i: usize| (xs(i) - xbar) * (xs(i) - xbar);

    let mut ybar = 0.0;
    for i in 1..=n - k {
        ybar += y(i);
    }
    ybar /= (n - k) as f64;
    let mut zbar = 0.0;
    for i in 1..=n {
        zbar += z(i);
    }
    zbar /= n as f64;

    let nf = n as f64;
    let mut kappa = 0.0;
    for i in 1..=n {
        kappa += (z(i) - zbar).powi(2);
    }
    kappa /= nf;
    for j in 1..=b {
        for i in 1..=n - j {
            kappa += 2.0 / nf * (z(i) - zbar) * (z(i + j) - zbar);
        }
    }

    let mut tau = 0.0;
    for i in 1..=n - k {
        tau += (y(i) - ybar).powi(2);
    }
    tau /= nf;
    for j in 1..=b {
        if n - k > j {
            for i in 1..=n - j - k {
                tau += 2.0 / nf * (y(i) - ybar) * (y(i + j) - ybar);
            }
        }
    }

    let mut nu = 0.0;
    for i in 1..=n - k {
        nu += (y(i) - ybar) * (z(i) - zbar) / nf;
    }
    for j in 1..=b {
        if n - k > j {
            for i in 1..=n - j - k {
                nu += (z(i) - zbar) * (y(i + j) - ybar) / nf;
            }
        }
        for i in 1..=(n - j).min(n - k) {
            nu += (y(i) - ybar) * (z(i + j) - zbar) / nf;
        }
    }

    let mut sigma_sq = 0.0;
    for i in 1..=n {
        sigma_sq += (xs(i) - xbar).powi(2);
    }
    sigma_sq /= nf;
    let mut c = 0.0;
    for i in 1..=n - k {
        c += (xs(i) - xbar) * (xs(i + k) - xbar);
    }
    c /= (n - k) as f64;
    let rho = c / sigma_sq;

    NaiveComponents {
        kappa_sq: kappa,
        tau_sq: tau,
        nu,
        rho,
        sigma_sq,
        gamma_sq_raw: (tau - 2.0 * rho * nu + rho * rho * kappa) / (sigma_sq * sigma_sq),
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Standard normal CDF via a series/continued-fraction erfc.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// erfc with ~1e-14 accuracy: Taylor series near zero, continued fraction in the tails.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let mut sum = 0.0;
        let mut term = x;
        let mut k = 0.0;
        loop {
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() < 1e-17 {
                break;
            }
            k += 1.0;
            term *= -x * x / k;
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Lentz continued fraction for erfc.
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for i in 1..300 {
            let a = i as f64 / 2.0;
            d = x + a * d;
            d = 1.0 / d;
            c = x + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
    }
}
