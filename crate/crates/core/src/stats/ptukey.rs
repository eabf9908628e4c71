//! Studentized range distribution by fixed-node quadrature.
//!
//! `P(Q ≤ q) = ∫ f_S(s) · R(q s) ds` with `S = sqrt(χ²_ν / ν)` and
//! `R(w) = k ∫ φ(z) [Φ(z) − Φ(z − w)]^(k−1) dz`. Both integrals use
//! composite Gauss–Legendre rules on fixed nodes, so the result is a
//! positively weighted sum of terms nondecreasing in `q`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const Z_LO: f64 = -8.5;
const Z_HI: f64 = 8.5;
const Z_PANELS: usize = 40;
const S_PANELS: usize = 48;
/// Beyond this many degrees of freedom the chi factor is treated as 1.
const DF_INFINITE: f64 = 25_000.0;

pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn composite(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * GL_NODES.len());
    for p in 0..panels {
        let mid = lo + h * (p as f64 + 0.5);
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Inner nodes with `(z, weight · φ(z), Φ(z))` precomputed.
fn inner_nodes() -> &'static [(f64, f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        composite(Z_LO, Z_HI, Z_PANELS).into_iter().map(|(z, w)| (z, w * norm_pdf(z), norm_cdf(z))).collect()
    })
}

/// Probability that the range of `k` standard normals is at most `w`.
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let e = (k - 1) as i32;
    let sum: f64 = inner_nodes().iter().map(|&(z, wp, cz)| wp * (cz - norm_cdf(z - w)).max(0.0).powi(e)).sum();
    (k as f64 * sum).clamp(0.0, 1.0)
}

/// CDF of the studentized range for `k ≥ 2` means and `df > 0`.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2 && df > 0.0, "ptukey needs k >= 2 and df > 0");
    if q.is_nan() || q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df >= DF_INFINITE {
        return range_cdf(q, k);
    }
    // Density of S = sqrt(χ²_ν/ν): log f(s) = c + (ν−1) ln s − ν s²/2.
    let c = (df / 2.0) * df.ln() - ln_gamma(df / 2.0) - (df / 2.0 - 1.0) * 2f64.ln();
    let spread = 9.0 / df.sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + 1.5 * spread;
    let sum: f64 = composite(lo, hi, S_PANELS)
        .into_iter()
        .map(|(s, w)| {
            let dens = (c + (df - 1.0) * s.ln() - df * s * s / 2.0).exp();
            w * dens * range_cdf(q * s, k)
        })
        .sum();
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn two_groups_reduce_to_student_t() {
        for &df in &[2.0, 5.0, 12.0, 40.0, 300.0] {
            let t = StudentsT::new(0.0, 1.0, df).unwrap();
            for &q in &[0.3, 1.0, 1.7321, 2.5, 3.6, 5.0] {
                let x = q / 2f64.sqrt();
                let expected = t.cdf(x) - t.cdf(-x);
                let got = ptukey(q, 2, df);
                assert!((got - expected).abs() < 1e-7, "df {df} q {q}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn infinite_df_two_groups() {
        for &q in &[0.5, 2.0, 4.0] {
            let expected = 2.0 * norm_cdf(q / 2f64.sqrt()) - 1.0;
            assert!((ptukey(q, 2, 1e9) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn known_critical_values() {
        // Upper 5% points of the studentized range.
        for &(q, k, df) in &[(3.877, 3, 10.0), (4.302, 6, 30.0), (3.356, 3, 120.0), (4.508, 5, 12.0)] {
            let p = ptukey(q, k, df);
            assert!((p - 0.95).abs() < 1.5e-3, "k {k} df {df}: {p}");
        }
    }
}
