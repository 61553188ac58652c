use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};

use crate::error::{Error, Result};

/// Error distributions; every family has mean zero and (marginal) unit variance
/// except the heteroscedastic one, whose conditional variance is `(1 + 3x^2)/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorFamily {
    #[default]
    Gaussian,
    /// `Exp(1) - 1`.
    Exponential,
    /// Student t with 5 degrees of freedom divided by `sqrt(5/3)`.
    Student5,
    /// `N(0, (1 + 3x^2)/3)`.
    Heteroscedastic,
}

impl ErrorFamily {
    pub fn conditional_variance(&self, x: f64) -> f64 {
        match self {
            ErrorFamily::Heteroscedastic => (1.0 + 3.0 * x * x) / 3.0,
            _ => 1.0,
        }
    }

    pub fn sample<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        match self {
            ErrorFamily::Gaussian => rng.sample(StandardNormal),
            ErrorFamily::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            ErrorFamily::Student5 => {
                let t = StudentT::new(5.0).expect("valid degrees of freedom");
                t.sample(rng) / (5.0f64 / 3.0).sqrt()
            }
            ErrorFamily::Heteroscedastic => {
                let z: f64 = rng.sample(StandardNormal);
                z * self.conditional_variance(x).sqrt()
            }
        }
    }
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorFamily::Gaussian => "gaussian",
            ErrorFamily::Exponential => "exponential",
            ErrorFamily::Student5 => "student5",
            ErrorFamily::Heteroscedastic => "heteroscedastic",
        })
    }
}

impl FromStr for ErrorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" | "normal" => Ok(ErrorFamily::Gaussian),
            "exponential" | "exponential-centered" => Ok(ErrorFamily::Exponential),
            "student5" | "student" | "student5-standardized" => Ok(ErrorFamily::Student5),
            "heteroscedastic" | "heteroscedastic-gaussian" => Ok(ErrorFamily::Heteroscedastic),
            other => Err(Error::InvalidConfig(format!("unknown error family '{other}'"))),
        }
    }
}

/// `Y = theta1 + theta2 X + r cos(2 pi t X) + eps` with `X ~ U[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub theta1: f64,
    pub theta2: f64,
    pub amplitude: f64,
    pub frequency: u32,
    pub errors: ErrorFamily,
    pub n: usize,
}

/// Amplitude of the cosine alternatives.
pub fn alternative_amplitude() -> f64 {
    (2.0f64 / 3.0).sqrt()
}

impl DgpSpec {
    pub fn null(n: usize, errors: ErrorFamily) -> Self {
        Self {
            theta1: 0.0,
            theta2: 0.0,
            amplitude: 0.0,
            frequency: 0,
            errors,
            n,
        }
    }

    pub fn alternative(n: usize, frequency: u32, errors: ErrorFamily) -> Self {
        Self {
            amplitude: alternative_amplitude(),
            frequency,
            ..Self::null(n, errors)
        }
    }

    pub fn mean(&self, x: f64) -> f64 {
        self.theta1 + self.theta2 * x + self.amplitude * (2.0 * PI * self.frequency as f64 * x).cos()
    }
}

/// Draws one sample; `(seed, replicate)` selects an independent stream.
pub fn generate_dgp(spec: &DgpSpec, seed: u64, replicate: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let x: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let y = x
        .iter()
        .map(|&xi| spec.mean(xi) + spec.errors.sample(xi, &mut rng))
        .collect();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_when_null() {
        let spec = DgpSpec::null(20, ErrorFamily::Gaussian);
        let (x, y) = generate_dgp(&spec, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        rng.set_stream(0);
        let x2: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let eps: Vec<f64> = (0..20).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        assert_eq!(x, x2);
        assert_eq!(y, eps);
        assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn signal_to_noise_is_one_third() {
        // Midpoint rule for E[r^2 cos^2(2 pi t X)] with X ~ U[-1,1].
        let r2 = alternative_amplitude().powi(2);
        for t in [2u32, 5, 10] {
            let m = 200_000;
            let mean: f64 = (0..m)
                .map(|k| {
                    let x = -1.0 + (k as f64 + 0.5) * 2.0 / m as f64;
                    r2 * (2.0 * PI * t as f64 * x).cos().powi(2)
                })
                .sum::<f64>()
                / m as f64;
            assert!((mean - 1.0 / 3.0).abs() < 1e-9, "t = {t}: {mean}");
        }
    }

    #[test]
    fn heteroscedastic_marginal_variance() {
        let spec = DgpSpec::null(1_000_000, ErrorFamily::Heteroscedastic);
        let (_, y) = generate_dgp(&spec, 17, 0);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        assert!((var - 2.0 / 3.0).abs() < 0.01 * 2.0 / 3.0, "{var}");
    }

    #[test]
    fn unit_variance_families() {
        for fam in [ErrorFamily::Gaussian, ErrorFamily::Exponential, ErrorFamily::Student5] {
            let (_, y) = generate_dgp(&DgpSpec::null(400_000, fam), 5, 2);
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
            assert!(mean.abs() < 0.01, "{fam}: mean {mean}");
            assert!((var - 1.0).abs() < 0.03, "{fam}: var {var}");
        }
    }
}
