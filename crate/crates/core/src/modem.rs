//! Constellations, Gray bit labels, priors from decoder LLRs, and soft
//! demapping of Gaussian extrinsics back to bit LLRs.
//!
//! LLRs are `log p(bit = 0) / p(bit = 1)` everywhere in this crate.
//!
//! # Labelings
//!
//! Points are stored indexed by their label, so `points()[label]` is the
//! symbol carrying `label`. Bit `j` of a label is `(label >> (Q-1-j)) & 1`
//! (most significant bit first).
//!
//! | kind   | point for label `ℓ`                                                    |
//! |--------|------------------------------------------------------------------------|
//! | BPSK   | `ℓ=0 → +1`, `ℓ=1 → −1`                                                  |
//! | 8-PSK  | `exp(j·2πi/8)` where `ℓ = gray(i)`, `i = 0..8` counter-clockwise         |
//! | M-QAM  | `(A_I + j·A_Q)/√(2(M−1)/3)`, `A = 2i − (√M − 1)`, `ℓ = gray(i_I)·√M + gray(i_Q)` |
//!
//! with `gray(i) = i ^ (i >> 1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Complex64, GaussianMsg};

/// Smallest variance any prior or tilted distribution is allowed to carry.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Magnitude limit on LLRs handed from the equalizer to the decoder.
pub const LLR_CLIP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Bpsk,
    #[serde(rename = "8psk")]
    Psk8,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
}

impl ConstellationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Psk8 => "8psk",
            Self::Qam16 => "16qam",
            Self::Qam64 => "64qam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::Bpsk),
            "8psk" | "8-psk" => Ok(Self::Psk8),
            "16qam" | "16-qam" => Ok(Self::Qam16),
            "64qam" | "64-qam" => Ok(Self::Qam64),
            other => Err(Error::InvalidArgument(format!(
                "unknown constellation '{other}'"
            ))),
        }
    }
}

/// Whether Gaussian messages are proper complex or real.
///
/// `Complex` treats every symbol as a circular complex Gaussian. `Real`
/// suits a real constellation over a real channel: the equalizers then see
/// `Re(y)` with noise `σ²/2` and use the density `exp(−(x−μ)²/(2v²))`.
/// [`Domain::natural`] picks between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Complex,
    Real,
}

impl Domain {
    /// `Real` when both the constellation and every tap are real, else
    /// `Complex`.
    pub fn natural(constellation: ConstellationKind, taps: &[[f64; 2]]) -> Domain {
        if constellation == ConstellationKind::Bpsk && taps.iter().all(|t| t[1] == 0.0) {
            Domain::Real
        } else {
            Domain::Complex
        }
    }

    /// `κ` in the log-density `−κ·|x − μ|²/v²`.
    pub fn density_scale(self) -> f64 {
        match self {
            Domain::Complex => 1.0,
            Domain::Real => 0.5,
        }
    }

    /// Noise variance seen by the equalizer for complex noise of total
    /// variance `sigma2`.
    pub fn noise_var(self, sigma2: f64) -> f64 {
        match self {
            Domain::Complex => sigma2,
            Domain::Real => 0.5 * sigma2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    bits_per_symbol: usize,
    energy: f64,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

pub fn build_constellation(kind: ConstellationKind) -> Constellation {
    let points = match kind {
        ConstellationKind::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        ConstellationKind::Psk8 => {
            let mut pts = vec![Complex64::new(0.0, 0.0); 8];
            for i in 0..8 {
                pts[gray(i)] = Complex64::from_polar(1.0, 2.0 * PI * i as f64 / 8.0);
            }
            pts
        }
        ConstellationKind::Qam16 | ConstellationKind::Qam64 => {
            let m = if kind == ConstellationKind::Qam16 {
                16
            } else {
                64
            };
            let side = (m as f64).sqrt() as usize;
            let scale = (2.0 * (m as f64 - 1.0) / 3.0).sqrt();
            let amp = |i: usize| (2 * i) as f64 - (side - 1) as f64;
            let mut pts = vec![Complex64::new(0.0, 0.0); m];
            for ii in 0..side {
                for iq in 0..side {
                    let label = gray(ii) * side + gray(iq);
                    pts[label] = Complex64::new(amp(ii), amp(iq)) / scale;
                }
            }
            pts
        }
    };
    let bits_per_symbol = points.len().trailing_zeros() as usize;
    let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
    Constellation {
        kind,
        points,
        bits_per_symbol,
        energy,
    }
}

impl Constellation {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Bits per symbol `Q = log2(M)`.
    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Mean symbol energy `Es`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn is_real(&self) -> bool {
        self.points.iter().all(|p| p.im == 0.0)
    }

    /// Bit `j` of the label of point `label`.
    #[inline]
    pub fn bit(&self, label: usize, j: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - j)) & 1) as u8
    }

    pub fn label_of(&self, bits: &[u8]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b as usize & 1))
    }

    /// Index of the point closest to `x`.
    pub fn nearest(&self, x: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Maps coded bits onto symbols, `Q` bits per symbol.
pub fn map_bits(bits: &[u8], cst: &Constellation) -> Result<Vec<Complex64>> {
    let q = cst.bits_per_symbol();
    if bits.len() % q != 0 {
        return Err(Error::Dimension(format!(
            "{} bits do not split into {q}-bit symbols",
            bits.len()
        )));
    }
    Ok(bits
        .chunks(q)
        .map(|c| cst.points[cst.label_of(c)])
        .collect())
}

/// Nearest-point hard decisions back to bits.
pub fn hard_demap(symbols: &[Complex64], cst: &Constellation) -> Vec<u8> {
    let q = cst.bits_per_symbol();
    let mut out = Vec::with_capacity(symbols.len() * q);
    for &s in symbols {
        let label = cst.nearest(s);
        out.extend((0..q).map(|j| cst.bit(label, j)));
    }
    out
}

/// Discrete symbol prior and its first two central moments.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPrior {
    pub pmf: Vec<f64>,
    pub mean: Complex64,
    pub var: f64,
}

impl SymbolPrior {
    pub fn uniform(cst: &Constellation) -> Self {
        let m = cst.size();
        Self::from_pmf(vec![1.0 / m as f64; m], cst)
    }

    /// Normalizes `pmf` and computes mean and (floored) variance.
    pub fn from_pmf(mut pmf: Vec<f64>, cst: &Constellation) -> Self {
        let total: f64 = pmf.iter().sum();
        for p in pmf.iter_mut() {
            *p /= total;
        }
        let (mean, var) = discrete_moments(&pmf, cst.points());
        Self {
            pmf,
            mean,
            var: var.max(VARIANCE_FLOOR),
        }
    }

    /// Prior of a symbol known to be zero (outside the frame).
    pub fn known_zero(m: usize) -> Self {
        Self {
            pmf: vec![0.0; m],
            mean: Complex64::new(0.0, 0.0),
            var: 0.0,
        }
    }
}

/// Mean and variance of a pmf over `points`.
pub fn discrete_moments(pmf: &[f64], points: &[Complex64]) -> (Complex64, f64) {
    let mean: Complex64 = pmf.iter().zip(points).map(|(p, a)| a * *p).sum();
    let var = pmf
        .iter()
        .zip(points)
        .map(|(p, a)| p * (a - mean).norm_sqr())
        .sum();
    (mean, var)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Symbol prior from the decoder's LLRs on the `Q` bits of one symbol.
pub fn prior_from_llr(llrs: &[f64], cst: &Constellation) -> SymbolPrior {
    debug_assert_eq!(llrs.len(), cst.bits_per_symbol());
    let m = cst.size();
    // log p(bit = 0) = -softplus(-L), log p(bit = 1) = -softplus(L)
    let logs: Vec<(f64, f64)> = llrs
        .iter()
        .map(|&l| (-softplus(-l), -softplus(l)))
        .collect();
    let logp: Vec<f64> = (0..m)
        .map(|label| {
            logs.iter()
                .enumerate()
                .map(|(j, &(l0, l1))| if cst.bit(label, j) == 0 { l0 } else { l1 })
                .sum()
        })
        .collect();
    let mx = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    SymbolPrior::from_pmf(logp.iter().map(|x| (x - mx).exp()).collect(), cst)
}

/// Mean and variance of `p̂(a) ∝ CN(a; z, v²)·pmf(a)` over the points.
pub fn tilted_moments(
    ext: GaussianMsg,
    pmf: &[f64],
    cst: &Constellation,
    domain: Domain,
) -> (Complex64, f64) {
    let kappa = domain.density_scale() / ext.var;
    let mut logw = [0.0f64; 64];
    let m = cst.size();
    let mut mx = f64::NEG_INFINITY;
    for (i, (a, &p)) in cst.points().iter().zip(pmf).enumerate() {
        let lw = if p > 0.0 {
            p.ln() - kappa * (a - ext.mean).norm_sqr()
        } else {
            f64::NEG_INFINITY
        };
        logw[i] = lw;
        mx = mx.max(lw);
    }
    let mut w = [0.0f64; 64];
    let mut total = 0.0;
    for i in 0..m {
        w[i] = (logw[i] - mx).exp();
        total += w[i];
    }
    for x in w[..m].iter_mut() {
        *x /= total;
    }
    discrete_moments(&w[..m], cst.points())
}

/// Extrinsic bit LLRs of one symbol from its Gaussian extrinsic, clipped to
/// `[-clip, clip]`.
pub fn demap_extrinsic(
    ext: GaussianMsg,
    cst: &Constellation,
    domain: Domain,
    clip: f64,
) -> Vec<f64> {
    let kappa = domain.density_scale() / ext.var;
    let logd: Vec<f64> = cst
        .points()
        .iter()
        .map(|a| -kappa * (a - ext.mean).norm_sqr())
        .collect();
    demap_log_weights(&logd, cst, clip)
}

/// Extrinsic bit LLRs of one symbol from an extrinsic pmf.
pub fn demap_pmf(pmf: &[f64], cst: &Constellation, clip: f64) -> Vec<f64> {
    let logd: Vec<f64> = pmf.iter().map(|p| p.ln()).collect();
    demap_log_weights(&logd, cst, clip)
}

fn demap_log_weights(logd: &[f64], cst: &Constellation, clip: f64) -> Vec<f64> {
    (0..cst.bits_per_symbol())
        .map(|j| {
            let zero = log_sum_exp(
                (0..cst.size())
                    .filter(|&a| cst.bit(a, j) == 0)
                    .map(|a| logd[a]),
            );
            let one = log_sum_exp(
                (0..cst.size())
                    .filter(|&a| cst.bit(a, j) == 1)
                    .map(|a| logd[a]),
            );
            let l = zero - one;
            if l.is_nan() {
                0.0
            } else {
                l.clamp(-clip, clip)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [ConstellationKind; 4] = [
        ConstellationKind::Bpsk,
        ConstellationKind::Psk8,
        ConstellationKind::Qam16,
        ConstellationKind::Qam64,
    ];

    #[test]
    fn bpsk_points_and_labels() {
        let c = build_constellation(ConstellationKind::Bpsk);
        assert_eq!(
            c.points(),
            &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
        );
        assert_eq!(c.bits_per_symbol(), 1);
        assert!(c.is_real());
    }

    #[test]
    fn unit_energy() {
        for k in ALL {
            let c = build_constellation(k);
            let es: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!((es - 1.0).abs() < 1e-12, "{k:?}");
        }
        let c = build_constellation(ConstellationKind::Psk8);
        assert!(c.points().iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn qam16_grid() {
        let c = build_constellation(ConstellationKind::Qam16);
        let s = 10f64.sqrt();
        for p in c.points() {
            for v in [p.re * s, p.im * s] {
                let r = v.round();
                assert!((v - r).abs() < 1e-12 && [-3.0, -1.0, 1.0, 3.0].contains(&r));
            }
        }
        assert_eq!(c.points()[0], Complex64::new(-3.0, -3.0) / s);
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        let psk = build_constellation(ConstellationKind::Psk8);
        for a in 0..8 {
            for b in 0..8 {
                let d = (psk.points()[a] - psk.points()[b]).norm();
                if a != b && d < 0.77 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
        for k in [ConstellationKind::Qam16, ConstellationKind::Qam64] {
            let c = build_constellation(k);
            let step = 2.0 / (2.0 * (c.size() as f64 - 1.0) / 3.0).sqrt();
            for a in 0..c.size() {
                for b in 0..c.size() {
                    let d = (c.points()[a] - c.points()[b]).norm();
                    if (d - step).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{k:?} {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn map_bits_examples() {
        let b = build_constellation(ConstellationKind::Bpsk);
        let u = map_bits(&[0, 1, 1], &b).unwrap();
        assert_eq!(
            u,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(-1.0, 0.0)
            ]
        );
        let q = build_constellation(ConstellationKind::Qam16);
        assert_eq!(map_bits(&[0, 0, 0, 0], &q).unwrap()[0], q.points()[0]);
        assert!(map_bits(&[0, 1, 0], &q).is_err());
    }

    #[test]
    fn hard_demap_inverts_mapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in ALL {
            let c = build_constellation(k);
            let bits: Vec<u8> = (0..c.bits_per_symbol() * 50)
                .map(|_| rng.random_range(0..2))
                .collect();
            assert_eq!(hard_demap(&map_bits(&bits, &c).unwrap(), &c), bits);
        }
    }

    #[test]
    fn flat_llrs_give_uniform_prior() {
        let c = build_constellation(ConstellationKind::Bpsk);
        let p = prior_from_llr(&[0.0], &c);
        assert_eq!(p.pmf, vec![0.5, 0.5]);
        assert!(p.mean.norm() < 1e-15 && (p.var - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bpsk_prior_at_clip_value() {
        let c = build_constellation(ConstellationKind::Bpsk);
        let p = prior_from_llr(&[5.0], &c);
        let s = 1.0 / (1.0 + (-5.0f64).exp());
        assert!((p.pmf[0] - s).abs() < 1e-15 && (p.pmf[0] - 0.9933).abs() < 1e-4);
        assert!((p.mean.re - (2.0 * s - 1.0)).abs() < 1e-14 && (p.mean.re - 0.9866).abs() < 1e-4);
        assert!((p.var - 0.0266).abs() < 1e-4);
    }

    #[test]
    fn qam16_confident_llrs_pick_label_zero() {
        let c = build_constellation(ConstellationKind::Qam16);
        let p = prior_from_llr(&[5.0; 4], &c);
        // enumeration: weight of a label is Π σ(±5) over its bits
        let s = 1.0 / (1.0 + (-5.0f64).exp());
        for label in 0..16 {
            let ones = (label as u32).count_ones() as i32;
            let w = s.powi(4 - ones) * (1.0 - s).powi(ones);
            assert!((p.pmf[label] - w).abs() < 1e-14);
        }
        assert!((p.mean - c.points()[0]).norm() < 0.1);
    }

    #[test]
    fn moments_are_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = build_constellation(ConstellationKind::Qam64);
        for _ in 0..20 {
            let llrs: Vec<f64> = (0..6).map(|_| rng.random_range(-8.0..8.0)).collect();
            let p = prior_from_llr(&llrs, &c);
            let (mut re, mut im) = (0.0, 0.0);
            for i in (0..64).rev() {
                re += p.pmf[i] * c.points()[i].re;
                im += p.pmf[i] * c.points()[i].im;
            }
            let mut e2 = 0.0;
            for i in (0..64).rev() {
                e2 += p.pmf[i] * c.points()[i].norm_sqr();
            }
            let var = e2 - (re * re + im * im);
            assert!((p.mean - Complex64::new(re, im)).norm() < 1e-13);
            assert!((p.var.max(VARIANCE_FLOOR) - var.max(VARIANCE_FLOOR)).abs() < 1e-12);
        }
    }

    #[test]
    fn bpsk_demap_values() {
        let c = build_constellation(ConstellationKind::Bpsk);
        for v in [0.1, 1.0, 7.0] {
            let l = demap_extrinsic(
                GaussianMsg::real(0.0, v).unwrap(),
                &c,
                Domain::Complex,
                LLR_CLIP,
            );
            assert_eq!(l, vec![0.0]);
        }
        let l = demap_extrinsic(
            GaussianMsg::real(1.0, 1.0).unwrap(),
            &c,
            Domain::Complex,
            LLR_CLIP,
        );
        // (|z+1|² - |z-1|²)/v² = 4
        assert!((l[0] - 4.0).abs() < 1e-12);
        let l = demap_extrinsic(
            GaussianMsg::real(1.0, 1.0).unwrap(),
            &c,
            Domain::Real,
            f64::INFINITY,
        );
        assert!((l[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn psk8_on_point_saturates() {
        let c = build_constellation(ConstellationKind::Psk8);
        for label in 0..8 {
            let ext = GaussianMsg::new(c.points()[label], 1e-3).unwrap();
            let l = demap_extrinsic(ext, &c, Domain::Complex, LLR_CLIP);
            for (j, x) in l.iter().enumerate() {
                let want = if c.bit(label, j) == 0 {
                    LLR_CLIP
                } else {
                    -LLR_CLIP
                };
                assert_eq!(*x, want);
            }
        }
    }

    #[test]
    fn prior_then_demap_recovers_labels() {
        for k in ALL {
            let c = build_constellation(k);
            for label in 0..c.size() {
                let llrs: Vec<f64> = (0..c.bits_per_symbol())
                    .map(|j| if c.bit(label, j) == 0 { 20.0 } else { -20.0 })
                    .collect();
                let p = prior_from_llr(&llrs, &c);
                let ext = GaussianMsg::new(p.mean, 1e-4).unwrap();
                let l = demap_extrinsic(ext, &c, Domain::Complex, LLR_CLIP);
                for (j, x) in l.iter().enumerate() {
                    assert_eq!(*x > 0.0, c.bit(label, j) == 0);
                }
            }
        }
    }

    #[test]
    fn tilted_moments_with_flat_gaussian_equal_prior_moments() {
        let c = build_constellation(ConstellationKind::Psk8);
        let p = prior_from_llr(&[1.0, -0.5, 2.0], &c);
        let (m, v) = tilted_moments(
            GaussianMsg::real(0.0, 1e12).unwrap(),
            &p.pmf,
            &c,
            Domain::Complex,
        );
        assert!((m - p.mean).norm() < 1e-9 && (v - p.var).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn demap_invariant_to_log_offset(zr in -2.0f64..2.0, zi in -2.0f64..2.0, v in 0.05f64..3.0, off in -50.0f64..50.0) {
            let c = build_constellation(ConstellationKind::Qam16);
            let ext = GaussianMsg::new(Complex64::new(zr, zi), v).unwrap();
            let base = demap_extrinsic(ext, &c, Domain::Complex, f64::INFINITY);
            let logd: Vec<f64> = c.points().iter().map(|a| -(a - ext.mean).norm_sqr() / v + off).collect();
            let shifted = demap_log_weights(&logd, &c, f64::INFINITY);
            for (a, b) in base.iter().zip(&shifted) {
                proptest::prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
