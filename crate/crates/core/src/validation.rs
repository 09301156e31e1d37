//! Self-checks of the fast equalizer paths against dense or exhaustive
//! reference computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{convolve, transmit, ChannelModel, WindowSpec};
use crate::equalizers::{
    bcjr_equalize, block_lmmse_equalize, epf_equalize, filter_window, lmmse_filter_equalize,
    nubep_equalize, posterior_moments, EpParams, Extrinsic, Problem,
};
use crate::error::{Error, Result};
use crate::modem::{
    build_constellation, prior_from_llr, Constellation, ConstellationKind, Domain, SymbolPrior,
};
use crate::numerics::{hermitian_solve, Complex64, ComplexMat, GaussianMsg};

/// The available check suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Banded Woodbury posterior against the dense information form.
    Woodbury,
    /// Window filter extrinsic against the dense windowed cavity.
    WindowCavity,
    /// Trellis equalizer against exhaustive enumeration.
    Bcjr,
    /// First EP passes against the LMMSE equalizers.
    FirstPass,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Woodbury,
        Suite::WindowCavity,
        Suite::Bcjr,
        Suite::FirstPass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Woodbury => "woodbury",
            Suite::WindowCavity => "window-cavity",
            Suite::Bcjr => "bcjr",
            Suite::FirstPass => "first-pass",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown check suite `{s}`")))
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::Woodbury => 1e-9,
            Suite::WindowCavity | Suite::FirstPass => 1e-12,
            Suite::Bcjr => 1e-10,
        }
    }
}

/// Settings shared by all suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidateOptions {
    pub instances: usize,
    pub seed: u64,
    /// Negate the first channel tap on the fast path only.
    pub corrupt_tap_sign: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            instances: 100,
            seed: 7,
            corrupt_tap_sign: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub suite: Suite,
    pub instances: usize,
    pub tolerance: f64,
    /// Worst residual over all instances.
    pub residual: f64,
    pub passed: bool,
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ suite as u64);
    let mut worst = 0.0f64;
    for _ in 0..opts.instances {
        let r = match suite {
            Suite::Woodbury => woodbury_instance(&mut rng, opts.corrupt_tap_sign)?,
            Suite::WindowCavity => window_instance(&mut rng, opts.corrupt_tap_sign)?,
            Suite::Bcjr => bcjr_instance(&mut rng, opts.corrupt_tap_sign)?,
            Suite::FirstPass => first_pass_instance(&mut rng, opts.corrupt_tap_sign)?,
        };
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(CheckReport {
        suite,
        instances: opts.instances,
        tolerance: suite.tolerance(),
        residual: worst,
        passed: worst <= suite.tolerance(),
    })
}

fn crandn<R: Rng>(rng: &mut R, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

fn random_channel<R: Rng>(rng: &mut R, max_taps: usize) -> Result<ChannelModel> {
    let l = rng.random_range(1..=max_taps);
    let mut taps: Vec<Complex64> = (0..l).map(|_| crandn(rng, 1.0)).collect();
    taps[0] += Complex64::new(0.5, 0.0);
    ChannelModel::new(taps, rng.random_range(0.05..1.0))
}

fn corrupted(ch: &ChannelModel, corrupt: bool) -> Result<ChannelModel> {
    let mut taps = ch.taps().to_vec();
    if corrupt {
        taps[0] = -taps[0];
    }
    ChannelModel::new(taps, ch.noise_var())
}

fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn msg_diff(a: &GaussianMsg, b: &GaussianMsg) -> f64 {
    rel_diff(a.mean, b.mean).max((a.var - b.var).abs() / b.var.abs().max(1.0))
}

/// Posterior moments from the information form
/// `Σ = (HᴴH/σ² + Λ⁻¹)⁻¹`, `μ = Σ(Hᴴy/σ² + Λ⁻¹m)`.
fn dense_posterior(
    h: &ComplexMat,
    y: &[Complex64],
    nv: f64,
    m: &[Complex64],
    eta: &[f64],
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let v = m.len();
    let hh = h.conj_transpose();
    let mut p = hh.matmul(h)?.scale(1.0 / nv);
    for k in 0..v {
        p[(k, k)] += 1.0 / eta[k];
    }
    let rhs: Vec<Complex64> = hh
        .mul_vec(y)?
        .iter()
        .zip(m.iter().zip(eta))
        .map(|(a, (mk, ek))| a / nv + mk / ek)
        .collect();
    let sigma = hermitian_solve(&p, &ComplexMat::identity(v))?;
    let mean = sigma.mul_vec(&rhs)?;
    Ok((mean, (0..v).map(|k| sigma[(k, k)].re).collect()))
}

fn woodbury_instance<R: Rng>(rng: &mut R, corrupt: bool) -> Result<f64> {
    let ch = random_channel(rng, 5)?;
    let v = rng.random_range(1..=32);
    let m: Vec<Complex64> = (0..v).map(|_| crandn(rng, 1.0)).collect();
    let eta: Vec<f64> = (0..v).map(|_| rng.random_range(0.05..2.0)).collect();
    let u: Vec<Complex64> = (0..v).map(|_| crandn(rng, 1.0)).collect();
    let y = transmit(&u, &ch, rng);
    let h = crate::channel::build_block_matrix(&ch, v);
    let (mu_ref, var_ref) = dense_posterior(&h, &y, ch.noise_var(), &m, &eta)?;
    let fast = corrupted(&ch, corrupt)?;
    let (mu, var) = posterior_moments(&y, fast.taps(), ch.noise_var(), &m, &eta)?;
    let scale_mu = mu_ref.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let scale_var = var_ref.iter().copied().fold(0.0, f64::max);
    let dm = mu
        .iter()
        .zip(&mu_ref)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / scale_mu;
    let dv = var
        .iter()
        .zip(&var_ref)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale_var;
    Ok(dm.max(dv))
}

fn window_instance<R: Rng>(rng: &mut R, corrupt: bool) -> Result<f64> {
    let ch = random_channel(rng, 5)?;
    let l = ch.len();
    let cst = build_constellation(ConstellationKind::Qam16);
    let ws = WindowSpec {
        n1: rng.random_range(0..=2 * l),
        n2: rng.random_range(l.saturating_sub(1)..=l + 2),
    };
    let w = ws.len();
    if w < l {
        return window_instance(rng, corrupt);
    }
    // interior symbol, so every window column is a real symbol
    let k = l + ws.n2 + rng.random_range(0..4);
    let v = k + ws.n1 + 1 + rng.random_range(0..4);
    let m: Vec<Complex64> = (0..v).map(|_| crandn(rng, 1.0)).collect();
    let eta: Vec<f64> = (0..v).map(|_| rng.random_range(0.05..2.0)).collect();
    let u: Vec<Complex64> = (0..v)
        .map(|_| cst.points()[rng.random_range(0..cst.size())])
        .collect();
    let y = transmit(&u, &ch, rng);
    let es = cst.energy();

    let first = k + 1 - l - ws.n2;
    let cols = w + l - 1;
    let taps = ch.taps();
    let hw = ComplexMat::from_fn(w, cols, |r, c| {
        (r + l - 1)
            .checked_sub(c)
            .filter(|&j| j < l)
            .map_or(Complex64::new(0.0, 0.0), |j| taps[j])
    });
    let yw: Vec<Complex64> = (0..w).map(|r| y[k - ws.n2 + r]).collect();
    let centre = ws.n2 + l - 1;
    let mw: Vec<Complex64> = (0..cols).map(|c| m[first + c]).collect();
    let mut ew: Vec<f64> = (0..cols).map(|c| eta[first + c]).collect();
    ew[centre] = es;
    let (mu, var) = dense_posterior(&hw, &yw, ch.noise_var(), &mw, &ew)?;
    let cav_var = 1.0 / (1.0 / var[centre] - 1.0 / es);
    let cav_mean = cav_var * (mu[centre] / var[centre] - mw[centre] / es);
    let oracle = GaussianMsg {
        mean: cav_mean,
        var: cav_var,
    };

    let fast = corrupted(&ch, corrupt)?;
    let p = Problem::new(&y, &fast, &cst, Domain::Complex);
    let got = filter_window(&p, ws, &m, &eta, k)?
        .extrinsic(es)
        .ok_or_else(|| Error::InvalidArgument("degenerate window".into()))?;
    Ok(msg_diff(&got, &oracle))
}

/// Extrinsic pmfs by enumerating every transmitted sequence.
pub fn brute_force_extrinsic(
    y: &[Complex64],
    ch: &ChannelModel,
    cst: &Constellation,
    priors: &[SymbolPrior],
) -> Vec<Vec<f64>> {
    let v = priors.len();
    let mm = cst.size();
    let total = mm.pow(v as u32);
    let mut logs = Vec::with_capacity(total);
    for idx in 0..total {
        let labels: Vec<usize> = (0..v).map(|k| idx / mm.pow(k as u32) % mm).collect();
        let u: Vec<Complex64> = labels.iter().map(|&a| cst.points()[a]).collect();
        let ll = -convolve(&u, ch.taps())
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / ch.noise_var();
        logs.push((labels, ll));
    }
    let mut ext = vec![vec![0.0; mm]; v];
    let mx = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    for (labels, ll) in &logs {
        let joint: f64 = labels
            .iter()
            .enumerate()
            .map(|(k, &a)| priors[k].pmf[a])
            .product();
        let w = (ll - mx).exp() * joint;
        for (k, &a) in labels.iter().enumerate() {
            ext[k][a] += w / priors[k].pmf[a];
        }
    }
    for row in ext.iter_mut() {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    ext
}

fn random_llr_priors<R: Rng>(rng: &mut R, cst: &Constellation, v: usize) -> Vec<SymbolPrior> {
    (0..v)
        .map(|_| {
            let llr: Vec<f64> = (0..cst.bits_per_symbol())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            prior_from_llr(&llr, cst)
        })
        .collect()
}

fn bcjr_instance<R: Rng>(rng: &mut R, corrupt: bool) -> Result<f64> {
    let ch = random_channel(rng, 3)?;
    let cst = build_constellation(ConstellationKind::Bpsk);
    let v = rng.random_range(1..=8);
    let u: Vec<Complex64> = (0..v)
        .map(|_| cst.points()[rng.random_range(0..2)])
        .collect();
    let y = transmit(&u, &ch, rng);
    let priors = random_llr_priors(rng, &cst, v);
    let oracle = brute_force_extrinsic(&y, &ch, &cst, &priors);
    let fast = corrupted(&ch, corrupt)?;
    let rep = bcjr_equalize(&Problem::new(&y, &fast, &cst, Domain::Complex), &priors)?;
    let Extrinsic::Pmf(got) = rep.extrinsic else {
        return Err(Error::InvalidArgument(
            "trellis equalizer returned Gaussian messages".into(),
        ));
    };
    Ok(got
        .iter()
        .flatten()
        .zip(oracle.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn first_pass_instance<R: Rng>(rng: &mut R, corrupt: bool) -> Result<f64> {
    let ch = random_channel(rng, 4)?;
    let kinds = [
        ConstellationKind::Bpsk,
        ConstellationKind::Psk8,
        ConstellationKind::Qam16,
    ];
    let cst = build_constellation(kinds[rng.random_range(0..kinds.len())]);
    let v = rng.random_range(4..=40);
    let u: Vec<Complex64> = (0..v)
        .map(|_| cst.points()[rng.random_range(0..cst.size())])
        .collect();
    let y = transmit(&u, &ch, rng);
    let priors = random_llr_priors(rng, &cst, v);
    let ws = WindowSpec::for_taps(ch.len());
    let reference = Problem::new(&y, &ch, &cst, Domain::Complex);
    let fast_ch = corrupted(&ch, corrupt)?;
    let fast = Problem::new(&y, &fast_ch, &cst, Domain::Complex);
    let params = EpParams::nubep();
    let pairs = [
        (
            nubep_equalize(&fast, &priors, &params, 0)?.first_pass,
            block_lmmse_equalize(&reference, &priors)?,
        ),
        (
            epf_equalize(&fast, &priors, ws, &params, 0)?.first_pass,
            lmmse_filter_equalize(&reference, &priors, ws)?,
        ),
    ];
    let mut worst = 0.0f64;
    for (first, lin) in &pairs {
        let lin = lin.gaussian().unwrap_or(&[]);
        if first.len() != lin.len() {
            return Err(Error::Dimension(
                "first pass and LMMSE lengths differ".into(),
            ));
        }
        worst = first
            .iter()
            .zip(lin)
            .map(|(a, b)| msg_diff(a, b))
            .fold(worst, f64::max);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let opts = ValidateOptions {
            instances: 20,
            ..ValidateOptions::default()
        };
        for s in Suite::ALL {
            let r = run_suite(s, &opts).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn tap_sign_fault_is_caught() {
        let opts = ValidateOptions {
            instances: 10,
            corrupt_tap_sign: true,
            ..ValidateOptions::default()
        };
        for s in Suite::ALL {
            let r = run_suite(s, &opts).unwrap();
            assert!(!r.passed, "{r:?}");
        }
    }

    #[test]
    fn names() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()).unwrap(), s);
        }
        assert!(Suite::parse("nope").is_err());
    }
}
