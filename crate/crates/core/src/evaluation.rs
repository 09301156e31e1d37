//! Monte-Carlo BER sweeps, EXIT-chart measurement and CSV output.

use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ebn0_to_noise_var, transmit, ChannelModel};
use crate::coding::LdpcCode;
use crate::equalizers::{Diagnostics, Equalizer, Problem};
use crate::error::{Error, Result};
use crate::modem::{
    build_constellation, map_bits, prior_from_llr, softplus, ConstellationKind, Domain,
};
use crate::numerics::Complex64;
use crate::turbo::{derive_seed, frame_seed, Link, LinkConfig};

/// Frames simulated between stopping-rule checks.
pub const SWEEP_BATCH: usize = 20;

const J_STEP: f64 = 0.01;
/// Largest tabulated `σ`; `J(σ_max)` is 1 to double precision.
pub const J_SIGMA_MAX: f64 = 60.0;

fn j_quadrature(sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    // L = σ²/2 + σx with x standard normal, Simpson on [-10, 10]
    const N: usize = 800;
    let h = 20.0 / N as f64;
    let mut acc = 0.0;
    for i in 0..=N {
        let x = -10.0 + i as f64 * h;
        let w = if i == 0 || i == N {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let l = sigma * sigma / 2.0 + sigma * x;
        acc += w * (-0.5 * x * x).exp() * softplus(-l);
    }
    let expect = acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt();
    (1.0 - expect / std::f64::consts::LN_2).clamp(0.0, 1.0)
}

fn j_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (J_SIGMA_MAX / J_STEP).round() as usize;
        let mut t: Vec<f64> = (0..=n).map(|i| j_quadrature(i as f64 * J_STEP)).collect();
        // enforce monotonicity against quadrature round-off near 1
        for i in 1..t.len() {
            t[i] = t[i].max(t[i - 1]);
        }
        t
    })
}

/// Mutual information between a bit and its consistent-Gaussian LLR
/// `L ~ N(±σ²/2, σ²)`.
pub fn j_function(sigma: f64) -> f64 {
    let t = j_table();
    let s = sigma.abs() / J_STEP;
    let i = s.floor() as usize;
    if i + 1 >= t.len() {
        return t[t.len() - 1];
    }
    let f = s - i as f64;
    t[i] + f * (t[i + 1] - t[i])
}

/// Inverse of [`j_function`], by bisection; clamps to `[0, J_SIGMA_MAX]`.
pub fn j_inverse(mi: f64) -> f64 {
    if mi <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, J_SIGMA_MAX);
    if mi >= j_function(hi) {
        return hi;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if j_function(mid) < mi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Time-average estimate `1 − E[log₂(1 + e^{−(1−2c)L})]`.
pub fn mutual_information(bits: &[u8], llrs: &[f64]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    let s: f64 = bits
        .iter()
        .zip(llrs)
        .map(|(&c, &l)| softplus(if c == 0 { -l } else { l }))
        .sum();
    1.0 - s / std::f64::consts::LN_2 / bits.len() as f64
}

/// Consistent-Gaussian a-priori LLRs for `bits` with the given `σ`.
pub fn apriori_llrs<R: Rng + ?Sized>(bits: &[u8], sigma: f64, rng: &mut R) -> Vec<f64> {
    bits.iter()
        .map(|&c| {
            let sign = if c == 0 { 1.0 } else { -1.0 };
            let n: f64 = rng.sample(StandardNormal);
            sign * sigma * sigma / 2.0 + sigma * n
        })
        .collect()
}

/// One BER point at one turbo iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub eb_n0_db: f64,
    /// Completed equalizer/decoder rounds, starting at 1.
    pub turbo_iter: usize,
    pub frames: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

/// One point of an EXIT curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub i_in: f64,
    pub i_out: f64,
    /// `NaN` for the decoder curve.
    pub eb_n0_db: f64,
    pub equalizer: String,
}

/// Stopping rule and parallelism of [`ber_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub min_frames: usize,
    pub min_errors: u64,
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    #[serde(default)]
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            min_frames: 200,
            min_errors: 100,
            seed: 1,
            workers: 0,
        }
    }
}

/// Aggregate of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub records: Vec<BerRecord>,
    pub diagnostics: Diagnostics,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Simulates one Eb/N0 point. Frames run in batches of [`SWEEP_BATCH`] and
/// the point stops at the first batch boundary where either `min_frames`
/// frames have run or the last turbo iteration has collected `min_errors`
/// bit errors.
pub fn ber_point(link: &Link, point: usize, opts: &SweepOptions) -> Result<PointResult> {
    if opts.min_frames == 0 {
        return Err(Error::InvalidArgument("min_frames must be positive".into()));
    }
    let t_max = link.config().turbo_iterations;
    let k = link.code().k() as u64;
    let mut errors = vec![0u64; t_max];
    let mut diagnostics = Diagnostics::default();
    let mut frames = 0usize;
    while frames < opts.min_frames && errors[t_max - 1] < opts.min_errors {
        let end = (frames + SWEEP_BATCH).min(opts.min_frames);
        let results: Vec<_> = (frames..end)
            .into_par_iter()
            .map(|f| link.run_frame(frame_seed(opts.seed, point, f)))
            .collect::<Result<_>>()?;
        for r in &results {
            for (e, &b) in errors.iter_mut().zip(&r.bit_errors) {
                *e += b as u64;
            }
            diagnostics.merge(&r.diagnostics);
        }
        frames = end;
    }
    let eb_n0_db = link.config().eb_n0_db;
    let records = errors
        .iter()
        .enumerate()
        .map(|(t, &e)| BerRecord {
            eb_n0_db,
            turbo_iter: t + 1,
            frames: frames as u64,
            bit_errors: e,
            ber: e as f64 / (frames as u64 * k) as f64,
        })
        .collect();
    Ok(PointResult {
        records,
        diagnostics,
    })
}

/// BER at every grid point and turbo iteration, deterministic in
/// `(template, grid, opts.seed)` whatever the worker count.
pub fn ber_sweep(
    template: &LinkConfig,
    grid: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<BerRecord>> {
    Ok(ber_sweep_detailed(template, grid, opts)?
        .into_iter()
        .flat_map(|p| p.records)
        .collect())
}

pub fn ber_sweep_detailed(
    template: &LinkConfig,
    grid: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<PointResult>> {
    ber_sweep_observed(template, grid, opts, |_| {})
}

/// [`ber_sweep_detailed`] calling `on_point` as each grid point finishes.
pub fn ber_sweep_observed(
    template: &LinkConfig,
    grid: &[f64],
    opts: &SweepOptions,
    mut on_point: impl FnMut(&PointResult) + Send,
) -> Result<Vec<PointResult>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty Eb/N0 grid".into()));
    }
    let base = Link::new(template.clone(), opts.seed)?;
    let pool = pool(opts.workers)?;
    pool.install(|| {
        grid.iter()
            .enumerate()
            .map(|(i, &db)| {
                let cfg = LinkConfig {
                    eb_n0_db: db,
                    ..template.clone()
                };
                let link = Link::with_code(cfg, base.code().clone())?;
                let r = ber_point(&link, i, opts)?;
                on_point(&r);
                Ok(r)
            })
            .collect()
    })
}

/// Lowest grid Eb/N0 at which the BER of turbo iteration `turbo_iter` is at
/// or below `threshold`.
pub fn first_crossing(records: &[BerRecord], turbo_iter: usize, threshold: f64) -> Option<f64> {
    let mut pts: Vec<&BerRecord> = records
        .iter()
        .filter(|r| r.turbo_iter == turbo_iter)
        .collect();
    pts.sort_by(|a, b| a.eb_n0_db.total_cmp(&b.eb_n0_db));
    pts.iter().find(|r| r.ber <= threshold).map(|r| r.eb_n0_db)
}

/// Eb/N0 where `log10(BER)` crosses `log10(threshold)`, interpolating
/// linearly between the bracketing grid points. Zero-error points count as
/// half an error.
pub fn interpolated_crossing(
    records: &[BerRecord],
    turbo_iter: usize,
    threshold: f64,
    info_bits: u64,
) -> Option<f64> {
    let mut pts: Vec<&BerRecord> = records
        .iter()
        .filter(|r| r.turbo_iter == turbo_iter)
        .collect();
    pts.sort_by(|a, b| a.eb_n0_db.total_cmp(&b.eb_n0_db));
    let lg = |r: &BerRecord| r.ber.max(0.5 / (r.frames * info_bits) as f64).log10();
    let target = threshold.log10();
    let first = pts.iter().position(|r| r.ber <= threshold)?;
    if first == 0 {
        return Some(pts[0].eb_n0_db);
    }
    let (a, b) = (pts[first - 1], pts[first]);
    let (la, lb) = (lg(a), lg(b));
    if la == lb {
        return Some(b.eb_n0_db);
    }
    Some(a.eb_n0_db + (la - target) / (la - lb) * (b.eb_n0_db - a.eb_n0_db))
}

/// Settings of an equalizer EXIT measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitOptions {
    pub taps: Vec<[f64; 2]>,
    pub eb_n0_db: f64,
    /// Rate used to convert Eb/N0 into noise variance.
    #[serde(default = "half")]
    pub code_rate: f64,
    pub symbols: usize,
    #[serde(default = "default_exit_frame")]
    pub frame_symbols: usize,
    /// Turbo index whose EP parameters the equalizer uses.
    #[serde(default)]
    pub turbo_index: usize,
    pub seed: u64,
    pub domain: Domain,
}

fn half() -> f64 {
    0.5
}

fn default_exit_frame() -> usize {
    4096
}

/// `I_o` of `eq` for each a-priori `I_i` on the grid, BPSK. A-priori LLRs
/// follow the consistent-Gaussian model; `I_o` is measured on unclipped
/// extrinsic LLRs. The same bits and noise are used for every grid point
/// and every equalizer with the same seed.
pub fn exit_equalizer(eq: &Equalizer, grid: &[f64], opts: &ExitOptions) -> Result<Vec<ExitRecord>> {
    if opts.symbols == 0 || opts.frame_symbols == 0 {
        return Err(Error::InvalidArgument(
            "EXIT needs at least one symbol".into(),
        ));
    }
    let cst = build_constellation(ConstellationKind::Bpsk);
    let taps: Vec<Complex64> = opts
        .taps
        .iter()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    let nv = ebn0_to_noise_var(opts.eb_n0_db, cst.energy(), opts.code_rate, 1);
    let channel = ChannelModel::new(taps, nv)?;
    let frames = opts.symbols.div_ceil(opts.frame_symbols);
    grid.iter()
        .map(|&i_in| {
            if !(0.0..=1.0).contains(&i_in) {
                return Err(Error::InvalidArgument(format!(
                    "I_i = {i_in} outside [0, 1]"
                )));
            }
            let sigma = j_inverse(i_in);
            let per_frame: Vec<(Vec<u8>, Vec<f64>)> = (0..frames)
                .into_par_iter()
                .map(|f| {
                    let len = opts
                        .frame_symbols
                        .min(opts.symbols - f * opts.frame_symbols);
                    let seed = derive_seed(opts.seed, f as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
                    let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                    let u = map_bits(&bits, &cst)?;
                    let y = transmit(
                        &u,
                        &channel,
                        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 2)),
                    );
                    let la = apriori_llrs(
                        &bits,
                        sigma,
                        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 3)),
                    );
                    let priors: Vec<_> = la.iter().map(|&l| prior_from_llr(&[l], &cst)).collect();
                    let report = eq.equalize(
                        &Problem::new(&y, &channel, &cst, opts.domain),
                        &priors,
                        opts.turbo_index,
                    )?;
                    Ok((bits, report.llrs(&cst, opts.domain, f64::INFINITY)))
                })
                .collect::<Result<_>>()?;
            let (bits, llrs): (Vec<u8>, Vec<f64>) = per_frame
                .into_iter()
                .flat_map(|(b, l)| b.into_iter().zip(l))
                .unzip();
            Ok(ExitRecord {
                i_in,
                i_out: mutual_information(&bits, &llrs),
                eb_n0_db: opts.eb_n0_db,
                equalizer: eq.kind.name().to_string(),
            })
        })
        .collect()
}

/// Name used for decoder rows of EXIT tables.
pub const DECODER_CURVE: &str = "ldpc";

/// Decoder EXIT curve: consistent-Gaussian LLRs on random codewords into
/// belief propagation, `I_o` measured on its extrinsic output.
pub fn exit_decoder(
    code: &LdpcCode,
    grid: &[f64],
    frames: usize,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<ExitRecord>> {
    grid.iter()
        .enumerate()
        .map(|(gi, &i_in)| {
            let sigma = j_inverse(i_in);
            let per_frame: Vec<(Vec<u8>, Vec<f64>)> = (0..frames)
                .into_par_iter()
                .map(|f| {
                    let s = derive_seed(derive_seed(seed, gi as u64), f as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
                    let cw = code.encode(&info)?;
                    let la = apriori_llrs(&cw, sigma, &mut rng);
                    Ok((cw, code.decode(&la, max_iter)?.extrinsic))
                })
                .collect::<Result<_>>()?;
            let (bits, llrs): (Vec<u8>, Vec<f64>) = per_frame
                .into_iter()
                .flat_map(|(b, l)| b.into_iter().zip(l))
                .unzip();
            Ok(ExitRecord {
                i_in,
                i_out: mutual_information(&bits, &llrs),
                eb_n0_db: f64::NAN,
                equalizer: DECODER_CURVE.to_string(),
            })
        })
        .collect()
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub const BER_HEADER: [&str; 5] = ["eb_n0_db", "turbo_iter", "frames", "bit_errors", "ber"];
pub const EXIT_HEADER: [&str; 4] = ["i_in", "i_out", "eb_n0_db", "equalizer"];

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `eb_n0_db,turbo_iter,frames,bit_errors,ber`, floats with 17
/// significant digits.
pub fn write_ber_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    write_rows(
        path,
        &BER_HEADER,
        records.iter().map(|r| {
            vec![
                fmt_f(r.eb_n0_db),
                r.turbo_iter.to_string(),
                r.frames.to_string(),
                r.bit_errors.to_string(),
                fmt_f(r.ber),
            ]
        }),
    )
}

/// Writes `i_in,i_out,eb_n0_db,equalizer`.
pub fn write_exit_csv(records: &[ExitRecord], path: &Path) -> Result<()> {
    write_rows(
        path,
        &EXIT_HEADER,
        records.iter().map(|r| {
            vec![
                fmt_f(r.i_in),
                fmt_f(r.i_out),
                fmt_f(r.eb_n0_db),
                r.equalizer.clone(),
            ]
        }),
    )
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let got = r.headers().map_err(|e| io_err(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: unexpected header {:?}",
            path.display(),
            got
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| io_err(path, e)))
        .collect()
}

pub fn read_ber_csv(path: &Path) -> Result<Vec<BerRecord>> {
    read_rows(path, &BER_HEADER)
}

pub fn read_exit_csv(path: &Path) -> Result<Vec<ExitRecord>> {
    read_rows(path, &EXIT_HEADER)
}
