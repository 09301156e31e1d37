//! Regular (3,6) LDPC codes: construction, systematic encoding, sum-product
//! decoding with extrinsic output, and bit interleaving.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const VAR_DEGREE: usize = 3;
const CHECK_DEGREE: usize = 6;
const MAX_ATTEMPTS: usize = 16;
const MAX_REPAIR_ROUNDS: usize = 400;

/// Binary LDPC code with a systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    /// Variable indices of each check.
    checks: Vec<Vec<usize>>,
    // decoder graph in edge-index form
    check_edges: Vec<Vec<usize>>,
    var_edges: Vec<Vec<usize>>,
    edge_var: Vec<usize>,
    // encoder
    info_positions: Vec<usize>,
    parity_rows: Vec<(usize, Vec<u64>)>,
}

/// Result of [`LdpcCode::decode`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub info: Vec<u8>,
    /// Posterior minus input LLRs.
    pub extrinsic: Vec<f64>,
    pub iterations: usize,
    /// Hard decisions satisfy every check.
    pub converged: bool,
}

/// Builds a (3,6)-regular rate-1/2 code on `n` bits from a random socket
/// permutation, then removes repeated edges and 4-cycles by edge swaps.
/// Deterministic in `(n, seed)`.
pub fn build_ldpc(n: usize, seed: u64) -> Result<LdpcCode> {
    if n < 128 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "code length must be even and >= 128, got {n}"
        )));
    }
    let m = n / 2;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut check_of: Vec<usize> = (0..m)
            .flat_map(|c| std::iter::repeat_n(c, CHECK_DEGREE))
            .collect();
        check_of.shuffle(&mut rng);
        // edge e connects variable e / 3 to check check_of[e]
        match repair_short_cycles(n, m, &mut check_of, &mut rng) {
            Ok(()) => {
                let mut checks = vec![Vec::with_capacity(CHECK_DEGREE); m];
                for (e, &c) in check_of.iter().enumerate() {
                    checks[c].push(e / VAR_DEGREE);
                }
                return LdpcCode::from_checks(n, checks);
            }
            Err(reason) => last = reason,
        }
    }
    Err(Error::CodeConstruction {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}

fn repair_short_cycles(
    n: usize,
    m: usize,
    check_of: &mut [usize],
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), String> {
    let edges = check_of.len();
    let mut bad = Vec::new();
    for _ in 0..MAX_REPAIR_ROUNDS {
        bad.clear();
        let mut check_vars = vec![Vec::with_capacity(CHECK_DEGREE); m];
        for (e, &c) in check_of.iter().enumerate() {
            check_vars[c].push(e / VAR_DEGREE);
        }
        let mut seen = vec![usize::MAX; n];
        for v in 0..n {
            let mine = &check_of[v * VAR_DEGREE..(v + 1) * VAR_DEGREE];
            'edges: for (slot, &c) in mine.iter().enumerate() {
                if mine[..slot].contains(&c) {
                    bad.push(v * VAR_DEGREE + slot);
                    continue;
                }
                for &w in &check_vars[c] {
                    if w == v {
                        continue;
                    }
                    if seen[w] == v {
                        // v and w share this check and an earlier one
                        if v < w {
                            bad.push(v * VAR_DEGREE + slot);
                        }
                        continue 'edges;
                    }
                }
                for &w in &check_vars[c] {
                    if w != v {
                        seen[w] = v;
                    }
                }
            }
        }
        if bad.is_empty() {
            return Ok(());
        }
        for &e in &bad {
            let ve = e / VAR_DEGREE;
            for _ in 0..32 {
                let f = rng.random_range(0..edges);
                let vf = f / VAR_DEGREE;
                if vf == ve {
                    continue;
                }
                let (ce, cf) = (check_of[e], check_of[f]);
                let has = |v: usize, c: usize, co: &[usize]| {
                    co[v * VAR_DEGREE..(v + 1) * VAR_DEGREE].contains(&c)
                };
                if has(ve, cf, check_of) || has(vf, ce, check_of) {
                    continue;
                }
                check_of.swap(e, f);
                break;
            }
        }
    }
    Err(format!(
        "{} edges still on 4-cycles after {MAX_REPAIR_ROUNDS} rounds",
        bad.len()
    ))
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

impl LdpcCode {
    /// Code from explicit parity checks (variable indices per check).
    ///
    /// The rate is fixed at 1/2: the first `n/2` free columns carry the
    /// information bits and any further free columns (rank deficiency) are
    /// held at zero.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        if checks.iter().flatten().any(|&v| v >= n) {
            return Err(Error::InvalidArgument(
                "check references a variable outside the code".into(),
            ));
        }
        let k = n / 2;
        let w = words(n);
        // Gauss-Jordan elimination over GF(2)
        let mut rows: Vec<Vec<u64>> = checks
            .iter()
            .map(|vars| {
                let mut r = vec![0u64; w];
                for &v in vars {
                    r[v / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots: Vec<usize> = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let bit = 1u64 << (col % 64);
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][col / 64] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[col / 64] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        if free.len() < k {
            return Err(Error::InvalidArgument(format!(
                "parity checks have rank {rank}, leaving fewer than {k} information bits"
            )));
        }
        let info_positions = free[..k].to_vec();
        let parity_rows = pivots
            .iter()
            .zip(rows)
            .map(|(&p, mut row)| {
                row[p / 64] &= !(1u64 << (p % 64));
                (p, row)
            })
            .collect();

        let mut check_edges = Vec::with_capacity(checks.len());
        let mut var_edges = vec![Vec::new(); n];
        let mut edge_var = Vec::new();
        for vars in &checks {
            let mut ids = Vec::with_capacity(vars.len());
            for &v in vars {
                let e = edge_var.len();
                edge_var.push(v);
                var_edges[v].push(e);
                ids.push(e);
            }
            check_edges.push(ids);
        }
        Ok(Self {
            n,
            checks,
            check_edges,
            var_edges,
            edge_var,
            info_positions,
            parity_rows,
        })
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Information bits per codeword.
    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn column_weights(&self) -> Vec<usize> {
        self.var_edges.iter().map(Vec::len).collect()
    }

    /// Parity of each check over `bits`.
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.checks
            .iter()
            .map(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.syndrome(bits).iter().all(|&s| s == 0)
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::Dimension(format!(
                "expected {} information bits, got {}",
                self.k(),
                info.len()
            )));
        }
        let mut word = vec![0u64; words(self.n)];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            if b & 1 == 1 {
                word[pos / 64] |= 1 << (pos % 64);
            }
        }
        let mut out = vec![0u8; self.n];
        for &pos in &self.info_positions {
            out[pos] = ((word[pos / 64] >> (pos % 64)) & 1) as u8;
        }
        for (p, row) in &self.parity_rows {
            let ones: u32 = row
                .iter()
                .zip(&word)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            out[*p] = (ones & 1) as u8;
        }
        Ok(out)
    }

    /// Flooding sum-product decoding. Stops as soon as the hard decisions
    /// form a codeword (after at least one iteration).
    pub fn decode(&self, llr_in: &[f64], max_iter: usize) -> Result<DecodeOutput> {
        if llr_in.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected {} LLRs, got {}",
                self.n,
                llr_in.len()
            )));
        }
        let e_count = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| llr_in[v]).collect();
        let mut c2v = vec![0.0; e_count];
        let mut total = llr_in.to_vec();
        let mut hard = vec![0u8; self.n];
        let mut fwd = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter.max(1) {
            iterations += 1;
            for edges in &self.check_edges {
                check_update(edges, &v2c, &mut c2v, &mut fwd);
            }
            for v in 0..self.n {
                let t = llr_in[v] + self.var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
                total[v] = t;
                for &e in &self.var_edges[v] {
                    v2c[e] = t - c2v[e];
                }
                hard[v] = (t < 0.0) as u8;
            }
            if self.check_edges.iter().all(|edges| {
                edges
                    .iter()
                    .fold(0u8, |acc, &e| acc ^ hard[self.edge_var[e]])
                    == 0
            }) {
                converged = true;
                break;
            }
        }
        Ok(DecodeOutput {
            info: self.info_positions.iter().map(|&p| hard[p]).collect(),
            extrinsic: total.iter().zip(llr_in).map(|(t, l)| t - l).collect(),
            iterations,
            converged,
        })
    }

    /// Parity-check matrix in the alist text format.
    pub fn to_alist(&self) -> String {
        let m = self.checks.len();
        let mut var_checks = vec![Vec::new(); self.n];
        for (c, vars) in self.checks.iter().enumerate() {
            for &v in vars {
                var_checks[v].push(c);
            }
        }
        let max_col = var_checks.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let join = |xs: &[usize], width: usize| {
            let mut v: Vec<String> = xs.iter().map(|x| (x + 1).to_string()).collect();
            v.resize(width, "0".into());
            v.join(" ")
        };
        let mut s = format!("{} {}\n{} {}\n", self.n, m, max_col, max_row);
        s += &var_checks
            .iter()
            .map(|c| c.len().to_string())
            .collect::<Vec<_>>()
            .join(" ");
        s += "\n";
        s += &self
            .checks
            .iter()
            .map(|c| c.len().to_string())
            .collect::<Vec<_>>()
            .join(" ");
        s += "\n";
        for c in &var_checks {
            s += &join(c, max_col);
            s += "\n";
        }
        for r in &self.checks {
            s += &join(r, max_row);
            s += "\n";
        }
        s
    }

    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text.split_whitespace().map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::Parse(format!("alist: {e}")))
        });
        let mut next = || {
            nums.next()
                .unwrap_or_else(|| Err(Error::Parse("alist: truncated".into())))
        };
        let n = next()?;
        let m = next()?;
        let max_col = next()?;
        let max_row = next()?;
        let col_w: Vec<usize> = (0..n).map(|_| next()).collect::<Result<_>>()?;
        let row_w: Vec<usize> = (0..m).map(|_| next()).collect::<Result<_>>()?;
        for _ in 0..n * max_col {
            next()?;
        }
        let mut checks = Vec::with_capacity(m);
        for &w in &row_w {
            let mut vars = Vec::with_capacity(w);
            for slot in 0..max_row {
                let v = next()?;
                if slot < w {
                    if v == 0 || v > n {
                        return Err(Error::Parse(format!(
                            "alist: variable index {v} out of range"
                        )));
                    }
                    vars.push(v - 1);
                }
            }
            checks.push(vars);
        }
        let code = Self::from_checks(n, checks)?;
        if code.column_weights() != col_w {
            return Err(Error::Parse(
                "alist: column weights disagree with row lists".into(),
            ));
        }
        Ok(code)
    }
}

/// `a ⊞ b = 2·atanh(tanh(a/2)·tanh(b/2))`, evaluated without tanh.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    if a.is_infinite() {
        return a.signum() * b;
    }
    if b.is_infinite() {
        return b.signum() * a;
    }
    let s = a.signum() * b.signum() * a.abs().min(b.abs());
    s + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

fn check_update(edges: &[usize], v2c: &[f64], c2v: &mut [f64], fwd: &mut Vec<f64>) {
    let d = edges.len();
    if d == 1 {
        c2v[edges[0]] = 0.0;
        return;
    }
    fwd.clear();
    let mut acc = v2c[edges[0]];
    fwd.push(acc);
    for &e in &edges[1..d - 1] {
        acc = boxplus(acc, v2c[e]);
        fwd.push(acc);
    }
    let mut bwd = v2c[edges[d - 1]];
    c2v[edges[d - 1]] = fwd[d - 2];
    for i in (1..d - 1).rev() {
        c2v[edges[i]] = boxplus(fwd[i - 1], bwd);
        bwd = boxplus(bwd, v2c[edges[i]]);
    }
    c2v[edges[0]] = bwd;
}

/// Seeded bit permutation: `interleave(x)[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { perm }
    }

    pub fn from_permutation(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        Ok(Self { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x.len())?;
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_len(y.len())?;
        let mut x = vec![T::default(); y.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        Ok(x)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::Dimension(format!(
                "interleaver of length {} given {len} items",
                self.perm.len()
            )));
        }
        Ok(())
    }
}
