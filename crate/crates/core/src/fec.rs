//! Systematic IRA LDPC codes and a flooding sum-product decoder.
//!
//! # Address-table format
//!
//! ```text
//! n k [group]
//! a_0 a_1 ...      # one line per group of `group` information bits
//! ...
//! ```
//!
//! `group` defaults to 360, the DVB-S2 parallelism, and `q = (n - k) / group`.
//! Information bit `i` in group `g = i / group` is connected to the checks
//! `(a + (i mod group) * q) mod (n - k)` for every address `a` on line `g`.
//! Parity bit `j` closes check `j` through the accumulator
//! `p_j = p_{j-1} + sum of the information bits in check j`, which gives the
//! staircase part of the parity-check matrix. Blank lines and lines starting
//! with `#` are ignored.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_GROUP: usize = 360;
pub const DEFAULT_MAX_ITERATIONS: usize = 20;

// Message magnitudes are held below this bound; far beyond any value that
// can change a hard decision.
const MAX_MESSAGE: f64 = 500.0;

#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    // information bit -> parity accumulator addresses (CSR)
    info_ptr: Vec<usize>,
    info_checks: Vec<u32>,
    // check -> variables (CSR, edges in check-major order)
    check_ptr: Vec<usize>,
    check_vars: Vec<u32>,
    // variable -> edge ids (CSR)
    var_ptr: Vec<usize>,
    var_edges: Vec<u32>,
    table_hash: String,
}

impl LdpcCode {
    /// Parses an address table.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Load("empty address table".into()))?;
        let head = parse_numbers(header)?;
        let (n, k, group) = match head[..] {
            [n, k] => (n, k, DEFAULT_GROUP),
            [n, k, g] => (n, k, g),
            _ => return Err(Error::Load(format!("bad header {header:?}"))),
        };
        if k == 0 || n <= k || group == 0 {
            return Err(Error::Load(format!("inconsistent sizes n={n} k={k} group={group}")));
        }
        let m = n - k;
        if k % group != 0 || m % group != 0 {
            return Err(Error::Load(format!(
                "n-k={m} and k={k} must be multiples of the group size {group}"
            )));
        }
        let q = m / group;
        let rows: Vec<Vec<usize>> = lines.map(parse_numbers).collect::<Result<_>>()?;
        if rows.len() != k / group {
            return Err(Error::Load(format!(
                "expected {} address lines, found {}",
                k / group,
                rows.len()
            )));
        }
        let mut info_ptr = Vec::with_capacity(k + 1);
        let mut info_checks = Vec::new();
        info_ptr.push(0);
        for (g, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Load(format!("address line {g} is empty")));
            }
            if let Some(bad) = row.iter().find(|&&a| a >= m) {
                return Err(Error::Load(format!(
                    "address {bad} on line {g} is outside the {m} parity checks"
                )));
            }
            for w in 0..group {
                let start = info_checks.len();
                for &a in row {
                    info_checks.push(((a + w * q) % m) as u32);
                }
                let col = &mut info_checks[start..];
                col.sort_unstable();
                if col.windows(2).any(|p| p[0] == p[1]) {
                    return Err(Error::Load(format!(
                        "information bit {} is connected twice to the same check",
                        g * group + w
                    )));
                }
                info_ptr.push(info_checks.len());
            }
        }

        // Check-major adjacency.
        let mut check_deg = vec![0usize; m];
        for &c in &info_checks {
            check_deg[c as usize] += 1;
        }
        for (j, d) in check_deg.iter_mut().enumerate() {
            *d += if j == 0 { 1 } else { 2 };
        }
        let mut check_ptr = Vec::with_capacity(m + 1);
        check_ptr.push(0);
        for d in &check_deg {
            check_ptr.push(check_ptr.last().unwrap() + d);
        }
        let edges = *check_ptr.last().unwrap();
        let mut fill = check_ptr[..m].to_vec();
        let mut check_vars = vec![0u32; edges];
        for v in 0..k {
            for &c in &info_checks[info_ptr[v]..info_ptr[v + 1]] {
                check_vars[fill[c as usize]] = v as u32;
                fill[c as usize] += 1;
            }
        }
        for j in 0..m {
            if j > 0 {
                check_vars[fill[j]] = (k + j - 1) as u32;
                fill[j] += 1;
            }
            check_vars[fill[j]] = (k + j) as u32;
            fill[j] += 1;
        }

        let mut var_deg = vec![0usize; n];
        for &v in &check_vars {
            var_deg[v as usize] += 1;
        }
        let mut var_ptr = Vec::with_capacity(n + 1);
        var_ptr.push(0);
        for d in &var_deg {
            var_ptr.push(var_ptr.last().unwrap() + d);
        }
        let mut vfill = var_ptr[..n].to_vec();
        let mut var_edges = vec![0u32; edges];
        for (e, &v) in check_vars.iter().enumerate() {
            var_edges[vfill[v as usize]] = e as u32;
            vfill[v as usize] += 1;
        }

        let table_hash = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(LdpcCode {
            n,
            k,
            info_ptr,
            info_checks,
            check_ptr,
            check_vars,
            var_ptr,
            var_edges,
            table_hash,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_table(&text)
    }

    /// The bundled 12-bit rate-1/2 toy code.
    pub fn toy() -> Self {
        Self::from_table(TOY_TABLE).expect("bundled toy table is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_len(&self) -> usize {
        self.n - self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn edges(&self) -> usize {
        self.check_vars.len()
    }

    /// SHA-256 of the address table the code was built from.
    pub fn table_hash(&self) -> &str {
        &self.table_hash
    }

    /// Variables taking part in check `j`.
    pub fn check(&self, j: usize) -> &[u32] {
        &self.check_vars[self.check_ptr[j]..self.check_ptr[j + 1]]
    }

    /// Systematic encoding: the codeword is `info ‖ parity`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::Framing(format!(
                "encoder expects {} information bits, got {}",
                self.k,
                info.len()
            )));
        }
        let mut parity = vec![0u8; self.n - self.k];
        for (i, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                for &c in &self.info_checks[self.info_ptr[i]..self.info_ptr[i + 1]] {
                    parity[c as usize] ^= 1;
                }
            }
        }
        for j in 1..parity.len() {
            parity[j] ^= parity[j - 1];
        }
        let mut cw = Vec::with_capacity(self.n);
        cw.extend(info.iter().map(|b| b & 1));
        cw.extend_from_slice(&parity);
        Ok(cw)
    }

    /// Whether every parity check is satisfied by `bits`.
    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && (0..self.n - self.k).all(|j| self.check(j).iter().fold(0, |acc, &v| acc ^ bits[v as usize]) & 1 == 0)
    }

    /// Decodes with a fresh decoder; see [`Decoder::decode`].
    pub fn decode(&self, llrs: &[f64], max_iterations: usize) -> DecodeResult {
        Decoder::new(self).decode(llrs, max_iterations)
    }
}

const TOY_TABLE: &str = include_str!("../../../data/ldpc/toy_12_6.txt");

fn parse_numbers(line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::Load(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    /// Hard decisions on the whole codeword.
    pub bits: Vec<u8>,
    pub iterations: usize,
    pub parity_satisfied: bool,
}

/// `phi(x) = -ln tanh(x/2)`, its own inverse on `x > 0`; infinite at zero.
#[inline]
fn phi(x: f64) -> f64 {
    (2.0 / x.exp_m1()).ln_1p()
}

/// Exact tanh-rule check update for one check node, evaluated in the
/// `phi` domain. `scratch` must hold at least `incoming.len()` values.
fn check_update(incoming: &[f64], outgoing: &mut [f64], scratch: &mut [f64]) {
    let mut negative = false;
    let mut total = 0.0;
    let mut worst = usize::MAX;
    let mut worst_phi = -1.0;
    let mut erased = 0usize;
    for (i, &m) in incoming.iter().enumerate() {
        negative ^= m < 0.0;
        let p = phi(m.abs());
        scratch[i] = p;
        if p.is_infinite() {
            erased += 1;
            worst = i;
        } else {
            total += p;
            if erased == 0 && p > worst_phi {
                worst_phi = p;
                worst = i;
            }
        }
    }
    // A zero-magnitude input silences every other output.
    if erased > 0 {
        for (i, (&m, out)) in incoming.iter().zip(outgoing.iter_mut()).enumerate() {
            *out = if erased == 1 && i == worst {
                let mag = phi(total).min(MAX_MESSAGE);
                if negative ^ (m < 0.0) {
                    -mag
                } else {
                    mag
                }
            } else {
                0.0
            };
        }
        return;
    }
    // The least reliable input dominates `total`; its own output is summed
    // directly so the subtraction never cancels catastrophically.
    let without_worst: f64 = scratch[..incoming.len()]
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != worst)
        .map(|(_, p)| p)
        .sum();
    for (i, (&m, out)) in incoming.iter().zip(outgoing.iter_mut()).enumerate() {
        let rest = if i == worst {
            without_worst
        } else {
            (total - scratch[i]).max(0.0)
        };
        let mag = phi(rest).min(MAX_MESSAGE);
        *out = if negative ^ (m < 0.0) { -mag } else { mag };
    }
}

/// Flooding sum-product decoder with reusable message memory.
#[derive(Debug)]
pub struct Decoder<'a> {
    code: &'a LdpcCode,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    posterior: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Decoder<'a> {
    pub fn new(code: &'a LdpcCode) -> Self {
        let max_deg = (0..code.parity_len())
            .map(|j| code.check_ptr[j + 1] - code.check_ptr[j])
            .max()
            .unwrap_or(0);
        Decoder {
            code,
            v2c: vec![0.0; code.edges()],
            c2v: vec![0.0; code.edges()],
            posterior: vec![0.0; code.n],
            scratch: vec![0.0; max_deg],
        }
    }

    /// Decodes channel LLRs (positive favours bit 0). Stops as soon as the
    /// hard decisions satisfy every check. A posterior of exactly zero is an
    /// erasure and never counts as satisfying a check.
    pub fn decode(&mut self, llrs: &[f64], max_iterations: usize) -> DecodeResult {
        let code = self.code;
        assert_eq!(llrs.len(), code.n, "LLR count must equal the code length");
        for (v, &l) in llrs.iter().enumerate() {
            let l = l.clamp(-MAX_MESSAGE, MAX_MESSAGE);
            for &e in &code.var_edges[code.var_ptr[v]..code.var_ptr[v + 1]] {
                self.v2c[e as usize] = l;
            }
        }
        let mut bits = vec![0u8; code.n];
        let mut satisfied = false;
        let mut iterations = 0;
        while iterations < max_iterations {
            iterations += 1;
            for j in 0..code.parity_len() {
                let range = code.check_ptr[j]..code.check_ptr[j + 1];
                check_update(&self.v2c[range.clone()], &mut self.c2v[range], &mut self.scratch);
            }
            for (v, &l) in llrs.iter().enumerate() {
                let edges = &code.var_edges[code.var_ptr[v]..code.var_ptr[v + 1]];
                let total = edges.iter().fold(l, |acc, &e| acc + self.c2v[e as usize]);
                self.posterior[v] = total;
                for &e in edges {
                    let e = e as usize;
                    self.v2c[e] = (total - self.c2v[e]).clamp(-MAX_MESSAGE, MAX_MESSAGE);
                }
            }
            for (b, &p) in bits.iter_mut().zip(&self.posterior) {
                *b = u8::from(p < 0.0);
            }
            satisfied = self.posterior.iter().all(|&p| p != 0.0) && code.is_codeword(&bits);
            if satisfied {
                break;
            }
        }
        DecodeResult {
            bits,
            iterations,
            parity_satisfied: satisfied,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense parity-check matrix built straight from the table semantics.
    fn dense_h(text: &str) -> (usize, usize, Vec<Vec<u8>>) {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        let (n, k) = (head[0], head[1]);
        let group = head.get(2).copied().unwrap_or(360);
        let m = n - k;
        let q = m / group;
        let mut h = vec![vec![0u8; n]; m];
        for (g, line) in lines.enumerate() {
            for a in line.split_whitespace().map(|t| t.parse::<usize>().unwrap()) {
                for w in 0..group {
                    h[(a + w * q) % m][g * group + w] ^= 1;
                }
            }
        }
        for j in 0..m {
            h[j][k + j] = 1;
            if j > 0 {
                h[j][k + j - 1] = 1;
            }
        }
        (n, k, h)
    }

    fn syndrome_zero(h: &[Vec<u8>], c: &[u8]) -> bool {
        h.iter()
            .all(|row| row.iter().zip(c).fold(0, |acc, (a, b)| acc ^ (a & b)) == 0)
    }

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random::<bool>() as u8).collect()
    }

    #[test]
    fn toy_code_encoder_matches_matrix() {
        let code = LdpcCode::toy();
        assert_eq!((code.n(), code.k()), (12, 6));
        let (_, _, h) = dense_h(TOY_TABLE);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = random_bits(&mut rng, 6);
            let c = code.encode(&u).unwrap();
            assert_eq!(&c[..6], &u[..]);
            assert!(syndrome_zero(&h, &c));
            assert!(code.is_codeword(&c));
        }
        for i in 0..6 {
            let mut u = vec![0; 6];
            u[i] = 1;
            assert!(syndrome_zero(&h, &code.encode(&u).unwrap()));
        }
    }

    #[test]
    fn zero_info_gives_zero_codeword() {
        let code = LdpcCode::toy();
        assert_eq!(code.encode(&[0; 6]).unwrap(), vec![0; 12]);
        assert!(matches!(code.encode(&[0; 5]), Err(Error::Framing(_))));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(LdpcCode::from_table(""), Err(Error::Load(_))));
        assert!(matches!(
            LdpcCode::from_table("12 6 1\n0 2 12\n1\n2\n3\n4\n5\n"),
            Err(Error::Load(_))
        ));
        assert!(LdpcCode::from_table("12 6 1\n0\n1\n2\n").is_err());
        assert!(LdpcCode::from_table("12 12 1\n").is_err());
        assert!(LdpcCode::from_table("12 6 4\n0\n").is_err());
        assert!(LdpcCode::from_table("12 6 1\n0 0\n1\n2\n3\n4\n5\n").is_err());
        assert!(LdpcCode::from_table("12 six\n").is_err());
    }

    #[test]
    fn noiseless_decode_in_one_iteration() {
        let code = LdpcCode::toy();
        let c = code.encode(&[1, 0, 1, 1, 0, 0]).unwrap();
        let llrs: Vec<f64> = c.iter().map(|&b| if b == 0 { 50.0 } else { -50.0 }).collect();
        let r = code.decode(&llrs, 20);
        assert_eq!(r.bits, c);
        assert_eq!(r.iterations, 1);
        assert!(r.parity_satisfied);
    }

    #[test]
    fn corrects_every_single_flip() {
        let code = LdpcCode::toy();
        for u in 0..64u32 {
            let info: Vec<u8> = (0..6).map(|i| ((u >> i) & 1) as u8).collect();
            let c = code.encode(&info).unwrap();
            for flip in 0..12 {
                let llrs: Vec<f64> = c
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| {
                        let l = if b == 0 { 10.0 } else { -10.0 };
                        if i == flip {
                            -l
                        } else {
                            l
                        }
                    })
                    .collect();
                let r = code.decode(&llrs, 20);
                assert_eq!(r.bits, c, "info {u} flip {flip}");
                assert!(r.parity_satisfied);
            }
        }
    }

    #[test]
    fn zero_llrs_never_satisfy() {
        let code = LdpcCode::toy();
        let r = code.decode(&[0.0; 12], 20);
        assert!(!r.parity_satisfied);
        assert_eq!(r.iterations, 20);
    }

    #[test]
    fn check_update_matches_tanh_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scratch = vec![0.0; 8];
        for _ in 0..200 {
            let deg = rng.random_range(2..=8);
            let inc: Vec<f64> = (0..deg).map(|_| rng.random_range(-12.0..12.0)).collect();
            let mut out = vec![0.0; deg];
            check_update(&inc, &mut out, &mut scratch);
            for i in 0..deg {
                let prod: f64 = inc
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &m)| (m / 2.0).tanh())
                    .product();
                let expect = 2.0 * prod.atanh();
                assert!(
                    (out[i] - expect).abs() < 1e-8 * (1.0 + expect.abs()),
                    "{} vs {}",
                    out[i],
                    expect
                );
            }
        }
    }

    #[test]
    fn linear_code_symmetry() {
        // BER of the all-zero codeword matches that of a random codeword
        // under the same noise realisations folded by the codeword signs.
        use rand_distr::{Distribution, StandardNormal};
        let code = LdpcCode::toy();
        let sigma = 0.9f64;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 4000;
        let (mut err_zero, mut err_rand) = (0usize, 0usize);
        for _ in 0..trials {
            let info = random_bits(&mut rng, 6);
            let c = code.encode(&info).unwrap();
            let noise: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
            let zero_llrs: Vec<f64> = noise
                .iter()
                .map(|z| 2.0 * (1.0 + sigma * z) / (sigma * sigma))
                .collect();
            let r0 = code.decode(&zero_llrs, 20);
            err_zero += r0.bits.iter().filter(|&&b| b != 0).count();
            let noise2: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
            let llrs: Vec<f64> = c
                .iter()
                .zip(&noise2)
                .map(|(&b, z)| {
                    let x = if b == 0 { 1.0 } else { -1.0 };
                    2.0 * (x + sigma * z) / (sigma * sigma)
                })
                .collect();
            let r = code.decode(&llrs, 20);
            err_rand += r.bits.iter().zip(&c).filter(|(a, b)| a != b).count();
        }
        let total = (trials * 12) as f64;
        let (p0, p1) = (err_zero as f64 / total, err_rand as f64 / total);
        let p = 0.5 * (p0 + p1);
        let sd = (2.0 * p * (1.0 - p) / total).sqrt();
        assert!((p0 - p1).abs() < 3.0 * sd, "{p0} vs {p1}");
    }
}
