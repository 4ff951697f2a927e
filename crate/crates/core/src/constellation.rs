//! Gray-labeled 2^m-PAM constellations and probability models over them.
//!
//! Points are stored in ascending order. The label of point `i` is the
//! reflected binary Gray code of `2^m - 1 - i`, which puts the sign in the
//! most significant label bit (0 for positive amplitudes) and makes the
//! remaining `m - 1` amplitude bits depend on `|x|` only.
//!
//! The bit mapper assigns FEC tributaries to label bits: entry `i` of the
//! mapper is the weight (`m` = most significant) of the label bit carried by
//! tributary `i + 1`. With this convention the 8-PAM mapper `(3, 2, 1)` sends
//! tributary 1 to the sign bit, followed by the amplitude bits from most to
//! least significant.

use std::fmt::Write as _;

use crate::entropy::{binary_entropy, entropy};
use crate::error::{Error, Result};

pub const MAX_BITS_PER_SYMBOL: usize = 8;

/// Reflected binary Gray code.
#[inline]
pub fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    m: usize,
    points: Vec<f64>,
    labels: Vec<u32>,
    mapper: Vec<usize>,
    // bits[point * m + tributary]
    bits: Vec<u8>,
    point_of_label: Vec<usize>,
}

impl Constellation {
    /// Builds an integer-spaced Gray-labeled PAM constellation
    /// `{-(2^m - 1), ..., -1, +1, ..., 2^m - 1}`.
    pub fn gray_pam(m: usize, mapper: &[usize]) -> Result<Self> {
        if m == 0 || m > MAX_BITS_PER_SYMBOL {
            return Err(Error::Config(format!(
                "bits per symbol must be in 1..={MAX_BITS_PER_SYMBOL}, got {m}"
            )));
        }
        validate_mapper(m, mapper)?;
        let size = 1usize << m;
        let points = (0..size).map(|i| (2 * i as i64 - (size as i64 - 1)) as f64).collect();
        let labels: Vec<u32> = (0..size).map(|i| gray((size - 1 - i) as u32)).collect();
        let mut point_of_label = vec![0; size];
        for (i, &l) in labels.iter().enumerate() {
            point_of_label[l as usize] = i;
        }
        let mut bits = vec![0u8; size * m];
        for (i, &l) in labels.iter().enumerate() {
            for (t, &w) in mapper.iter().enumerate() {
                bits[i * m + t] = ((l >> (w - 1)) & 1) as u8;
            }
        }
        Ok(Constellation {
            m,
            points,
            labels,
            mapper: mapper.to_vec(),
            bits,
            point_of_label,
        })
    }

    /// Natural mapper for `m` bits: `(m, m-1, ..., 1)`.
    pub fn default_mapper(m: usize) -> Vec<usize> {
        (1..=m).rev().collect()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn mapper(&self) -> &[usize] {
        &self.mapper
    }

    /// Number of distinct amplitude levels `|x|`.
    pub fn amplitude_levels(&self) -> usize {
        self.len() / 2
    }

    /// Bit carried by `tributary` (0-based) when `point` is sent.
    #[inline]
    pub fn tributary_bit(&self, point: usize, tributary: usize) -> u8 {
        self.bits[point * self.m + tributary]
    }

    /// All tributary bits of `point`, in tributary order.
    #[inline]
    pub fn tributary_bits(&self, point: usize) -> &[u8] {
        &self.bits[point * self.m..(point + 1) * self.m]
    }

    /// The point whose tributary bits equal `bits`.
    pub fn point_for_bits(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.m);
        let label = bits
            .iter()
            .zip(&self.mapper)
            .fold(0u32, |acc, (&b, &w)| acc | (u32::from(b & 1) << (w - 1)));
        self.point_of_label[label as usize]
    }

    /// Index of the point with amplitude level `amplitude` (0 = smallest
    /// magnitude) and the given sign.
    pub fn point_index(&self, negative: bool, amplitude: usize) -> usize {
        let half = self.amplitude_levels();
        if negative {
            half - 1 - amplitude
        } else {
            half + amplitude
        }
    }

    /// Amplitude level of `point`.
    pub fn amplitude_of(&self, point: usize) -> usize {
        let half = self.amplitude_levels();
        if point >= half {
            point - half
        } else {
            half - 1 - point
        }
    }

    /// Tributary carrying the sign bit, if any.
    pub fn sign_tributary(&self) -> Option<usize> {
        self.mapper.iter().position(|&w| w == self.m)
    }

    /// Average energy `E[X^2]` under `d`.
    pub fn energy(&self, d: &ShapedDistribution) -> f64 {
        self.points.iter().zip(d.probabilities()).map(|(x, p)| p * x * x).sum()
    }

    /// Copy of the constellation scaled to unit average energy under `d`.
    pub fn normalized(&self, d: &ShapedDistribution) -> Constellation {
        let scale = self.energy(d).sqrt().recip();
        let mut c = self.clone();
        for x in &mut c.points {
            *x *= scale;
        }
        c
    }
}

fn validate_mapper(m: usize, mapper: &[usize]) -> Result<()> {
    if mapper.len() != m {
        return Err(Error::Config(format!(
            "mapper has {} entries, expected {m}",
            mapper.len()
        )));
    }
    let mut seen = vec![false; m + 1];
    for &w in mapper {
        if w == 0 || w > m || seen[w] {
            return Err(Error::Config(format!(
                "mapper {mapper:?} is not a permutation of 1..={m}"
            )));
        }
        seen[w] = true;
    }
    Ok(())
}

/// Probability model over the points of a constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedDistribution {
    probabilities: Vec<f64>,
    nu: Option<f64>,
}

impl ShapedDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Data("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(ShapedDistribution {
            probabilities,
            nu: None,
        })
    }

    pub fn uniform(c: &Constellation) -> Self {
        let p = 1.0 / c.len() as f64;
        ShapedDistribution {
            probabilities: vec![p; c.len()],
            nu: Some(0.0),
        }
    }

    /// Maxwell–Boltzmann distribution `P(x) ∝ exp(-nu x^2)` over the
    /// integer-spaced points of `c`.
    pub fn maxwell_boltzmann(c: &Constellation, nu: f64) -> Self {
        let weights: Vec<f64> = c.points().iter().map(|x| (-nu * x * x).exp()).collect();
        let total: f64 = weights.iter().sum();
        ShapedDistribution {
            probabilities: weights.into_iter().map(|w| w / total).collect(),
            nu: Some(nu),
        }
    }

    /// Solves for the Maxwell–Boltzmann distribution whose joint label
    /// entropy `H(B)` equals `target` bits.
    pub fn maxwell_boltzmann_for_entropy(c: &Constellation, target: f64) -> Result<Self> {
        let max = c.bits_per_symbol() as f64;
        if !(1.0..=max).contains(&target) {
            return Err(Error::Domain(format!("target entropy {target} outside [1, {max}]")));
        }
        let h = |nu: f64| entropy(&Self::maxwell_boltzmann(c, nu).probabilities);
        if max - target <= 1e-12 {
            return Ok(Self::maxwell_boltzmann(c, 0.0));
        }
        let mut hi = 1e-3;
        while h(hi) > target {
            hi *= 2.0;
            if hi > 1e6 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let nu = 0.5 * (lo + hi);
        let d = Self::maxwell_boltzmann(c, nu);
        let achieved = entropy(&d.probabilities);
        if (achieved - target).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "target entropy {target} not reachable (closest {achieved})"
            )));
        }
        Ok(d)
    }

    /// Symmetric distribution with the given amplitude pmf, smallest
    /// magnitude first, and equiprobable signs.
    pub fn from_amplitude_pmf(pmf: &[f64]) -> Result<Self> {
        let half = pmf.len();
        let mut probabilities = vec![0.0; 2 * half];
        for (a, &p) in pmf.iter().enumerate() {
            probabilities[half + a] = 0.5 * p;
            probabilities[half - 1 - a] = 0.5 * p;
        }
        Self::new(probabilities)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Maxwell–Boltzmann parameter, when the distribution belongs to that family.
    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Whether `P(x) = P(-x)` within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.probabilities.len();
        (0..n / 2).all(|i| (self.probabilities[i] - self.probabilities[n - 1 - i]).abs() <= tol)
    }

    /// Distribution of the amplitude level `|x|`, smallest magnitude first.
    pub fn amplitude_pmf(&self) -> Vec<f64> {
        let n = self.probabilities.len();
        let half = n / 2;
        (0..half)
            .map(|a| self.probabilities[half + a] + self.probabilities[half - 1 - a])
            .collect()
    }

    /// Plain-text form: one probability per line, ascending amplitude.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.probabilities {
            writeln!(s, "{p:e}").expect("writing to a String cannot fail");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let probabilities = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Data(format!("bad probability {l:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(probabilities)
    }

    fn check_against(&self, c: &Constellation) -> Result<()> {
        if self.len() != c.len() {
            return Err(Error::Config(format!(
                "distribution has {} entries but the constellation has {} points",
                self.len(),
                c.len()
            )));
        }
        Ok(())
    }
}

/// Bit-level statistics implied by a symbol distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BitStatistics {
    /// `P_{B_i}(0)` per tributary.
    pub tributary_p0: Vec<f64>,
    /// `P_B(0)` of the pooled bit stream.
    pub pooled_p0: f64,
    /// `H(B_i)` per tributary.
    pub tributary_entropy: Vec<f64>,
    /// `H(B)` of the pooled bit stream.
    pub pooled_entropy: f64,
    /// Joint entropy `H(B_1, ..., B_m)`.
    pub joint_entropy: f64,
}

impl BitStatistics {
    pub fn sum_tributary_entropy(&self) -> f64 {
        self.tributary_entropy.iter().sum()
    }

    pub fn tributary_prior(&self, tributary: usize, bit: u8) -> f64 {
        let p0 = self.tributary_p0[tributary];
        if bit == 0 {
            p0
        } else {
            1.0 - p0
        }
    }

    pub fn pooled_prior(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.pooled_p0
        } else {
            1.0 - self.pooled_p0
        }
    }
}

/// Per-tributary marginals and entropies of `d` under the labeling of `c`.
pub fn derive_bit_statistics(c: &Constellation, d: &ShapedDistribution) -> Result<BitStatistics> {
    d.check_against(c)?;
    let m = c.bits_per_symbol();
    let mut tributary_p0 = vec![0.0; m];
    for (point, &p) in d.probabilities().iter().enumerate() {
        for (t, p0) in tributary_p0.iter_mut().enumerate() {
            if c.tributary_bit(point, t) == 0 {
                *p0 += p;
            }
        }
    }
    if let Some(t) = c.sign_tributary() {
        if d.is_symmetric(0.0) {
            tributary_p0[t] = 0.5;
        }
    }
    let pooled_p0 = tributary_p0.iter().sum::<f64>() / m as f64;
    let tributary_entropy = tributary_p0.iter().map(|&p| binary_entropy(p)).collect();
    Ok(BitStatistics {
        tributary_p0,
        pooled_p0,
        tributary_entropy,
        pooled_entropy: binary_entropy(pooled_p0),
        // Labels are a bijection of the points.
        joint_entropy: entropy(d.probabilities()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pam(m: usize) -> Constellation {
        Constellation::gray_pam(m, &Constellation::default_mapper(m)).unwrap()
    }

    #[test]
    fn binary_pam_sign_convention() {
        let c = pam(1);
        assert_eq!(c.points(), &[-1.0, 1.0]);
        assert_eq!(c.labels(), &[1, 0]);
        assert_eq!(c.tributary_bit(1, 0), 0);
    }

    #[test]
    fn four_pam_gray_labels() {
        let c = Constellation::gray_pam(2, &[2, 1]).unwrap();
        assert_eq!(c.points(), &[-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(c.labels(), &[0b10, 0b11, 0b01, 0b00]);
        assert_eq!(c.sign_tributary(), Some(0));
    }

    #[test]
    fn gray_adjacency_exhaustive() {
        for m in 1..=MAX_BITS_PER_SYMBOL {
            let c = pam(m);
            assert_eq!(c.len(), 1 << m);
            for w in c.points().windows(2) {
                assert!(w[0] < w[1]);
            }
            for w in c.labels().windows(2) {
                assert_eq!((w[0] ^ w[1]).count_ones(), 1);
            }
        }
    }

    #[test]
    fn eight_pam_mapper_3_2_1() {
        let c = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        assert_eq!(
            c.labels()
                .windows(2)
                .filter(|w| (w[0] ^ w[1]).count_ones() == 1)
                .count(),
            7
        );
        // amplitude bits depend on |x| only
        for a in 0..4 {
            let p = c.point_index(false, a);
            let n = c.point_index(true, a);
            assert_eq!(c.tributary_bits(p)[1..], c.tributary_bits(n)[1..]);
            assert_eq!(c.tributary_bit(p, 0), 0);
            assert_eq!(c.tributary_bit(n, 0), 1);
        }
        for point in 0..8 {
            assert_eq!(c.point_for_bits(c.tributary_bits(point)), point);
        }
    }

    #[test]
    fn alternate_mapper_permutes_amplitude_bits() {
        let a = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let b = Constellation::gray_pam(3, &[3, 1, 2]).unwrap();
        for point in 0..8 {
            assert_eq!(a.tributary_bit(point, 1), b.tributary_bit(point, 2));
            assert_eq!(a.tributary_bit(point, 2), b.tributary_bit(point, 1));
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(matches!(Constellation::gray_pam(0, &[]), Err(Error::Config(_))));
        assert!(Constellation::gray_pam(9, &Constellation::default_mapper(9)).is_err());
        assert!(Constellation::gray_pam(3, &[3, 3, 1]).is_err());
        assert!(Constellation::gray_pam(3, &[3, 2]).is_err());
        assert!(Constellation::gray_pam(2, &[0, 1]).is_err());
    }

    #[test]
    fn uniform_eight_pam_statistics() {
        let c = pam(3);
        let s = derive_bit_statistics(&c, &ShapedDistribution::uniform(&c)).unwrap();
        for h in &s.tributary_entropy {
            assert!((h - 1.0).abs() < 1e-12);
        }
        assert!((s.pooled_entropy - 1.0).abs() < 1e-12);
        assert!((s.joint_entropy - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_toy_entropy() {
        let c = pam(1);
        let d = ShapedDistribution::new(vec![0.1, 0.9]).unwrap();
        let s = derive_bit_statistics(&c, &d).unwrap();
        assert!((s.pooled_entropy - 0.468_995_593_589_281).abs() < 1e-12);
        assert!((s.pooled_p0 - 0.9).abs() < 1e-15);
    }

    #[test]
    fn mb_uniform_at_full_entropy() {
        let c = pam(3);
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 3.0).unwrap();
        assert_eq!(d.nu(), Some(0.0));
        let s = derive_bit_statistics(&c, &d).unwrap();
        assert!((s.pooled_entropy - 1.0).abs() < 1e-12);
        assert!((s.sum_tributary_entropy() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mb_matches_target_and_is_monotone() {
        let c = pam(3);
        let mut last_nu = f64::INFINITY;
        for target in [1.2, 2.0, 2.803, 2.951, 2.995] {
            let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, target).unwrap();
            let s = derive_bit_statistics(&c, &d).unwrap();
            assert!((s.joint_entropy - target).abs() < 1e-6);
            let nu = d.nu().unwrap();
            assert!(nu < last_nu);
            last_nu = nu;
            assert!(d.is_symmetric(0.0));
            assert_eq!(s.tributary_p0[0], 0.5);
        }
    }

    #[test]
    fn mb_nearly_uniform_tail() {
        let c = pam(3);
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 2.995).unwrap();
        let p = d.probabilities();
        // exp(-48 nu) with nu ~ 4.612e-3
        assert!((p[7] / p[4] - 0.8014).abs() < 1e-3, "{}", p[7] / p[4]);
        assert!(p[0] / p[3] > 0.8);
        assert!(d.nu().unwrap() < 5e-3);
    }

    #[test]
    fn mb_rejects_out_of_range_targets() {
        let c = pam(3);
        assert!(matches!(
            ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 3.1),
            Err(Error::Domain(_))
        ));
        assert!(ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 0.9).is_err());
    }

    #[test]
    fn normalization_gives_unit_energy() {
        let c = pam(3);
        for target in [2.803, 3.0] {
            let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, target).unwrap();
            let n = c.normalized(&d);
            assert!((n.energy(&d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip() {
        let c = pam(3);
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 2.9).unwrap();
        let back = ShapedDistribution::from_text(&d.to_text()).unwrap();
        assert_eq!(back.probabilities(), d.probabilities());
        assert!(ShapedDistribution::from_text("0.5\n0.6\n").is_err());
        assert!(ShapedDistribution::from_text("0.5\nabc\n").is_err());
    }

    #[test]
    fn subadditivity_for_shaped_inputs() {
        let c = pam(3);
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 2.803).unwrap();
        let s = derive_bit_statistics(&c, &d).unwrap();
        assert!(s.joint_entropy < s.sum_tributary_entropy() - 1e-3);
        let pooled = s.tributary_p0.iter().sum::<f64>() / 3.0;
        assert_eq!(pooled, s.pooled_p0);
    }
}
