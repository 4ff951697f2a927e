//! Histogram estimators for LLR distributions.
//!
//! Every family of histograms uses one grid of bin edges shared by all its
//! members (both conditionals of `L | B`, or `L_a` and its fold `|L_a|`).
//! The outermost bins reach to `±L_max` so clipped samples are absorbed.

use crate::demapper::L_MAX;
use crate::entropy::{binary_entropy, plogp};

/// Default number of histogram levels (2^5).
pub const DEFAULT_LEVELS: usize = 32;

// Resolution of the candidate grid searched by `Binning::MaxInformation`.
const FINE_CELLS: usize = 512;
/// Smallest fine cell the optimizer may place a cut after. Finer grids on
/// short traces let the cut search fit noise.
const MIN_CELL_SAMPLES: usize = 2000;

fn fine_cell_count(samples: usize, levels: usize) -> usize {
    (samples / MIN_CELL_SAMPLES).clamp(levels, FINE_CELLS)
}

/// Rule for placing histogram edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Edges at equal-mass quantiles of the magnitude, mirrored about zero.
    EqualMass,
    /// Contiguous merge of a fine equal-mass grid into the configured number
    /// of levels that maximizes the plug-in information of the binned
    /// variable about the sent bit.
    #[default]
    MaxInformation,
}

/// Sample accumulator for one binary-input family: values with their bits.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub value: f64,
    pub bit: u8,
}

/// Counts of a scalar variable conditioned on a binary variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalHistogram {
    edges: Vec<f64>,
    counts: [Vec<u64>; 2],
}

impl ConditionalHistogram {
    pub fn new(edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2, "a histogram needs at least one bin");
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]), "edges must increase");
        let bins = edges.len() - 1;
        ConditionalHistogram {
            edges,
            counts: [vec![0; bins], vec![0; bins]],
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn counts(&self, bit: u8) -> &[u64] {
        &self.counts[bit as usize]
    }

    pub fn total(&self, bit: u8) -> u64 {
        self.counts[bit as usize].iter().sum()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bin of `v`; bins are half-open except the last one, values beyond
    /// the outer edges land in the outer bins.
    #[inline]
    pub fn bin_of(&self, v: f64) -> usize {
        bin_index(&self.edges, v)
    }

    #[inline]
    pub fn add(&mut self, v: f64, bit: u8) {
        let b = self.bin_of(v);
        self.counts[(bit & 1) as usize][b] += 1;
    }

    /// Adds the counts of a histogram built on the same edges.
    pub fn merge(&mut self, other: &ConditionalHistogram) {
        assert_eq!(self.edges, other.edges, "histograms must share edges");
        for b in 0..2 {
            for (a, o) in self.counts[b].iter_mut().zip(&other.counts[b]) {
                *a += o;
            }
        }
    }

    /// Mutual information in bits between the bit and the binned value,
    /// weighting the empirical conditionals by the given prior `P(B=0)`.
    pub fn mutual_information(&self, p0: f64) -> f64 {
        let n = [self.total(0) as f64, self.total(1) as f64];
        let prior = [p0, 1.0 - p0];
        let mut mi = 0.0;
        for k in 0..self.bins() {
            let cond = [
                if n[0] > 0.0 {
                    self.counts[0][k] as f64 / n[0]
                } else {
                    0.0
                },
                if n[1] > 0.0 {
                    self.counts[1][k] as f64 / n[1]
                } else {
                    0.0
                },
            ];
            let marginal = prior[0] * cond[0] + prior[1] * cond[1];
            for b in 0..2 {
                if cond[b] > 0.0 && prior[b] > 0.0 {
                    mi += prior[b] * cond[b] * (cond[b] / marginal).log2();
                }
            }
        }
        mi.max(0.0)
    }
}

/// Counts of a single scalar variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2, "a histogram needs at least one bin");
        let bins = edges.len() - 1;
        Histogram {
            edges,
            counts: vec![0; bins],
        }
    }

    pub fn from_parts(edges: Vec<f64>, counts: Vec<u64>) -> Self {
        assert_eq!(edges.len(), counts.len() + 1);
        Histogram { edges, counts }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let b = self.bin_of(v);
        self.counts[b] += 1;
    }

    /// Bin of `v`. On edges symmetric about zero, negative values are binned
    /// as the mirror of `-v` so that folding maps `v` and `-v` together.
    pub fn bin_of(&self, v: f64) -> usize {
        let bins = self.counts.len();
        if v < 0.0 && bins.is_multiple_of(2) && self.edges[bins / 2] == 0.0 {
            bins - 1 - bin_index(&self.edges, -v)
        } else {
            bin_index(&self.edges, v)
        }
    }

    /// Differential entropy of the piecewise-uniform density the histogram
    /// describes: `sum -p_k log2(p_k / width_k)`. Empty bins contribute zero.
    pub fn differential_entropy(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| {
                let p = c as f64 / total;
                if p > 0.0 {
                    plogp(p) + p * (w[1] - w[0]).log2()
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Folds a histogram on edges symmetric about zero into the histogram of
    /// the magnitude on the non-negative edges.
    pub fn fold(&self) -> Histogram {
        let bins = self.counts.len();
        assert!(bins.is_multiple_of(2), "folding needs an even number of bins");
        let half = bins / 2;
        debug_assert!(self.edges[half] == 0.0, "edges must be symmetric about zero");
        let edges = self.edges[half..].to_vec();
        let counts = (0..half)
            .map(|j| self.counts[half + j] + self.counts[half - 1 - j])
            .collect();
        Histogram { edges, counts }
    }
}

#[inline]
fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    // first edge strictly greater than v, minus one
    let idx = edges.partition_point(|&e| e <= v);
    idx.saturating_sub(1).min(bins - 1)
}

fn outer_edge(max_abs: f64) -> f64 {
    if max_abs.is_finite() {
        max_abs.max(L_MAX)
    } else {
        L_MAX
    }
}

fn dedup_edges(mut edges: Vec<f64>) -> Vec<f64> {
    edges.dedup_by(|a, b| *a <= *b);
    edges
}

/// Equal-mass quantiles of `sorted` (ascending) splitting it into `parts`.
fn quantile_cuts(sorted: &[f64], parts: usize) -> Vec<f64> {
    let n = sorted.len();
    (1..parts).map(|j| sorted[(j * n / parts).min(n - 1)]).collect()
}

/// Symmetric edges for a signed variable whose magnitudes are `magnitudes`:
/// `levels / 2` magnitude bins mirrored about zero.
pub fn symmetric_edges(magnitudes: &[f64], levels: usize, binning: Binning, bits: Option<&[u8]>) -> Vec<f64> {
    let half = (levels / 2).max(1);
    let mut sorted: Vec<f64> = magnitudes.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let top = outer_edge(sorted.last().copied().unwrap_or(0.0));
    let cuts = match (binning, bits) {
        (Binning::MaxInformation, Some(bits)) if !sorted.is_empty() => {
            optimized_magnitude_cuts(magnitudes, bits, half, top)
        }
        _ if sorted.is_empty() => Vec::new(),
        _ => quantile_cuts(&sorted, half),
    };
    let mut mag = vec![0.0];
    mag.extend(cuts.into_iter().filter(|&c| c > 0.0 && c < top));
    mag.push(top);
    let mag = dedup_edges(mag);
    let mut edges: Vec<f64> = mag.iter().rev().map(|&e| -e).collect();
    edges.pop();
    edges.extend_from_slice(&mag);
    edges
}

/// Edges for a signed variable conditioned on a bit with prior `p0`.
pub fn signed_edges(samples: &[Sample], levels: usize, binning: Binning, p0: f64) -> Vec<f64> {
    let max_abs = samples.iter().fold(0.0f64, |a, s| a.max(s.value.abs()));
    let top = outer_edge(max_abs);
    match binning {
        Binning::EqualMass => {
            let mags: Vec<f64> = samples.iter().map(|s| s.value.abs()).collect();
            symmetric_edges(&mags, levels, Binning::EqualMass, None)
        }
        Binning::MaxInformation => {
            if samples.is_empty() {
                return vec![-top, 0.0, top];
            }
            let mut sorted: Vec<Sample> = samples.to_vec();
            sorted.sort_unstable_by(|a, b| a.value.total_cmp(&b.value));
            let cells = fine_cells(&sorted, fine_cell_count(sorted.len(), levels));
            let n = [
                samples.iter().filter(|s| s.bit == 0).count() as f64,
                samples.iter().filter(|s| s.bit == 1).count() as f64,
            ];
            let prior = [p0, 1.0 - p0];
            let gain = |c0: u64, c1: u64| -> f64 {
                let cond = [
                    if n[0] > 0.0 { c0 as f64 / n[0] } else { 0.0 },
                    if n[1] > 0.0 { c1 as f64 / n[1] } else { 0.0 },
                ];
                let marginal = prior[0] * cond[0] + prior[1] * cond[1];
                (0..2)
                    .filter(|&b| cond[b] > 0.0 && prior[b] > 0.0)
                    .map(|b| prior[b] * cond[b] * (cond[b] / marginal).log2())
                    .sum()
            };
            let cuts = merge_cells(&cells, levels, gain);
            let mut edges = vec![-top];
            edges.extend(cuts.into_iter().filter(|&c| c > -top && c < top));
            edges.push(top);
            dedup_edges(edges)
        }
    }
}

/// A run of sorted samples: its upper boundary value and per-bit counts.
struct Cell {
    // first value of the next cell; the cut placed after this cell
    cut: f64,
    counts: [u64; 2],
}

fn fine_cells(sorted: &[Sample], target: usize) -> Vec<Cell> {
    let n = sorted.len();
    let mut cells = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = ((cells.len() + 1) * n / target).max(start + 1).min(n);
        // never split equal values
        while end < n && sorted[end].value == sorted[end - 1].value {
            end += 1;
        }
        let mut counts = [0u64; 2];
        for s in &sorted[start..end] {
            counts[(s.bit & 1) as usize] += 1;
        }
        let cut = if end < n { sorted[end].value } else { f64::INFINITY };
        cells.push(Cell { cut, counts });
        start = end;
    }
    cells
}

/// Dynamic program: split `cells` into at most `levels` contiguous groups
/// maximizing the sum of `gain` over groups. Returns the interior cuts.
fn merge_cells(cells: &[Cell], levels: usize, gain: impl Fn(u64, u64) -> f64) -> Vec<f64> {
    let g = cells.len();
    let levels = levels.min(g).max(1);
    let mut prefix = vec![[0u64; 2]; g + 1];
    for (i, c) in cells.iter().enumerate() {
        prefix[i + 1] = [prefix[i][0] + c.counts[0], prefix[i][1] + c.counts[1]];
    }
    // value[i][j]: gain of grouping cells i..j (exclusive end)
    let value = |i: usize, j: usize| gain(prefix[j][0] - prefix[i][0], prefix[j][1] - prefix[i][1]);
    let mut table = vec![0.0f64; (g + 1) * (g + 1)];
    for i in 0..g {
        for j in i + 1..=g {
            table[i * (g + 1) + j] = value(i, j);
        }
    }
    let neg = f64::NEG_INFINITY;
    // best[l][j]: best score covering cells 0..j with l groups
    let mut best = vec![vec![neg; g + 1]; levels + 1];
    let mut from = vec![vec![0usize; g + 1]; levels + 1];
    best[0][0] = 0.0;
    for l in 1..=levels {
        for j in l..=g {
            let mut b = neg;
            let mut arg = 0;
            for i in (l - 1)..j {
                let prev = best[l - 1][i];
                if prev == neg {
                    continue;
                }
                let s = prev + table[i * (g + 1) + j];
                if s > b + 1e-15 {
                    b = s;
                    arg = i;
                }
            }
            best[l][j] = b;
            from[l][j] = arg;
        }
    }
    let mut l = (1..=levels)
        .max_by(|&a, &b| best[a][g].partial_cmp(&best[b][g]).unwrap().then(b.cmp(&a)))
        .unwrap();
    let mut cuts = Vec::new();
    let mut j = g;
    while l > 0 {
        let i = from[l][j];
        if i > 0 {
            cuts.push(cells[i - 1].cut);
        }
        j = i;
        l -= 1;
    }
    cuts.reverse();
    cuts
}

/// Magnitude cuts for the folded asymmetric LLR: the merge maximizes the
/// information the magnitude bin carries about the sign, i.e. minimizes
/// `sum_j q_j H_2(P(L_a > 0 | j))`.
fn optimized_magnitude_cuts(magnitudes: &[f64], positive: &[u8], half: usize, top: f64) -> Vec<f64> {
    // `positive[k]` is 0 when the signed value is non-negative.
    let mut sorted: Vec<Sample> = magnitudes
        .iter()
        .zip(positive)
        .map(|(&value, &bit)| Sample { value, bit })
        .collect();
    sorted.sort_unstable_by(|a, b| a.value.total_cmp(&b.value));
    let cells = fine_cells(&sorted, fine_cell_count(sorted.len(), half));
    let total = sorted.len() as f64;
    let gain = |c0: u64, c1: u64| -> f64 {
        let n = (c0 + c1) as f64;
        if n == 0.0 {
            return 0.0;
        }
        -(n / total) * binary_entropy(c0 as f64 / n)
    };
    merge_cells(&cells, half, gain)
        .into_iter()
        .filter(|&c| c > 0.0 && c < top)
        .collect()
}
