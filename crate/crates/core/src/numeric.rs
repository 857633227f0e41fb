//! Small numerical kernels shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

const LANES: usize = 8;

/// Branch-free `exp` accurate to a few ulp on `[-708, 709]`; returns 0 below
/// `-708`. Degree-12 Taylor polynomial in Estrin form, written so that loops
/// over slices vectorize. Relies on hardware FMA (see `.cargo/config.toml`).
#[inline(always)]
pub fn exp_fast(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let xc = x.max(-708.0).min(709.0);
    let t = xc.mul_add(LOG2E, SHIFT);
    let k = t - SHIFT;
    let r = k.mul_add(-LN2_LO, k.mul_add(-LN2_HI, xc));
    let r2 = r * r;
    let r4 = r2 * r2;
    let p01 = r + 1.0;
    let p23 = r.mul_add(1.0 / 6.0, 0.5);
    let p45 = r.mul_add(1.0 / 120.0, 1.0 / 24.0);
    let p67 = r.mul_add(1.0 / 5_040.0, 1.0 / 720.0);
    let p89 = r.mul_add(1.0 / 362_880.0, 1.0 / 40_320.0);
    let p1011 = r.mul_add(1.0 / 39_916_800.0, 1.0 / 3_628_800.0);
    let p03 = r2.mul_add(p23, p01);
    let p47 = r2.mul_add(p67, p45);
    let p812 = r4.mul_add(1.0 / 479_001_600.0, r2.mul_add(p1011, p89));
    let p = r4.mul_add(r4.mul_add(p812, p47), p03);
    let bits = t.to_bits().wrapping_sub(SHIFT.to_bits());
    let scale = f64::from_bits(bits.wrapping_add(1023) << 52);
    let v = p * scale;
    if x < -708.0 {
        0.0
    } else {
        v
    }
}

/// `sum_i exp(-rate_i * |s - bound_i|)` over equally long slices.
#[inline]
pub fn sum_exp_decay(rate: &[f64], bound: &[f64], s: f64) -> f64 {
    debug_assert_eq!(rate.len(), bound.len());
    let mut acc = [0.0f64; LANES];
    let n = rate.len() / LANES * LANES;
    for (rc, bc) in rate[..n]
        .chunks_exact(LANES)
        .zip(bound[..n].chunks_exact(LANES))
    {
        let mut e = [0.0f64; LANES];
        for l in 0..LANES {
            e[l] = exp_fast(-rc[l] * (s - bc[l]).abs());
        }
        for l in 0..LANES {
            acc[l] += e[l];
        }
    }
    let mut tail = 0.0;
    for i in n..rate.len() {
        tail += exp_fast(-rate[i] * (s - bound[i]).abs());
    }
    lane_sum(&acc) + tail
}

/// Padding multiple required by [`sum_exp_decay_range`].
pub const EXP_LANES: usize = LANES;

/// `sum_{i in lo..hi} exp(-rate_i * |s - bound_i|)` for slices whose length
/// is a multiple of [`EXP_LANES`]. Whole lane groups are evaluated and
/// masked, so short ranges stay vectorized.
#[inline]
pub fn sum_exp_decay_range(rate: &[f64], bound: &[f64], s: f64, lo: usize, hi: usize) -> f64 {
    debug_assert!(rate.len().is_multiple_of(LANES) && rate.len() == bound.len() && hi <= rate.len());
    if lo >= hi {
        return 0.0;
    }
    let mut acc = [0.0f64; LANES];
    for c in lo / LANES..hi.div_ceil(LANES) {
        let base = c * LANES;
        let rc = &rate[base..base + LANES];
        let bc = &bound[base..base + LANES];
        let mut e = [0.0f64; LANES];
        for l in 0..LANES {
            let v = exp_fast(-rc[l] * (s - bc[l]).abs());
            let i = base + l;
            e[l] = if i >= lo && i < hi { v } else { 0.0 };
        }
        for l in 0..LANES {
            acc[l] += e[l];
        }
    }
    lane_sum(&acc)
}

#[inline(always)]
fn lane_sum(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7]))
}

/// Pairwise (cascade) summation with a fixed reduction tree.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
