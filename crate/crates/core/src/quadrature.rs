//! Globally adaptive 7/15-point Gauss-Kronrod quadrature for complex
//! integrands on a finite interval.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::{Error, Result, C64};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kron += pair * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    Segment { a, b, value: kron * h, error: ((kron - gauss) * h).norm() }
}

/// Integration tolerances and subdivision budget.
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_segments: 20_000 }
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: C64,
    pub error: f64,
    pub segments: usize,
}

/// Integrate `f` over `[a, b]`, splitting first at the given interior
/// `breaks` (points where the integrand is sharply peaked).
pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, breaks: &[f64], opts: QuadOptions) -> Result<Quadrature> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap: BinaryHeap<Segment> = cuts.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
    loop {
        let value: C64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        if error <= opts.abs_tol.max(opts.rel_tol * value.norm()) {
            return Ok(Quadrature { value, error, segments: heap.len() });
        }
        if heap.len() >= opts.max_segments {
            return Err(Error::Quadrature { estimate: error / value.norm().max(f64::MIN_POSITIVE) });
        }
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| C64::new(x.powi(5) - 3.0 * x * x, 1.0), -1.0, 2.0, &[], QuadOptions::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((q.value - C64::new(exact, 3.0)).norm() < 1e-13);
    }

    #[test]
    fn narrow_lorentzian() {
        // int_{-pi}^{pi} dk / (x0 - k + i eta) -> log term plus -i pi
        let eta = 1e-6;
        let x0 = 0.3;
        let q = integrate(|k| C64::new(1.0, 0.0) / C64::new(x0 - k, eta), -PI, PI, &[x0], QuadOptions::default())
            .unwrap();
        let exact = C64::new(((x0 + PI) / (PI - x0)).ln(), -2.0 * (PI / eta).atan());
        // closed form for the finite interval: log((x0+pi+i eta)/(x0-pi+i eta)) with sign
        let exact_full = (C64::new(x0 + PI, eta) / C64::new(x0 - PI, eta)).ln();
        assert!((q.value - exact_full).norm() < 1e-8 * exact_full.norm());
        assert!((q.value.re - exact.re).abs() < 1e-9);
    }
}
