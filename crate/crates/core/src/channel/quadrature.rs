//! Adaptive Gauss–Kronrod (G7/K15) integration and normal expectations.

// K15 abscissae (positive half, descending) and weights; G7 uses the odd ones.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Half-width of the standard-normal range integrated; the mass outside is
/// below 3e-19.
pub const NORMAL_SPAN: f64 = 9.0;

const MAX_DEPTH: u32 = 40;

/// K15 estimate and |K15 - G7| on `[a, b]`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection until each panel's Kronrod error estimate is within
/// its share of `tol`. Returns `None` when the depth limit is hit.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Option<f64> {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Option<f64> {
        let (val, err) = gk15(f, a, b);
        if err <= tol {
            return Some(val);
        }
        if depth == 0 {
            return None;
        }
        let m = 0.5 * (a + b);
        Some(recurse(f, a, m, 0.5 * tol, depth - 1)? + recurse(f, m, b, 0.5 * tol, depth - 1)?)
    }
    recurse(f, a, b, tol, MAX_DEPTH)
}

/// Non-adaptive K15 rule on `panels` equal panels.
pub fn composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gk15(f, a + i as f64 * h, a + (i + 1) as f64 * h).0)
        .sum()
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[g(X)]`, `X ~ N(mu, sigma^2)`, by adaptive integration.
pub fn normal_expectation<G: Fn(f64) -> f64>(mu: f64, sigma: f64, g: G, tol: f64) -> Option<f64> {
    let f = |z: f64| std_normal_pdf(z) * g(mu + sigma * z);
    integrate(&f, -NORMAL_SPAN, NORMAL_SPAN, tol)
}
