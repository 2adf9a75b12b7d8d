//! Small numeric helpers: normal CDF, adaptive quadrature and seeded
//! sampling of the elementary distributions used by the event generators.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub const LN2: f64 = std::f64::consts::LN_2;

/// Standard normal CDF, Phi(x) = erfc(-x / sqrt(2)) / 2.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, rational minimax approximation
/// (three-region scheme, ~1e-16 relative accuracy).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let y = x;
    let result = if y <= 4.0 {
        const C: [f64; 9] = [
            5.64188496988670089e-1,
            8.88314979438837594e0,
            6.61191906371416295e1,
            2.98635138197400131e2,
            8.81952221241769090e2,
            1.71204761263407058e3,
            2.05107837782607147e3,
            1.23033935479799725e3,
            2.15311535474403846e-8,
        ];
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (num + C[7]) / (den + D[7])
    } else {
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242e0,
            1.87295284992346047e0,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        const INV_SQRT_PI: f64 = 5.641895835477562869e-1;
        let ysq = 1.0 / (y * y);
        let mut num = P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + P[i]) * ysq;
            den = (den + Q[i]) * ysq;
        }
        (INV_SQRT_PI - ysq * (num + P[4]) / (den + Q[4])) / y
    };
    // exp(-y^2) computed with a split argument to avoid cancellation
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// Adaptive Simpson quadrature on [a, b] to the given relative tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, fa, m, fm, flm);
        let right = simpson(f, m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * eps, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * eps, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(f, a, fa, b, fb, fm);
    let eps = rel_tol * whole.abs().max(1e-300);
    recurse(f, a, fa, b, fb, fm, whole, eps, 48)
}

/// Poisson sample by inversion; falls back to a rounded normal for large
/// means, which is ample for the event rates handled here.
pub fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean >= 0.0);
    if mean <= 0.0 {
        return 0;
    }
    if mean < 64.0 {
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= rng.random::<f64>();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    } else {
        let z = sample_standard_normal(rng);
        let v = mean + mean.sqrt() * z + 0.5;
        if v < 0.0 {
            0
        } else {
            v.floor() as u64
        }
    }
}

/// Exp(1) sample.
pub fn sample_exponential<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Standard normal via Box-Muller.
pub fn sample_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Symmetric double-exponential (Laplace) sample with the given FWHM.
pub fn sample_double_exponential<R: Rng>(rng: &mut R, fwhm: f64) -> f64 {
    let scale = fwhm / (2.0 * LN2);
    let magnitude = sample_exponential(rng) * scale;
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// Independent child generator: derives a fresh stream from a master seed
/// and a stream index, so parallel workers never share state.
pub fn substream(seed: u64, index: u64) -> ChaCha12Rng {
    use rand_chacha::rand_core::SeedableRng;
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&index.to_le_bytes());
    s[16] = 0x5e;
    ChaCha12Rng::from_seed(s)
}
