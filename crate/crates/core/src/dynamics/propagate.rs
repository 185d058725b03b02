//! Propagators for `i d(psi)/dt = H psi` with time-independent `H`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64};

/// Exact propagation through the eigenbasis of a Hermitian matrix.
pub struct SpectralPropagator {
    energies: DVector<f64>,
    vectors: DMatrix<C64>,
    /// Initial state expanded in the eigenbasis.
    coeffs: DVector<C64>,
}

impl SpectralPropagator {
    pub fn new(h: &DMatrix<C64>, psi0: &DVector<C64>) -> Result<Self> {
        let n = h.nrows();
        let eig = SymmetricEigen::try_new(h.clone(), 1e-15, 100 * n.max(10))
            .ok_or_else(|| Error::Eigen(format!("no convergence for dimension {n}")))?;
        let coeffs = eig.eigenvectors.ad_mul(psi0);
        Ok(Self { energies: eig.eigenvalues, vectors: eig.eigenvectors, coeffs })
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn state_at(&self, t: f64) -> DVector<C64> {
        let phased =
            DVector::from_iterator(self.coeffs.len(), self.coeffs.iter().zip(self.energies.iter()).map(|(c, e)| {
                c * C64::from_polar(1.0, -e * t)
            }));
        &self.vectors * phased
    }
}

/// Row-compressed copy of `-i H` used by the integrator.
struct Generator {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Generator {
    fn new(h: &DMatrix<C64>) -> Self {
        let n = h.nrows();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let minus_i = C64::new(0.0, -1.0);
        for i in 0..n {
            row_start.push(cols.len());
            for k in 0..n {
                let v = h[(i, k)];
                if v != C64::new(0.0, 0.0) {
                    cols.push(k);
                    vals.push(minus_i * v);
                }
            }
        }
        row_start.push(cols.len());
        Self { row_start, cols, vals }
    }

    fn apply(&self, y: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[p] * y[self.cols[p]];
            }
            *o = acc;
        }
    }
}

// Dormand-Prince 5(4) tableau; the last stage is evaluated at the step end.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integrator for general (non-Hermitian) `H`.
///
/// A step is accepted when its local error estimate, plus any growth of the
/// norm, stays below `tol_per_time * h`.
pub struct AdaptiveIntegrator {
    gen: Generator,
    state: Vec<C64>,
    time: f64,
    h: f64,
    tol_per_time: f64,
    stages: Vec<Vec<C64>>,
    scratch: Vec<C64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl AdaptiveIntegrator {
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;
    const MIN_STEP: f64 = 1e-12;

    pub fn new(h: &DMatrix<C64>, psi0: &DVector<C64>, tol_per_time: f64) -> Self {
        let n = psi0.len();
        let gen = Generator::new(h);
        let scale = h.iter().map(|v| v.norm()).fold(0.0_f64, f64::max).max(1.0);
        Self {
            gen,
            state: psi0.iter().copied().collect(),
            time: 0.0,
            h: 0.1 / scale,
            tol_per_time,
            stages: vec![vec![C64::new(0.0, 0.0); n]; 7],
            scratch: vec![C64::new(0.0, 0.0); n],
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.state)
    }

    fn norm_sqr(y: &[C64]) -> f64 {
        y.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Advance exactly to `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let n = self.state.len();
        let mut y5 = vec![C64::new(0.0, 0.0); n];
        // first-same-as-last: stage 0 holds f(y) at the current time
        self.gen.apply(&self.state, &mut self.stages[0]);
        while t_target - self.time > 1e-14 * t_target.abs().max(1.0) {
            let h = self.h.min(t_target - self.time);
            #[allow(clippy::needless_range_loop)]
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = self.state[i];
                    for (p, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += self.stages[p][i] * (h * a);
                        }
                    }
                    self.scratch[i] = acc;
                }
                self.gen.apply(&self.scratch, &mut self.stages[s]);
                if s == 6 {
                    y5.copy_from_slice(&self.scratch);
                }
            }
            let mut err = 0.0_f64;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    let d = B5[s] - B4[s];
                    if d != 0.0 {
                        e += self.stages[s][i] * (h * d);
                    }
                }
                err = err.max(e.norm());
            }
            let drift = (Self::norm_sqr(&y5) - Self::norm_sqr(&self.state)).max(0.0);
            let err = err.max(drift);
            let allowed = self.tol_per_time * h;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 5.0) };
            if err <= allowed {
                self.state.copy_from_slice(&y5);
                self.time += h;
                self.stages.swap(0, 6);
                self.accepted += 1;
                if h == self.h {
                    self.h *= factor;
                }
            } else {
                self.rejected += 1;
                self.h = h * factor.min(0.9);
                if self.h < Self::MIN_STEP {
                    return Err(Error::Integrator(format!("step size underflow at t = {}", self.time)));
                }
            }
        }
        self.time = t_target;
        Ok(())
    }
}
