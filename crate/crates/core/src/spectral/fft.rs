//! Multidimensional DFT on the torus.
//!
//! Convention: `f^(p) = sum_x e^{+i p.x} f(x)` and
//! `f(x) = L^-d sum_p e^{-i p.x} f^(p)`, with `p = 2 pi m / L`, `m in [0, L)^d`.
//! Frequencies share the row-major site indexing.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::ScalarLatticeField;
use crate::lattice::LatticeDims;

/// Complex Fourier coefficients of a lattice field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    dims: LatticeDims,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(dims: LatticeDims, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), dims.num_sites());
        Self { dims, coeffs }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }
}

/// Plans for one torus size, reusable across many transforms.
pub struct FftPlan {
    dims: LatticeDims,
    positive: Arc<dyn Fft<f64>>,
    negative: Arc<dyn Fft<f64>>,
}

impl FftPlan {
    pub fn new(dims: LatticeDims) -> Self {
        let mut planner = FftPlanner::new();
        // rustfft's "inverse" uses e^{+2 pi i jk/n}
        let positive = planner.plan_fft_inverse(dims.side());
        let negative = planner.plan_fft_forward(dims.side());
        Self {
            dims,
            positive,
            negative,
        }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    fn along_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let l = self.dims.side();
        let n = data.len();
        let mut line = vec![Complex64::new(0.0, 0.0); l];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dims.d() {
            let stride = self.dims.stride(axis);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(l) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * l;
            for base in (0..n).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (m, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, slot) in line.iter().enumerate() {
                        data[start + m * stride] = *slot;
                    }
                }
            }
        }
    }

    /// In-place forward transform (positive exponent, unnormalized).
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.positive);
    }

    /// In-place inverse transform (negative exponent, scaled by `L^-d`).
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.negative);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    pub fn forward_real(&self, f: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, coeffs: Vec<Complex64>) -> Vec<f64> {
        let mut data = coeffs;
        self.inverse_in_place(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }
}

pub fn dft(f: &ScalarLatticeField) -> SpectralField {
    let plan = FftPlan::new(f.dims());
    SpectralField::new(f.dims(), plan.forward_real(f.values()))
}

/// Inverse transform; the imaginary part is dropped (zero for Hermitian input).
pub fn idft(spec: &SpectralField) -> ScalarLatticeField {
    let plan = FftPlan::new(spec.dims());
    let values = plan.inverse_real(spec.coeffs.clone());
    ScalarLatticeField::new(spec.dims(), values).expect("shape follows dims")
}

/// Complex inverse transform.
pub fn idft_complex(spec: &SpectralField) -> Vec<Complex64> {
    let plan = FftPlan::new(spec.dims());
    let mut data = spec.coeffs.clone();
    plan.inverse_in_place(&mut data);
    data
}

/// Angular frequency `2 pi m / L` of mode index `m`.
#[inline]
pub fn angle(m: usize, side: usize) -> f64 {
    2.0 * PI * m as f64 / side as f64
}

/// Per-frequency lookup tables shared by the multiplier operators.
pub struct FrequencyTables {
    dims: LatticeDims,
    /// `D^(p) = sum_j (1 - cos p_j)`
    dhat: Vec<f64>,
    /// `cos(2 pi m / L)` and `sin(2 pi m / L)` for each `m`
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl FrequencyTables {
    pub fn new(dims: LatticeDims) -> Self {
        let l = dims.side();
        let cos: Vec<f64> = (0..l).map(|m| angle(m, l).cos()).collect();
        let sin: Vec<f64> = (0..l).map(|m| angle(m, l).sin()).collect();
        let dhat = (0..dims.num_sites())
            .map(|p| {
                (0..dims.d())
                    .map(|a| 1.0 - cos[dims.coord(p, a)])
                    .sum()
            })
            .collect();
        Self {
            dims,
            dhat,
            cos,
            sin,
        }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    #[inline]
    pub fn dhat(&self, p: usize) -> f64 {
        self.dhat[p]
    }

    pub fn dhat_all(&self) -> &[f64] {
        &self.dhat
    }

    /// `e^{i p_axis}`.
    #[inline]
    pub fn phase(&self, p: usize, axis: usize) -> Complex64 {
        let m = self.dims.coord(p, axis);
        Complex64::new(self.cos[m], self.sin[m])
    }
}
