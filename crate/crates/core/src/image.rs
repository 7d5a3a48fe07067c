//! Cartesian grids and the image containers defined on them.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, shape, Result};

/// Square Cartesian grid centred on the field of view.
///
/// Pixel `(ix, iy)` sits at `((ix - nx/2)·Δ, (iy - ny/2)·Δ)` in mm, so the
/// FOV centre coincides with pixel `(nx/2, ny/2)` (the centred-FFT layout).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Field of view in mm.
    pub fov: f64,
}

impl GridSpec {
    pub fn new(n: usize, fov: f64) -> Result<Self> {
        let grid = Self { nx: n, ny: n, fov };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(invalid!("grid has zero pixels"));
        }
        if self.nx != self.ny {
            return Err(invalid!("grid must be square, got {}x{}", self.nx, self.ny));
        }
        if self.nx < 8 {
            return Err(invalid!("grid needs at least 8 pixels per side, got {}", self.nx));
        }
        if !(self.fov.is_finite() && self.fov > 0.0) {
            return Err(invalid!("field of view must be positive, got {}", self.fov));
        }
        Ok(())
    }

    /// Pixel spacing in mm.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.fov / self.nx as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical x coordinate (mm) of column `ix`.
    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 - (self.nx / 2) as f64) * self.spacing()
    }

    /// Physical y coordinate (mm) of row `iy`.
    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 - (self.ny / 2) as f64) * self.spacing()
    }

    /// Pixel centres in row-major order (`iy` outer, `ix` inner).
    pub fn coordinates(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push([self.x(ix), self.y(iy)]);
            }
        }
        out
    }

    /// Radius of the circular support inscribed in the FOV.
    #[inline]
    pub fn support_radius(&self) -> f64 {
        0.5 * self.fov
    }
}

/// One complex frame on a [`GridSpec`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(shape!("image has {} values, grid needs {}", data.len(), grid.len()));
        }
        Ok(Self { grid, data })
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.data[iy * self.grid.nx + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: Complex64) {
        self.data[iy * self.grid.nx + ix] = v;
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| crate::math::abs(*z)).collect()
    }

    /// Bilinear interpolation at a physical position; zero beyond the pixel
    /// lattice and outside the inscribed support disk.
    pub fn interpolate(&self, p: [f64; 2]) -> Complex64 {
        interpolate_on(&self.grid, &self.data, p)
    }
}

/// [`ComplexImage::interpolate`] on borrowed pixel data.
pub fn interpolate_on(g: &GridSpec, data: &[Complex64], p: [f64; 2]) -> Complex64 {
    let r = g.support_radius();
    if p[0] * p[0] + p[1] * p[1] > r * r {
        return Complex64::new(0.0, 0.0);
    }
    let d = g.spacing();
    let u = p[0] / d + (g.nx / 2) as f64;
    let v = p[1] / d + (g.ny / 2) as f64;
    let u0 = crate::math::floor(u);
    let v0 = crate::math::floor(v);
    let fx = u - u0;
    let fy = v - v0;
    let (i0, j0) = (u0 as i64, v0 as i64);
    let fetch = |i: i64, j: i64| -> Complex64 {
        if i < 0 || j < 0 || i >= g.nx as i64 || j >= g.ny as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            data[j as usize * g.nx + i as usize]
        }
    };
    fetch(i0, j0) * ((1.0 - fx) * (1.0 - fy))
        + fetch(i0 + 1, j0) * (fx * (1.0 - fy))
        + fetch(i0, j0 + 1) * ((1.0 - fx) * fy)
        + fetch(i0 + 1, j0 + 1) * (fx * fy)
}

/// A sequence of frames sharing one grid, each stamped with a time in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicImage {
    pub grid: GridSpec,
    pub frame_times: Vec<f64>,
    /// `frame_times.len() × grid.len()` values, frame-major.
    pub data: Vec<Complex64>,
}

impl DynamicImage {
    pub fn zeros(grid: GridSpec, frame_times: Vec<f64>) -> Self {
        let n = frame_times.len() * grid.len();
        Self { grid, frame_times, data: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_frames(grid: GridSpec, frame_times: Vec<f64>, frames: &[ComplexImage]) -> Result<Self> {
        if frames.len() != frame_times.len() {
            return Err(shape!("{} frames but {} frame times", frames.len(), frame_times.len()));
        }
        let mut data = Vec::with_capacity(frames.len() * grid.len());
        for f in frames {
            if f.grid != grid {
                return Err(shape!("frame grid differs from sequence grid"));
            }
            data.extend_from_slice(&f.data);
        }
        Ok(Self { grid, frame_times, data })
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn frame_image(&self, t: usize) -> ComplexImage {
        ComplexImage { grid: self.grid, data: self.frame(t).to_vec() }
    }
}
