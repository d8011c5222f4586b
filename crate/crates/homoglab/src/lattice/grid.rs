use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest total cell count we are willing to address (2^28 cells = 2 GiB
/// per f64 field).
const MAX_CELLS: usize = 1 << 28;

/// Descriptor of a d-dimensional periodic lattice with `l` cells per side and
/// spacing `h`; the physical period per axis is `l * h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    d: usize,
    l: usize,
    h: f64,
}

/// Validated construction of a [`TorusGrid`].
pub fn make_grid(d: usize, l: usize, h: f64) -> Result<TorusGrid> {
    TorusGrid::new(d, l, h)
}

impl TorusGrid {
    pub fn new(d: usize, l: usize, h: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidDimension(d));
        }
        if l < 4 || !l.is_power_of_two() {
            return Err(Error::InvalidSize(l, "must be a power of two >= 4".into()));
        }
        let cells = (l as u128).pow(d as u32);
        if cells > MAX_CELLS as u128 {
            return Err(Error::InvalidSize(
                l,
                format!("{cells} cells exceed the {MAX_CELLS} cell limit"),
            ));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidSize(l, format!("spacing {h} must be positive")));
        }
        Ok(TorusGrid { d, l, h })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Cells per side.
    pub fn side(&self) -> usize {
        self.l
    }

    /// Lattice spacing.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Physical period per axis.
    pub fn period(&self) -> f64 {
        self.l as f64 * self.h
    }

    /// Total number of cells.
    pub fn cells(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Row-major strides, axis 0 slowest.
    pub fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let mut acc = 1;
        for j in (0..self.d).rev() {
            s[j] = acc;
            acc *= self.l;
        }
        s
    }

    /// Flat index of a coordinate tuple.
    pub fn index(&self, coords: &[usize]) -> usize {
        let s = self.strides();
        coords.iter().zip(s.iter()).map(|(c, st)| c * st).sum()
    }

    /// Coordinates of a flat index.
    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for j in (0..self.d).rev() {
            c[j] = idx % self.l;
            idx /= self.l;
        }
        c
    }

    /// Flat index of the cell shifted by +1 along `axis` with wraparound.
    #[inline]
    pub fn shift_up(&self, idx: usize, coord: usize, axis: usize) -> usize {
        let s = self.strides()[axis];
        if coord + 1 < self.l {
            idx + s
        } else {
            idx + s - self.l * s
        }
    }

    /// Flat index of the cell shifted by -1 along `axis` with wraparound.
    #[inline]
    pub fn shift_down(&self, idx: usize, coord: usize, axis: usize) -> usize {
        let s = self.strides()[axis];
        if coord > 0 {
            idx - s
        } else {
            idx + self.l * s - s
        }
    }

    /// Visit every cell as `(flat index, coordinates)`.
    pub fn for_each_cell(&self, mut f: impl FnMut(usize, &[usize; 3])) {
        let mut coords = [0usize; 3];
        for idx in 0..self.cells() {
            f(idx, &coords);
            for j in (0..self.d).rev() {
                coords[j] += 1;
                if coords[j] < self.l {
                    break;
                }
                coords[j] = 0;
            }
        }
    }

    /// Minimal-image displacement of coordinate `c` (in cells) around zero,
    /// returned in length units.
    #[inline]
    pub fn min_image(&self, c: usize) -> f64 {
        let half = self.l / 2;
        let signed = if c > half {
            c as isize - self.l as isize
        } else {
            c as isize
        };
        signed as f64 * self.h
    }

    /// Torus distance (length units) between the cell center with the given
    /// coordinates and an arbitrary point `p` (length units per axis).
    pub fn torus_distance(&self, coords: &[usize; 3], p: &[f64]) -> f64 {
        let period = self.period();
        let mut acc = 0.0;
        for j in 0..self.d {
            let mut delta = (coords[j] as f64 * self.h - p[j]).rem_euclid(period);
            if delta > period / 2.0 {
                delta = period - delta;
            }
            acc += delta * delta;
        }
        acc.sqrt()
    }

    /// Discrete Laplacian symbol `|k|_h^2 = (4/h^2) sum_j sin^2(pi k_j / L)`.
    pub fn laplace_symbol(&self, k: &[usize; 3]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.d {
            let s = (std::f64::consts::PI * k[j] as f64 / self.l as f64).sin();
            acc += s * s;
        }
        4.0 / (self.h * self.h) * acc
    }

    /// Centered-difference symbol `sin(2 pi k_j / L) / h` along `axis`.
    pub fn centered_symbol(&self, k: &[usize; 3], axis: usize) -> f64 {
        (2.0 * std::f64::consts::PI * k[axis] as f64 / self.l as f64).sin() / self.h
    }

    /// Forward-difference symbol `(e^{2 pi i k_j / L} - 1) / h` along `axis`.
    pub fn forward_symbol(&self, k: &[usize; 3], axis: usize) -> num_complex::Complex64 {
        let theta = 2.0 * std::f64::consts::PI * k[axis] as f64 / self.l as f64;
        (num_complex::Complex64::new(theta.cos() - 1.0, theta.sin())) / self.h
    }
}
