//! Per-channel 1D tables and RGB→RGB 3D tables.
//!
//! Both are stored planar. A [`Lut3D`] is indexed `[c][i_r][i_g][i_b]` with
//! red varying slowest; the same order is used for the flattened output of
//! the 3D generator.

use crate::error::{Error, Result};
use crate::image::Sample;

fn check_size(what: &'static str, size: usize) -> Result<()> {
    if size < 2 {
        return Err(Error::InvalidSize { what, size, min: 2 });
    }
    Ok(())
}

/// Three per-channel curves of `size` entries each.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut1D<T: Sample = f32> {
    size: usize,
    values: Vec<T>,
}

impl<T: Sample> Lut1D<T> {
    /// `values` holds the red curve, then green, then blue.
    pub fn new(size: usize, values: Vec<T>) -> Result<Self> {
        check_size("1D LUT size", size)?;
        if values.len() != 3 * size {
            return Err(Error::LengthMismatch {
                expected: 3 * size,
                found: values.len(),
            });
        }
        if let Some((index, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_valid()) {
            return Err(Error::ValueOutOfRange {
                index,
                value: v.to_unit(),
            });
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.values[c * self.size..(c + 1) * self.size]
    }

    /// Whether every channel curve is non-decreasing.
    pub fn is_monotone(&self) -> bool
    where
        T: PartialOrd,
    {
        (0..3).all(|c| self.channel(c).windows(2).all(|w| w[0] <= w[1]))
    }
}

impl Lut1D<f32> {
    /// The ramp `i / (size - 1)` on every channel.
    pub fn identity(size: usize) -> Result<Self> {
        check_size("1D LUT size", size)?;
        let denom = (size - 1) as f32;
        let ramp = (0..size).map(|i| i as f32 / denom);
        let values = ramp.clone().chain(ramp.clone()).chain(ramp).collect();
        Ok(Self { size, values })
    }
}

/// An RGB lattice of `size³` points with three output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut3D<T: Sample = f32> {
    size: usize,
    values: Vec<T>,
}

impl<T: Sample> Lut3D<T> {
    /// `values` is planar, `[c][i_r][i_g][i_b]`. Float entries may lie
    /// outside `[0, 1]`; interpolation clamps its output.
    pub fn new(size: usize, values: Vec<T>) -> Result<Self> {
        check_size("3D LUT size", size)?;
        let expected = 3 * size * size * size;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Entries per output channel, `size³`.
    pub fn lattice_len(&self) -> usize {
        self.size * self.size * self.size
    }

    #[inline]
    pub fn index(&self, c: usize, r: usize, g: usize, b: usize) -> usize {
        ((c * self.size + r) * self.size + g) * self.size + b
    }

    #[inline]
    pub fn at(&self, c: usize, r: usize, g: usize, b: usize) -> T {
        self.values[self.index(c, r, g, b)]
    }

    /// Lattice entries regrouped as `[r, g, b]` triples in `[i_r][i_g][i_b]`
    /// order, for kernels that want all three outputs of a node together.
    pub fn interleaved(&self) -> Vec<[T; 3]> {
        let n = self.lattice_len();
        (0..n)
            .map(|i| [self.values[i], self.values[n + i], self.values[2 * n + i]])
            .collect()
    }
}

impl Lut3D<f32> {
    /// Output channel `c` ramps along its own input axis.
    pub fn identity(size: usize) -> Result<Self> {
        check_size("3D LUT size", size)?;
        let denom = (size - 1) as f32;
        let n = size * size * size;
        let mut values = vec![0.0; 3 * n];
        for r in 0..size {
            for g in 0..size {
                for b in 0..size {
                    let i = (r * size + g) * size + b;
                    values[i] = r as f32 / denom;
                    values[n + i] = g as f32 / denom;
                    values[2 * n + i] = b as f32 / denom;
                }
            }
        }
        Ok(Self { size, values })
    }

    pub fn filled(size: usize, rgb: [f32; 3]) -> Result<Self> {
        check_size("3D LUT size", size)?;
        let n = size * size * size;
        let values = rgb
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n))
            .collect();
        Ok(Self { size, values })
    }
}
