use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::warp::spline::{hermite, locate, slopes};

/// Dense per-pixel displacement interpolated from a seeded control grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField<F: Scalar> {
    width: u32,
    height: u32,
    grid_cols: u32,
    grid_rows: u32,
    amplitude: F,
    seed: u64,
    knots_x: Vec<u32>,
    knots_y: Vec<u32>,
    /// Row-major `(dx, dy)` per control point.
    offsets: Vec<(F, F)>,
    dx: Vec<F>,
    dy: Vec<F>,
}

pub const DEFAULT_GRID: (u32, u32) = (4, 4);

/// 2% of the shorter side.
pub fn default_amplitude(width: u32, height: u32) -> f64 {
    0.02 * width.min(height) as f64
}

fn knots(extent: u32, count: u32) -> Vec<u32> {
    let span = (extent - 1) as u64;
    let steps = (count - 1) as u64;
    (0..count as u64)
        .map(|j| ((2 * j * span + steps) / (2 * steps)) as u32)
        .collect()
}

fn validate(w: u32, h: u32, cols: u32, rows: u32, amplitude: f64) -> Result<()> {
    if cols < 2 || rows < 2 {
        return Err(Error::DegenerateGrid(format!("{cols}x{rows} control grid, need at least 2x2")));
    }
    if cols > w || rows > h {
        return Err(Error::DegenerateGrid(format!(
            "{cols}x{rows} control grid does not fit a {w}x{h} image"
        )));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::DegenerateGrid(format!("amplitude {amplitude}")));
    }
    Ok(())
}

/// Separable interpolation of control values over the full pixel grid.
fn densify<F: Scalar>(kx: &[u32], ky: &[u32], values: &[F], w: u32, h: u32, bound: F) -> Vec<F> {
    let cols = kx.len();
    let xs: Vec<F> = kx.iter().map(|&k| F::from_u64_lossy(k as u64)).collect();
    let ys: Vec<F> = ky.iter().map(|&k| F::from_u64_lossy(k as u64)).collect();
    // pass 1: along x for every control row
    let rows: Vec<Vec<F>> = values
        .chunks(cols)
        .map(|row| {
            let m = slopes(&xs, row);
            (0..w)
                .map(|x| {
                    let (k, off, gap) = locate(kx, x);
                    let t = F::from_u64_lossy(off as u64) / F::from_u64_lossy(gap as u64);
                    hermite(row[k], row[k + 1], m[k], m[k + 1], F::from_u64_lossy(gap as u64), t)
                })
                .collect()
        })
        .collect();
    // pass 2: along y for every column
    let col_slopes: Vec<Vec<F>> = (0..w as usize)
        .map(|x| {
            let col: Vec<F> = rows.iter().map(|r| r[x]).collect();
            slopes(&ys, &col)
        })
        .collect();
    let mut out = vec![F::zero(); w as usize * h as usize];
    out.par_chunks_mut(w as usize).enumerate().for_each(|(y, line)| {
        let (k, off, gap) = locate(ky, y as u32);
        let g = F::from_u64_lossy(gap as u64);
        let t = F::from_u64_lossy(off as u64) / g;
        for (x, v) in line.iter_mut().enumerate() {
            let m = &col_slopes[x];
            let val = hermite(rows[k][x], rows[k + 1][x], m[k], m[k + 1], g, t);
            *v = val.max(-bound).min(bound);
        }
    });
    out
}

pub fn make_warp_field<F: Scalar>(
    width: u32,
    height: u32,
    grid: (u32, u32),
    amplitude: F,
    seed: u64,
) -> Result<WarpField<F>> {
    let (cols, rows) = grid;
    let a = amplitude.to_f64_lossy();
    validate(width, height, cols, rows, a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        if a > 0.0 {
            F::from_f64_lossy(rng.gen_range(-a..=a))
        } else {
            F::zero()
        }
    };
    let offsets: Vec<(F, F)> = (0..cols * rows).map(|_| (draw(), draw())).collect();
    let knots_x = knots(width, cols);
    let knots_y = knots(height, rows);
    let ox: Vec<F> = offsets.iter().map(|o| o.0).collect();
    let oy: Vec<F> = offsets.iter().map(|o| o.1).collect();
    let dx = densify(&knots_x, &knots_y, &ox, width, height, amplitude);
    let dy = densify(&knots_x, &knots_y, &oy, width, height, amplitude);
    Ok(WarpField {
        width,
        height,
        grid_cols: cols,
        grid_rows: rows,
        amplitude,
        seed,
        knots_x,
        knots_y,
        offsets,
        dx,
        dy,
    })
}

const MAGIC: &[u8; 8] = b"NSWARP\x00\x01";

impl<F: Scalar> WarpField<F> {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn grid(&self) -> (u32, u32) {
        (self.grid_cols, self.grid_rows)
    }

    pub fn amplitude(&self) -> F {
        self.amplitude
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Pixel coordinates of the control points, per axis.
    pub fn knots(&self) -> (&[u32], &[u32]) {
        (&self.knots_x, &self.knots_y)
    }

    /// Drawn control offsets, row-major.
    pub fn control_offsets(&self) -> &[(F, F)] {
        &self.offsets
    }

    pub fn at(&self, x: u32, y: u32) -> (F, F) {
        let i = y as usize * self.width as usize + x as usize;
        (self.dx[i], self.dy[i])
    }

    pub fn is_zero(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|v| *v == F::zero())
    }

    pub fn max_abs(&self) -> F {
        self.dx
            .iter()
            .chain(&self.dy)
            .fold(F::zero(), |m, v| m.max(v.abs()))
    }

    /// Bilinear displacement at a real position (pixel-center coordinates), clamped to the grid.
    pub fn sample(&self, x: F, y: F) -> (F, F) {
        let maxx = F::from_u64_lossy((self.width - 1) as u64);
        let maxy = F::from_u64_lossy((self.height - 1) as u64);
        let x = x.max(F::zero()).min(maxx);
        let y = y.max(F::zero()).min(maxy);
        let x0 = x.floor().to_u32().unwrap_or(0);
        let y0 = y.floor().to_u32().unwrap_or(0);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - F::from_u64_lossy(x0 as u64);
        let fy = y - F::from_u64_lossy(y0 as u64);
        let one = F::one();
        let w = self.width as usize;
        let lerp = |v: &[F]| {
            let a = v[y0 as usize * w + x0 as usize] * (one - fx) + v[y0 as usize * w + x1 as usize] * fx;
            let b = v[y1 as usize * w + x0 as usize] * (one - fx) + v[y1 as usize * w + x1 as usize] * fx;
            a * (one - fy) + b * fy
        };
        (lerp(&self.dx), lerp(&self.dy))
    }

    /// Serializes to the binary sidecar: magic, dims, grid, amplitude, seed,
    /// then `(dx, dy)` little-endian `f32` pairs in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.dx.len();
        let mut out = Vec::with_capacity(40 + 8 * n);
        out.extend_from_slice(MAGIC);
        for v in [self.width, self.height, self.grid_cols, self.grid_rows] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.amplitude.to_f64_lossy() as f32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for (dx, dy) in self.dx.iter().zip(&self.dy) {
            out.extend_from_slice(&(dx.to_f64_lossy() as f32).to_le_bytes());
            out.extend_from_slice(&(dy.to_f64_lossy() as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |r: &str| Error::DegenerateGrid(format!("warp sidecar: {r}"));
        if bytes.len() < 36 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let (width, height, cols, rows) = (u32_at(8), u32_at(12), u32_at(16), u32_at(20));
        let amplitude = f32_at(24);
        let seed = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
        if width == 0 || height == 0 {
            return Err(bad("empty field"));
        }
        validate(width, height, cols, rows, amplitude as f64)?;
        let n = width as usize * height as usize;
        if bytes.len() != 36 + 8 * n {
            return Err(bad("truncated displacement data"));
        }
        let mut dx = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for i in 0..n {
            dx.push(F::from_f64_lossy(f32_at(36 + 8 * i) as f64));
            dy.push(F::from_f64_lossy(f32_at(40 + 8 * i) as f64));
        }
        let knots_x = knots(width, cols);
        let knots_y = knots(height, rows);
        let offsets = knots_y
            .iter()
            .flat_map(|&y| knots_x.iter().map(move |&x| (x, y)))
            .map(|(x, y)| {
                let i = y as usize * width as usize + x as usize;
                (dx[i], dy[i])
            })
            .collect();
        Ok(WarpField {
            width,
            height,
            grid_cols: cols,
            grid_rows: rows,
            amplitude: F::from_f64_lossy(amplitude as f64),
            seed,
            knots_x,
            knots_y,
            offsets,
            dx,
            dy,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let f = make_warp_field::<f64>(40, 30, (4, 4), 0.0, 9).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_warp_field::<f32>(50, 40, (4, 4), 3.0, 17).unwrap();
        let b = make_warp_field::<f32>(50, 40, (4, 4), 3.0, 17).unwrap();
        let c = make_warp_field::<f32>(50, 40, (4, 4), 3.0, 18).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn control_points_are_hit_exactly() {
        for seed in 0..10 {
            let f = make_warp_field::<f64>(61, 47, (5, 4), 2.5, seed).unwrap();
            let (kx, ky) = f.knots();
            for (r, &y) in ky.iter().enumerate() {
                for (c, &x) in kx.iter().enumerate() {
                    assert_eq!(f.at(x, y), f.control_offsets()[r * kx.len() + c]);
                }
            }
        }
    }

    #[test]
    fn displacement_bounded_by_amplitude() {
        for seed in 0..20 {
            let f = make_warp_field::<f64>(80, 60, (4, 4), 1.7, seed).unwrap();
            assert!(f.max_abs() <= 1.7);
            assert!(f.control_offsets().iter().all(|(x, y)| x.abs() <= 1.7 && y.abs() <= 1.7));
        }
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(matches!(
            make_warp_field::<f64>(10, 10, (1, 4), 1.0, 0),
            Err(Error::DegenerateGrid(_))
        ));
        assert!(make_warp_field::<f64>(3, 10, (4, 4), 1.0, 0).is_err());
        assert!(make_warp_field::<f64>(10, 10, (2, 2), -1.0, 0).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let f = make_warp_field::<f32>(33, 21, (4, 3), 2.0, 5).unwrap();
        let back = WarpField::<f32>::from_bytes(&f.to_bytes()).unwrap();
        assert_eq!(back, f);
        let mut bytes = f.to_bytes();
        bytes[0] = b'X';
        assert!(WarpField::<f32>::from_bytes(&bytes).is_err());
        assert!(WarpField::<f32>::from_bytes(&f.to_bytes()[..100]).is_err());
    }
}
