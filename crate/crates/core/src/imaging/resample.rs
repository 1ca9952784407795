//! Separable cubic-convolution (Keys, a = -0.5) resampling of 3D grids.
//!
//! Samples beyond either end of an axis are extended linearly
//! (`f[-1] = 2 f[0] - f[1]`), so constant and linear fields are reproduced
//! exactly everywhere on the output grid, edges included.

const KEYS_A: f64 = -0.5;

pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        (KEYS_A + 2.0) * x * x * x - (KEYS_A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        KEYS_A * x * x * x - 5.0 * KEYS_A * x * x + 8.0 * KEYS_A * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Taps for one output position along one axis: four (index, weight) pairs,
/// where indices may point one sample past either end.
#[derive(Debug, Clone, Copy)]
struct Taps {
    base: isize,
    weights: [f64; 4],
}

fn taps(position: f64, len: usize) -> Taps {
    let mut base = position.floor() as isize;
    let mut frac = position - base as f64;
    // Keep the stencil within one sample of the valid range.
    if base >= len as isize - 1 {
        base = len as isize - 2;
        frac = position - base as f64;
    }
    if base < 0 {
        base = 0;
        frac = position;
    }
    Taps {
        base,
        weights: [
            keys_kernel(frac + 1.0),
            keys_kernel(frac),
            keys_kernel(1.0 - frac),
            keys_kernel(2.0 - frac),
        ],
    }
}

#[inline]
fn sample_extended(line: &[f64], index: isize) -> f64 {
    let n = line.len() as isize;
    if index < 0 {
        let steps = -index as f64;
        line[0] + steps * (line[0] - line[1])
    } else if index >= n {
        let steps = (index - n + 1) as f64;
        line[(n - 1) as usize] + steps * (line[(n - 1) as usize] - line[(n - 2) as usize])
    } else {
        line[index as usize]
    }
}

/// Number of output samples covering `len` inputs at `step_in` with spacing `step_out`.
pub fn output_len(len: usize, step_in: f64, step_out: f64) -> usize {
    if len <= 1 {
        return len;
    }
    let extent = (len - 1) as f64 * step_in;
    (extent / step_out + 1e-9).floor() as usize + 1
}

/// Resample one line; output sample `j` sits at physical offset `j * step_out`.
pub fn resample_line(line: &[f64], step_in: f64, step_out: f64, out_len: usize) -> Vec<f64> {
    let n = line.len();
    if n == 1 {
        return vec![line[0]; out_len];
    }
    (0..out_len)
        .map(|j| {
            let position = j as f64 * step_out / step_in;
            let t = taps(position, n);
            t.weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * sample_extended(line, t.base - 1 + k as isize))
                .sum()
        })
        .collect()
}

/// Resample a (nz, ny, nx) row-major grid from `spacing_in` to `spacing_out`
/// (both ordered dz, dy, dx). Returns the new values and shape.
pub fn resample_tricubic(
    values: &[f64],
    shape: [usize; 3],
    spacing_in: [f64; 3],
    spacing_out: [f64; 3],
) -> (Vec<f64>, [usize; 3]) {
    let [nz, ny, nx] = shape;
    assert_eq!(values.len(), nz * ny * nx);
    let oz = output_len(nz, spacing_in[0], spacing_out[0]);
    let oy = output_len(ny, spacing_in[1], spacing_out[1]);
    let ox = output_len(nx, spacing_in[2], spacing_out[2]);

    // x pass: (nz, ny, nx) -> (nz, ny, ox)
    let mut pass_x = Vec::with_capacity(nz * ny * ox);
    for row in values.chunks_exact(nx) {
        pass_x.extend(resample_line(row, spacing_in[2], spacing_out[2], ox));
    }

    // y pass: (nz, ny, ox) -> (nz, oy, ox)
    let mut pass_y = vec![0.0; nz * oy * ox];
    let mut column = vec![0.0; ny];
    for z in 0..nz {
        for x in 0..ox {
            for y in 0..ny {
                column[y] = pass_x[(z * ny + y) * ox + x];
            }
            let out = resample_line(&column, spacing_in[1], spacing_out[1], oy);
            for (y, v) in out.into_iter().enumerate() {
                pass_y[(z * oy + y) * ox + x] = v;
            }
        }
    }

    // z pass: (nz, oy, ox) -> (oz, oy, ox)
    let plane = oy * ox;
    let mut result = vec![0.0; oz * plane];
    let mut pillar = vec![0.0; nz];
    for p in 0..plane {
        for z in 0..nz {
            pillar[z] = pass_y[z * plane + p];
        }
        let out = resample_line(&pillar, spacing_in[0], spacing_out[0], oz);
        for (z, v) in out.into_iter().enumerate() {
            result[z * plane + p] = v;
        }
    }
    (result, [oz, oy, ox])
}
