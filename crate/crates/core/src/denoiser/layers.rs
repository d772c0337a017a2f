//! Layer kernels on channel-major `[c, h, w]` slices.
//!
//! Convolutions are 3x3, stride 1, zero padded to keep the spatial size.
//! Gradient kernels accumulate (`+=`) into their outputs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Silu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Valid destination range for kernel offset `k` (0, 1, 2) along an axis of length `n`.
#[inline]
fn span(k: usize, n: usize) -> (usize, usize) {
    match k {
        0 => (1, n),
        1 => (0, n),
        _ => (0, n.saturating_sub(1)),
    }
}

/// `out[o] += sum_i w[o, i] * input[i]` (cross-correlation).
pub fn conv3x3(input: &[f64], cin: usize, h: usize, w: usize, weight: &[f64], cout: usize, out: &mut [f64]) {
    let hw = h * w;
    for o in 0..cout {
        let out_c = &mut out[o * hw..(o + 1) * hw];
        for i in 0..cin {
            let in_c = &input[i * hw..(i + 1) * hw];
            let wk = &weight[(o * cin + i) * 9..(o * cin + i + 1) * 9];
            for ky in 0..3 {
                let (y0, y1) = span(ky, h);
                for kx in 0..3 {
                    let wv = wk[ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (x0, x1) = span(kx, w);
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let dst = &mut out_c[y * w + x0..y * w + x1];
                        let src = &in_c[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// Weight gradient: `dw[o, i, ky, kx] += sum_{y,x} g[o, y, x] * input[i, y+ky-1, x+kx-1]`.
pub fn conv3x3_weight_grad(input: &[f64], cin: usize, h: usize, w: usize, grad_out: &[f64], cout: usize, dw: &mut [f64]) {
    let hw = h * w;
    for o in 0..cout {
        let g = &grad_out[o * hw..(o + 1) * hw];
        for i in 0..cin {
            let in_c = &input[i * hw..(i + 1) * hw];
            for ky in 0..3 {
                let (y0, y1) = span(ky, h);
                for kx in 0..3 {
                    let (x0, x1) = span(kx, w);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let gr = &g[y * w + x0..y * w + x1];
                        let src = &in_c[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        acc += gr.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    }
                    dw[(o * cin + i) * 9 + ky * 3 + kx] += acc;
                }
            }
        }
    }
}

/// Input gradient (transposed convolution).
pub fn conv3x3_input_grad(grad_out: &[f64], cout: usize, h: usize, w: usize, weight: &[f64], cin: usize, dinput: &mut [f64]) {
    let hw = h * w;
    for o in 0..cout {
        let g = &grad_out[o * hw..(o + 1) * hw];
        for i in 0..cin {
            let di = &mut dinput[i * hw..(i + 1) * hw];
            let wk = &weight[(o * cin + i) * 9..(o * cin + i + 1) * 9];
            for ky in 0..3 {
                let (y0, y1) = span(ky, h);
                for kx in 0..3 {
                    let wv = wk[ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (x0, x1) = span(kx, w);
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let gr = &g[y * w + x0..y * w + x1];
                        let dst = &mut di[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for (d, s) in dst.iter_mut().zip(gr) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 average pooling; `h` and `w` must be even.
pub fn avg_pool2(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                let base = ch * h * w;
                let s = input[base + 2 * y * w + 2 * x]
                    + input[base + 2 * y * w + 2 * x + 1]
                    + input[base + (2 * y + 1) * w + 2 * x]
                    + input[base + (2 * y + 1) * w + 2 * x + 1];
                out[(ch * h2 + y) * w2 + x] = 0.25 * s;
            }
        }
    }
    out
}

/// Adjoint of [`avg_pool2`]: spreads a quarter of each gradient over its block.
pub fn avg_pool2_grad(grad: &[f64], c: usize, h: usize, w: usize, dinput: &mut [f64]) {
    let (h2, w2) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                dinput[(ch * h + y) * w + x] += 0.25 * grad[(ch * h2 + y / 2) * w2 + x / 2];
            }
        }
    }
}

/// Nearest-neighbour 2x upsampling from `[c, h, w]`.
pub fn upsample2(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                out[(ch * h2 + y) * w2 + x] = input[(ch * h + y / 2) * w + x / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: sums each 2x2 block. `h`, `w` are the small size.
pub fn upsample2_grad(grad: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                out[(ch * h + y / 2) * w + x / 2] += grad[(ch * h2 + y) * w2 + x];
            }
        }
    }
    out
}

/// `out = weight · input + bias` with `weight` shaped `[rows, cols]`.
pub fn linear(weight: &[f64], bias: Option<&[f64]>, input: &[f64], rows: usize) -> Vec<f64> {
    let cols = input.len();
    (0..rows)
        .map(|r| {
            let dot: f64 = weight[r * cols..(r + 1) * cols].iter().zip(input).map(|(a, b)| a * b).sum();
            dot + bias.map_or(0.0, |b| b[r])
        })
        .collect()
}

/// Sinusoidal timestep features: `sin(t f_j)` then `cos(t f_j)` with
/// `f_j = 10000^(-j / half)`. An odd trailing slot stays zero.
pub fn timestep_features(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for j in 0..half {
        let f = (-(10_000f64.ln()) * j as f64 / half as f64).exp();
        out[j] = (t as f64 * f).sin();
        out[half + j] = (t as f64 * f).cos();
    }
    out
}
