//! Per-sample kernels. Activations are flat `channels × height × width`
//! buffers in row-major order.

/// 3×3 convolution, stride 1, zero padding 1.
pub(crate) fn conv3x3_forward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    cout: usize,
    out: &mut [f64],
) {
    let plane = h * w;
    for o in 0..cout {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.fill(bias[o]);
        for i in 0..cin {
            let src = &input[i * plane..(i + 1) * plane];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = weights[((o * cin + i) * 3 + ky) * 3 + kx];
                    let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                    let (x0, x1) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let d = &mut dst[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv += wv * sv;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients and writes the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_backward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    cout: usize,
    dout: &[f64],
    dweights: &mut [f64],
    dbias: &mut [f64],
    dinput: &mut [f64],
) {
    let plane = h * w;
    dinput.fill(0.0);
    for o in 0..cout {
        let g = &dout[o * plane..(o + 1) * plane];
        dbias[o] += g.iter().sum::<f64>();
        for i in 0..cin {
            let src = &input[i * plane..(i + 1) * plane];
            let din = &mut dinput[i * plane..(i + 1) * plane];
            for ky in 0..3 {
                for kx in 0..3 {
                    let widx = ((o * cin + i) * 3 + ky) * 3 + kx;
                    let wv = weights[widx];
                    let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                    let (x0, x1) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let gr = &g[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        let di = &mut din[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for ((gv, sv), dv) in gr.iter().zip(s).zip(di.iter_mut()) {
                            acc += gv * sv;
                            *dv += wv * gv;
                        }
                    }
                    dweights[widx] += acc;
                }
            }
        }
    }
}

/// Output side of a 2×2 stride-2 max pool in ceil mode.
pub(crate) fn pooled(n: usize) -> usize {
    n.div_ceil(2)
}

/// 2×2 max pool, stride 2, ceil mode (partial windows at odd edges).
/// Records the flat input index of each window's first maximum.
pub(crate) fn maxpool_forward(input: &[f64], c: usize, h: usize, w: usize, out: &mut [f64], argmax: &mut [usize]) {
    let (oh, ow) = (pooled(h), pooled(w));
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0;
                for y in 2 * oy..(2 * oy + 2).min(h) {
                    for x in 2 * ox..(2 * ox + 2).min(w) {
                        let idx = (ch * h + y) * w + x;
                        if input[idx] > best {
                            best = input[idx];
                            bi = idx;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = bi;
            }
        }
    }
}

pub(crate) fn maxpool_backward(dout: &[f64], argmax: &[usize], dinput: &mut [f64]) {
    dinput.fill(0.0);
    for (g, &i) in dout.iter().zip(argmax) {
        dinput[i] += g;
    }
}

/// `out = W x + b` with `W` stored `[nout][nin]`.
pub(crate) fn linear_forward(x: &[f64], weights: &[f64], bias: &[f64], nout: usize, out: &mut [f64]) {
    let nin = x.len();
    for o in 0..nout {
        let row = &weights[o * nin..(o + 1) * nin];
        out[o] = bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn linear_backward(
    x: &[f64],
    weights: &[f64],
    dout: &[f64],
    dweights: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    let nin = x.len();
    dx.fill(0.0);
    for (o, &g) in dout.iter().enumerate() {
        dbias[o] += g;
        if g == 0.0 {
            continue;
        }
        let row = &weights[o * nin..(o + 1) * nin];
        let drow = &mut dweights[o * nin..(o + 1) * nin];
        for k in 0..nin {
            drow[k] += g * x[k];
            dx[k] += g * row[k];
        }
    }
}
