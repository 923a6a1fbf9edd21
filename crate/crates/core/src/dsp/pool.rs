//! Average pooling of spectrogram tensors.

use crate::tensor::Tensor;

/// Average-pool a `[axes, time, freq]` tensor with window `(pool_t, pool_f)`.
///
/// The pool must divide the time axis exactly. The frequency axis may leave a
/// partial final window (129 bins pooled by 2 end in a single-bin window),
/// which is averaged over its actual width, yielding `ceil(freq / pool_f)`
/// output bins — that is how 3×32×129 becomes 3×4×65 under an (8, 2) pool.
pub fn avg_pool(spec: &Tensor, pool_t: usize, pool_f: usize) -> Tensor {
    let shape = spec.shape();
    assert_eq!(shape.len(), 3, "expected [axes, time, freq]");
    let (axes, time, freq) = (shape[0], shape[1], shape[2]);
    assert!(pool_t >= 1 && pool_f >= 1, "pool sizes must be >= 1");
    assert_eq!(time % pool_t, 0, "pool must divide the time axis exactly");

    let out_t = time / pool_t;
    let out_f = freq.div_ceil(pool_f);
    let mut out = Tensor::zeros(&[axes, out_t, out_f]);
    for a in 0..axes {
        for ot in 0..out_t {
            for of in 0..out_f {
                let f_start = of * pool_f;
                let f_end = (f_start + pool_f).min(freq);
                let mut sum = 0.0;
                for t in ot * pool_t..(ot + 1) * pool_t {
                    for f in f_start..f_end {
                        sum += spec.at3(a, t, f);
                    }
                }
                let count = (pool_t * (f_end - f_start)) as f64;
                out.set3(a, ot, of, sum / count);
            }
        }
    }
    out
}
