use alloc::vec;
use alloc::vec::Vec;

/// Fills a `width * height` buffer row by row. `init` builds per-worker scratch state.
///
/// With the `parallel` feature rows are spread over rayon; each output value depends
/// only on its own row call, so the result does not depend on scheduling.
pub(crate) fn fill_rows<S, I, F>(width: usize, height: usize, init: I, f: F) -> Vec<f64>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [f64]) + Sync + Send,
{
    let mut out = vec![0.0; width * height];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each_init(&init, |state, (y, row)| f(state, y, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut state = init();
        for (y, row) in out.chunks_mut(width).enumerate() {
            f(&mut state, y, row);
        }
    }
    out
}
