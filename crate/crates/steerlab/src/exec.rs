//! Internal switch between the rayon-backed and sequential execution paths.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Exec {
    Seq,
    #[cfg(feature = "parallel")]
    Par,
}

impl Exec {
    /// The default for the non-`_seq` public entry points.
    pub(crate) fn auto() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Par
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Seq
        }
    }
}

/// Maps `0..count` through `f`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(exec: Exec, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        Exec::Seq => (0..count).map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Par => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
    }
}

/// Folds `items` chunk-wise and reduces with `combine`; `combine` must be
/// associative and is applied in a deterministic order-independent way
/// (callers break ties by index, never by arrival order).
pub(crate) fn fold_ranges<T, F, C>(exec: Exec, len: u64, chunk: u64, eval: F, combine: C) -> Option<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    if len == 0 {
        return None;
    }
    let chunk = chunk.max(1);
    let starts: Vec<u64> = (0..len).step_by(chunk as usize).collect();
    let ranges = starts.into_iter().map(move |s| s..(s + chunk).min(len));
    match exec {
        Exec::Seq => ranges.map(eval).reduce(combine),
        #[cfg(feature = "parallel")]
        Exec::Par => {
            use rayon::prelude::*;
            ranges
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(eval)
                .reduce_with(combine)
        }
    }
}
