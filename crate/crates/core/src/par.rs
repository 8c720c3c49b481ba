//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the helpers fan work out over
//! the rayon pool. Without it, or when [`Execution::Sequential`] is requested
//! explicitly, they run in order on the calling thread. Both paths produce
//! results in input order, so callers stay deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch of independent work items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Use the rayon pool when the `parallel` feature is enabled.
    #[cfg_attr(feature = "parallel", default)]
    Parallel,
    /// Always run on the calling thread.
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every item mutably, collecting results in item order.
pub fn map_mut<T, R, F>(exec: Execution, items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(&mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        return items.par_iter_mut().map(f).collect();
    }
    let _ = exec;
    items.iter_mut().map(f).collect()
}

/// Applies `f` to every item, collecting results in item order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fills `out[i] = f(i)` for every index, splitting the index range into
/// chunks of at least `min_chunk` when running in parallel.
pub fn fill_indexed<R, F>(exec: Execution, out: &mut [R], min_chunk: usize, f: F)
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() > min_chunk {
        out.par_iter_mut()
            .with_min_len(min_chunk.max(1))
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = (exec, min_chunk);
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(Execution::Sequential, &items, |x| x * x);
        let par = map(Execution::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);

        let mut a = vec![0usize; 5000];
        let mut b = vec![0usize; 5000];
        fill_indexed(Execution::Sequential, &mut a, 64, |i| i * 3);
        fill_indexed(Execution::Parallel, &mut b, 64, |i| i * 3);
        assert_eq!(a, b);
    }

    #[test]
    fn map_mut_touches_every_item() {
        let mut items = vec![1u32; 257];
        let out = map_mut(Execution::Parallel, &mut items, |x| {
            *x += 1;
            *x
        });
        assert!(items.iter().all(|&x| x == 2));
        assert_eq!(out.len(), 257);
    }
}
