//! Data-parallel helpers with a sequential fallback.
//!
//! Every node-level loop in the crate goes through [`map_slots`] or
//! [`for_each_slot`].  With the `parallel` feature (default) these dispatch to
//! rayon; without it they run the same closure sequentially.  Reductions are
//! never performed inside the parallel region, so the output of a loop is a
//! per-slot write and the result is bitwise independent of the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fill `out[i] = f(i)` for all slots.
pub fn map_slots<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

/// Sequential reference version of [`map_slots`], kept callable regardless of
/// features so benchmarks can compare both code paths in one build.
pub fn map_slots_seq<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T,
{
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Run `f(i, &mut out[i])` for all slots.
pub fn for_each_slot<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| f(i, slot));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            f(i, slot);
        }
    }
}

/// Deterministic sum of per-slot values: the values are materialized by the
/// parallel map and then reduced in slot order.
pub fn sum_slots<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let mut vals = vec![0.0f64; len];
    map_slots(&mut vals, f);
    vals.iter().sum()
}

/// Deterministic maximum of per-slot values (empty -> 0).
pub fn max_slots<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let mut vals = vec![0.0f64; len];
    map_slots(&mut vals, f);
    vals.iter().fold(0.0f64, |a, &b| a.max(b))
}
