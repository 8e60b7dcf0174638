//! Execution helpers that keep results independent of the execution mode.
//!
//! Both functions produce output in input order, and any partitioning is
//! derived from the data alone (never from the thread count), so a library
//! built with or without the `parallel` feature returns bitwise-identical
//! results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Sync + Send,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(&f).collect()
}

/// Maps `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(&f).collect()
}

/// Applies `f` to consecutive chunks of fixed size `chunk` (the final chunk
/// may be shorter), returning one result per chunk in chunk order.
#[cfg(feature = "parallel")]
pub fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&[T]) -> U + Sync + Send,
{
    assert!(chunk > 0);
    items.par_chunks(chunk).map(&f).collect()
}

/// Applies `f` to consecutive chunks of fixed size `chunk` (the final chunk
/// may be shorter), returning one result per chunk in chunk order.
#[cfg(not(feature = "parallel"))]
pub fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
where
    F: Fn(&[T]) -> U,
{
    assert!(chunk > 0);
    items.chunks(chunk).map(&f).collect()
}
