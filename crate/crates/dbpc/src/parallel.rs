//! Scoped-thread helper for row-partitioned work.
//!
//! All multi-threaded numeric code in the crate funnels through
//! [`for_rows`]: an output buffer is split into contiguous blocks of whole
//! rows and each block is filled by one worker. Every floating-point
//! reduction happens sequentially inside a single row, so results are
//! bit-identical for any thread count — the contract the determinism
//! acceptance test pins down.

/// Work (in multiply-adds) below which a second worker is not worth its
/// spawn cost.
const MIN_WORK_PER_WORKER: usize = 48 * 1024;

/// Run `f` over `data` interpreted as rows of `row_len` elements.
///
/// `work_per_row` is the caller's cost estimate for one row (e.g. the
/// inner-dimension length times the batch width for a matrix product); it
/// only influences how many workers are used, never the result.
/// `f(first_row, block)` receives the index of the first row in the block
/// and the mutable block itself (a whole number of rows). Blocks are
/// disjoint and contiguous, assigned in row order.
pub fn for_rows<F>(data: &mut [f64], row_len: usize, threads: usize, work_per_row: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert!(row_len > 0 && data.len() % row_len == 0);
    let rows = data.len() / row_len;
    let max_workers = (rows * work_per_row.max(1) / MIN_WORK_PER_WORKER).max(1);
    let workers = threads.max(1).min(rows.max(1)).min(max_workers);
    if workers <= 1 {
        f(0, data);
        return;
    }
    let rows_per_worker = rows.div_ceil(workers);
    std::thread::scope(|scope| {
        let mut rest = data;
        let mut row = 0;
        while !rest.is_empty() {
            let take = rows_per_worker.min(rest.len() / row_len);
            let (block, tail) = rest.split_at_mut(take * row_len);
            let fref = &f;
            let first = row;
            scope.spawn(move || fref(first, block));
            row += take;
            rest = tail;
        }
    });
}
