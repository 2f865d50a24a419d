//! Execution policy for data-parallel loops.

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// One thread, rows in order.
    Sequential,
    /// Rows distributed over the rayon pool. Falls back to sequential when
    /// the crate is built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run in parallel.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Runs `f(row_index, row)` over every `row_len`-sized chunk of `out`.
    pub fn for_each_row<T, F>(self, out: &mut [T], row_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        if row_len == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                out.par_chunks_mut(row_len)
                    .enumerate()
                    .for_each(|(y, row)| f(y, row));
            }
            _ => out
                .chunks_mut(row_len)
                .enumerate()
                .for_each(|(y, row)| f(y, row)),
        }
    }

    /// Runs `f(row_index, r_row, g_row, b_row)` over the rows of a
    /// plane-major RGB buffer.
    pub fn for_each_rgb_row<F>(self, data: &mut [f32], width: usize, f: F)
    where
        F: Fn(usize, &mut [f32], &mut [f32], &mut [f32]) + Send + Sync,
    {
        if width == 0 {
            return;
        }
        let n = data.len() / 3;
        let (r, rest) = data.split_at_mut(n);
        let (g, b) = rest.split_at_mut(n);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                r.par_chunks_mut(width)
                    .zip(g.par_chunks_mut(width))
                    .zip(b.par_chunks_mut(width))
                    .enumerate()
                    .for_each(|(y, ((r, g), b))| f(y, r, g, b));
            }
            _ => r
                .chunks_mut(width)
                .zip(g.chunks_mut(width))
                .zip(b.chunks_mut(width))
                .enumerate()
                .for_each(|(y, ((r, g), b))| f(y, r, g, b)),
        }
    }

    /// Maps `f` over `items`, keeping input order in the result.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Send + Sync,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_policies_visit_every_row_once() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            let mut buf = vec![0usize; 12];
            exec.for_each_row(&mut buf, 4, |y, row| {
                for v in row.iter_mut() {
                    *v += y + 1;
                }
            });
            assert_eq!(buf, vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]);
        }
    }

    #[test]
    fn map_keeps_order() {
        let xs: Vec<u32> = (0..100).collect();
        let ys = Exec::Parallel.map(&xs, |x| x * 2);
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
