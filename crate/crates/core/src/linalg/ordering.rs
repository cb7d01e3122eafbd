//! Reverse Cuthill–McKee ordering on the symmetrized sparsity pattern.

use std::collections::VecDeque;

/// Adjacency lists (without self loops) of the pattern of `M + Mᵀ` for an
/// `n × n` pattern given in CSC form.
pub(crate) fn symmetric_adjacency(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for c in 0..n {
        for &r in &row_idx[col_ptr[c]..col_ptr[c + 1]] {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn bfs_levels(adj: &[Vec<usize>], start: usize, mark: &mut [usize], stamp: usize) -> (usize, usize) {
    // returns (eccentricity, a node of minimum degree in the last level)
    let mut queue = VecDeque::from([(start, 0usize)]);
    mark[start] = stamp;
    let mut depth = 0;
    let mut far = start;
    while let Some((v, d)) = queue.pop_front() {
        if d > depth || (d == depth && adj[v].len() < adj[far].len()) {
            depth = d;
            far = v;
        }
        for &w in &adj[v] {
            if mark[w] != stamp {
                mark[w] = stamp;
                queue.push_back((w, d + 1));
            }
        }
    }
    (depth, far)
}

/// Returns a permutation `perm` where `perm[k]` is the original index placed
/// at position `k`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut stamp = 0usize;
    let mut order = Vec::with_capacity(n);

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| adj[v].len());

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node (George–Liu)
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(adj, start, &mut mark, stamp);
        stamp += 1;
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(adj, far, &mut mark, stamp);
            stamp += 1;
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }

        let component_start = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = component_start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| adj[w].len());
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}
