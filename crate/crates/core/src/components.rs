//! Strong, weak, in- and out-components of a directed network.
//!
//! Edges point along the flow of goods, supplier to customer. The
//! out-component of `i` is everything reachable from `i` (every firm that
//! can be hit by a failure of `i`), the in-component everything that can
//! reach `i`. Both include `i` itself.

use std::collections::VecDeque;

use crate::topology::Network;

/// Sizes, in nodes, of the largest structures of the bow tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GiantSizes {
    /// Largest strongly connected component.
    pub strong: usize,
    /// Nodes that can reach the largest strong component.
    pub in_component: usize,
    /// Nodes reachable from the largest strong component.
    pub out_component: usize,
    /// Largest weakly connected component.
    pub weak: usize,
    /// Nodes of the largest weak component outside `in ∪ out`.
    pub tendrils: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDecomposition {
    pub scc_of: Vec<usize>,
    pub scc_sizes: Vec<usize>,
    pub wcc_of: Vec<usize>,
    pub wcc_sizes: Vec<usize>,
    pub in_size: Vec<usize>,
    pub out_size: Vec<usize>,
    pub giant: GiantSizes,
}

impl ComponentDecomposition {
    pub fn scc_count(&self) -> usize {
        self.scc_sizes.len()
    }

    pub fn wcc_count(&self) -> usize {
        self.wcc_sizes.len()
    }

    /// Mean out-component size over all nodes.
    pub fn mean_out_size(&self) -> f64 {
        if self.out_size.is_empty() {
            return 0.0;
        }
        self.out_size.iter().sum::<usize>() as f64 / self.out_size.len() as f64
    }
}

/// Nodes reachable from `start` following supplier-to-customer edges.
pub fn out_component(net: &Network, start: usize) -> Vec<bool> {
    let (offsets, customers) = net.out_adjacency();
    bfs(&[start], net.len(), |u| &customers[offsets[u]..offsets[u + 1]])
}

/// Nodes from which `target` is reachable.
pub fn in_component(net: &Network, target: usize) -> Vec<bool> {
    bfs(&[target], net.len(), |u| net.in_neighbors(u))
}

fn bfs<'a>(starts: &[usize], n: usize, next: impl Fn(usize) -> &'a [usize]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &s in starts {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in next(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Iterative Tarjan over forward edges. Components are numbered in
/// completion order, so every component reachable from `c` has an index
/// not greater than `c`.
fn tarjan(n: usize, offsets: &[usize], targets: &[usize]) -> (Vec<usize>, Vec<usize>) {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut scc_of = vec![UNSEEN; n];
    let mut sizes = Vec::new();
    let mut next_index = 0;
    // (node, position within its edge list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, offsets[root]));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (u, ref mut pos)) = call.last_mut() {
            if *pos < offsets[u + 1] {
                let v = targets[*pos];
                *pos += 1;
                if index[v] == UNSEEN {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, offsets[v]));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == index[u] {
                let id = sizes.len();
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    scc_of[w] = id;
                    size += 1;
                    if w == u {
                        break;
                    }
                }
                sizes.push(size);
            }
        }
    }
    (scc_of, sizes)
}

fn weak_components(net: &Network) -> (Vec<usize>, Vec<usize>) {
    let n = net.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, _) in net.edges() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut wcc_of = vec![0; n];
    let mut sizes = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = sizes.len();
            sizes.push(0);
        }
        wcc_of[i] = label[r];
        sizes[label[r]] += 1;
    }
    (wcc_of, sizes)
}

/// Bits per reachability chunk; bounds memory at `components × CHUNK / 8` bytes.
const CHUNK_BITS: usize = 4096;

/// Number of nodes each component reaches, computed on the condensation in
/// chunks of node-indexed bitsets. `forward` selects descendants over
/// ancestors.
fn reach_sizes(n: usize, scc_of: &[usize], comp_count: usize, dag: &[Vec<usize>], forward: bool) -> Vec<usize> {
    let words = CHUNK_BITS / 64;
    let mut counts = vec![0usize; comp_count];
    let mut reach = vec![0u64; comp_count * words];
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK_BITS).min(n);
        reach.iter_mut().for_each(|w| *w = 0);
        for node in start..end {
            let bit = node - start;
            reach[scc_of[node] * words + bit / 64] |= 1 << (bit % 64);
        }
        let mut merge = |c: usize| {
            for &d in &dag[c] {
                for w in 0..words {
                    let v = reach[d * words + w];
                    reach[c * words + w] |= v;
                }
            }
        };
        // descendants carry smaller indices, ancestors larger ones
        if forward {
            (0..comp_count).for_each(&mut merge);
        } else {
            (0..comp_count).rev().for_each(&mut merge);
        }
        for (c, count) in counts.iter_mut().enumerate() {
            *count += reach[c * words..(c + 1) * words]
                .iter()
                .map(|w| w.count_ones() as usize)
                .sum::<usize>();
        }
        start = end;
    }
    counts
}

pub fn decompose_components(net: &Network) -> ComponentDecomposition {
    let n = net.len();
    let (offsets, customers) = net.out_adjacency();
    let (scc_of, scc_sizes) = tarjan(n, &offsets, &customers);
    let comps = scc_sizes.len();

    let mut succ = vec![Vec::new(); comps];
    let mut pred = vec![Vec::new(); comps];
    for (i, j, _) in net.edges() {
        let (from, to) = (scc_of[j], scc_of[i]);
        if from != to {
            succ[from].push(to);
            pred[to].push(from);
        }
    }
    for list in succ.iter_mut().chain(pred.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }
    let out_by_comp = reach_sizes(n, &scc_of, comps, &succ, true);
    let in_by_comp = reach_sizes(n, &scc_of, comps, &pred, false);
    let out_size = scc_of.iter().map(|&c| out_by_comp[c]).collect();
    let in_size = scc_of.iter().map(|&c| in_by_comp[c]).collect();

    let (wcc_of, wcc_sizes) = weak_components(net);

    let giant = if n == 0 {
        GiantSizes {
            strong: 0,
            in_component: 0,
            out_component: 0,
            weak: 0,
            tendrils: 0,
        }
    } else {
        let big = (0..comps)
            .max_by_key(|&c| (scc_sizes[c], std::cmp::Reverse(c)))
            .unwrap();
        let members: Vec<usize> = (0..n).filter(|&i| scc_of[i] == big).collect();
        let downstream = bfs(&members, n, |u| &customers[offsets[u]..offsets[u + 1]]);
        let upstream = bfs(&members, n, |u| net.in_neighbors(u));
        let weak_big = (0..wcc_sizes.len())
            .max_by_key(|&c| (wcc_sizes[c], std::cmp::Reverse(c)))
            .unwrap();
        let union = (0..n)
            .filter(|&i| wcc_of[i] == weak_big && (downstream[i] || upstream[i]))
            .count();
        GiantSizes {
            strong: scc_sizes[big],
            in_component: upstream.iter().filter(|&&b| b).count(),
            out_component: downstream.iter().filter(|&&b| b).count(),
            weak: wcc_sizes[weak_big],
            tendrils: wcc_sizes[weak_big] - union,
        }
    };

    ComponentDecomposition {
        scc_of,
        scc_sizes,
        wcc_of,
        wcc_sizes,
        in_size,
        out_size,
        giant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::topology::{make_braid_chain, sample_directed_rg, NetworkKind};

    fn custom(lists: Vec<Vec<usize>>) -> Network {
        Network::from_in_neighbors(lists, NetworkKind::Custom).unwrap()
    }

    #[test]
    fn braid_chain_is_one_strong_component() {
        for (n_nodes, n) in [(2, 1), (14, 2), (100, 5)] {
            let d = decompose_components(&make_braid_chain(n_nodes, n).unwrap());
            assert_eq!(d.scc_count(), 1);
            assert_eq!(d.giant.strong, n_nodes);
            assert!(d.in_size.iter().all(|&s| s == n_nodes));
            assert_eq!(d.giant.tendrils, 0);
        }
    }

    #[test]
    fn edgeless_graph_is_all_singletons() {
        let d = decompose_components(&custom(vec![Vec::new(); 6]));
        assert_eq!(d.scc_count(), 6);
        assert_eq!(d.wcc_count(), 6);
        assert!(d.in_size.iter().chain(&d.out_size).all(|&s| s == 1));
        assert_eq!(d.giant.strong, 1);
    }

    #[test]
    fn small_bow_tie() {
        // 0 -> 1 <-> 2 -> 3, plus tendril 0 -> 4 and isolated 5
        let net = custom(vec![vec![], vec![0, 2], vec![1], vec![2], vec![0], vec![]]);
        let d = decompose_components(&net);
        assert_eq!(d.giant.strong, 2);
        assert_eq!(d.giant.in_component, 3);
        assert_eq!(d.giant.out_component, 3);
        assert_eq!(d.giant.weak, 5);
        assert_eq!(d.giant.tendrils, 1);
        assert_eq!(d.out_size[0], 5);
        assert_eq!(d.in_size[3], 4);
        assert_eq!(d.in_size[4], 2);
    }

    #[test]
    fn sizes_agree_with_breadth_first_search() {
        let mut rng = stream(11, Purpose::Links);
        for _ in 0..10 {
            let net = sample_directed_rg(300, 1.3 / 299.0, &mut rng).unwrap();
            let d = decompose_components(&net);
            for i in (0..300).step_by(7) {
                let out = out_component(&net, i);
                let inc = in_component(&net, i);
                assert_eq!(d.out_size[i], out.iter().filter(|&&b| b).count());
                assert_eq!(d.in_size[i], inc.iter().filter(|&&b| b).count());
                for j in 0..300 {
                    assert_eq!(d.scc_of[i] == d.scc_of[j], out[j] && inc[j]);
                }
            }
        }
    }

    #[test]
    fn chunk_boundaries_do_not_matter() {
        // a single long path crosses several reachability chunks
        let n = 2 * CHUNK_BITS + 17;
        let lists = (0..n).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect();
        let d = decompose_components(&custom(lists));
        assert_eq!(d.out_size[0], n);
        assert_eq!(d.in_size[n - 1], n);
        assert_eq!(d.out_size[n - 1], 1);
    }
}
