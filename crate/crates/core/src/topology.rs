//! Network generators: braid chains, directed and undirected random graphs.
//!
//! A network is stored as per-node supplier lists in compressed form. Node
//! `i` lists `j` when the output of `j` is an input of `i` (`A_ij = 1`).

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkKind {
    BraidChain { in_degree: usize },
    DirectedRandom { p: f64 },
    UndirectedRandom { p: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    kind: NetworkKind,
    offsets: Vec<usize>,
    suppliers: Vec<usize>,
}

impl Network {
    /// Builds a network from explicit supplier lists. Rejects self-loops,
    /// out-of-range indices and repeated suppliers.
    pub fn from_in_neighbors(lists: Vec<Vec<usize>>, kind: NetworkKind) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut suppliers = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        let mut seen = vec![usize::MAX; n];
        for (i, list) in lists.into_iter().enumerate() {
            for j in list {
                if j >= n {
                    return Err(invalid("edge", format!("supplier {j} of node {i} out of range")));
                }
                if j == i {
                    return Err(invalid("edge", format!("self-loop on node {i}")));
                }
                if seen[j] == i {
                    return Err(invalid("edge", format!("duplicate supplier {j} of node {i}")));
                }
                seen[j] = i;
                suppliers.push(j);
            }
            offsets.push(suppliers.len());
        }
        Ok(Network {
            kind,
            offsets,
            suppliers,
        })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.suppliers.len()
    }

    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        &self.suppliers[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Index range of the edges into `node`; edge indices address
    /// per-edge data such as delays.
    pub fn edge_range(&self, node: usize) -> std::ops::Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }

    /// All edges as `(customer, supplier, edge_index)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.len()).flat_map(move |i| self.edge_range(i).map(move |e| (i, self.suppliers[e], e)))
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for &j in &self.suppliers {
            out[j] += 1;
        }
        out
    }

    /// Customer lists in compressed form: `(offsets, customers)`.
    pub fn out_adjacency(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let mut offsets = vec![0; n + 1];
        for &j in &self.suppliers {
            offsets[j + 1] += 1;
        }
        for k in 0..n {
            offsets[k + 1] += offsets[k];
        }
        let mut fill = offsets.clone();
        let mut customers = vec![0; self.suppliers.len()];
        for i in 0..n {
            for &j in self.in_neighbors(i) {
                customers[fill[j]] = i;
                fill[j] += 1;
            }
        }
        (offsets, customers)
    }

    pub fn has_edge(&self, customer: usize, supplier: usize) -> bool {
        self.in_neighbors(customer).contains(&supplier)
    }

    /// Writes `N <count>` followed by one `i j` line per edge, meaning node
    /// `j` supplies node `i`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N {}", self.len())?;
        for (i, j, _) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let n = loop {
            let Some((idx, line)) = lines.next() else {
                return Err(Error::Parse {
                    line: 1,
                    reason: "missing `N <count>` header".into(),
                });
            };
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next().map(str::parse::<usize>), parts.next()) {
                (Some("N"), Some(Ok(n)), None) => break n,
                _ => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        reason: format!("expected `N <count>`, got `{line}`"),
                    })
                }
            }
        };
        let mut lists = vec![Vec::new(); n];
        for (idx, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = || Error::Parse {
                line: idx + 1,
                reason: format!("expected `i j`, got `{line}`"),
            };
            let mut parts = line.split_whitespace();
            let i: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            let j: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            if parts.next().is_some() || i >= n {
                return Err(parse_err());
            }
            lists[i].push(j);
        }
        Network::from_in_neighbors(lists, NetworkKind::Custom)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("{p} is not a probability")));
    }
    Ok(())
}

/// Circulant braid chain: node `i` is supplied by `i-1, ..., i-n` (mod `N`).
pub fn make_braid_chain(nodes: usize, in_degree: usize) -> Result<Network> {
    if in_degree == 0 || in_degree >= nodes {
        return Err(invalid(
            "n",
            format!("in-degree must satisfy 1 <= n < N, got n={in_degree}, N={nodes}"),
        ));
    }
    let lists = (0..nodes)
        .map(|i| (1..=in_degree).map(|k| (i + nodes - k) % nodes).collect())
        .collect();
    Network::from_in_neighbors(lists, NetworkKind::BraidChain { in_degree })
}

/// Visits the positions of successes in `total` independent Bernoulli(p)
/// trials, skipping geometrically between them.
fn for_each_success<R: Rng + ?Sized>(total: u64, p: f64, rng: &mut R, mut f: impl FnMut(u64)) {
    if total == 0 || p == 0.0 {
        return;
    }
    if p == 1.0 {
        (0..total).for_each(f);
        return;
    }
    let gaps = Geometric::new(p).expect("probability checked by caller");
    let mut pos = gaps.sample(rng);
    while pos < total {
        f(pos);
        pos = match pos.checked_add(1 + gaps.sample(rng)) {
            Some(next) => next,
            None => break,
        };
    }
}

/// Directed random graph `D(N, p)`: each of the `N(N-1)` ordered pairs is
/// linked independently with probability `p`.
pub fn sample_directed_rg<R: Rng + ?Sized>(nodes: usize, p: f64, rng: &mut R) -> Result<Network> {
    check_probability(p)?;
    let n = nodes as u64;
    let row = n.saturating_sub(1);
    let mut lists = vec![Vec::new(); nodes];
    for_each_success(n * row, p, rng, |m| {
        let i = (m / row) as usize;
        let r = (m % row) as usize;
        let j = if r < i { r } else { r + 1 };
        lists[i].push(j);
    });
    Network::from_in_neighbors(lists, NetworkKind::DirectedRandom { p })
}

/// Undirected random graph `G(N, p)`, stored as a symmetric directed graph.
pub fn sample_undirected_rg<R: Rng + ?Sized>(nodes: usize, p: f64, rng: &mut R) -> Result<Network> {
    check_probability(p)?;
    let n = nodes as u64;
    let total = n * n.saturating_sub(1) / 2;
    let mut lists = vec![Vec::new(); nodes];
    // row a holds pairs (a, b) for b > a; m increases so the row only advances
    let mut a = 0u64;
    let mut row_start = 0u64;
    for_each_success(total, p, rng, |m| {
        while m >= row_start + (n - 1 - a) {
            row_start += n - 1 - a;
            a += 1;
        }
        let b = a + 1 + (m - row_start);
        lists[a as usize].push(b as usize);
        lists[b as usize].push(a as usize);
    });
    for list in &mut lists {
        list.sort_unstable();
    }
    Network::from_in_neighbors(lists, NetworkKind::UndirectedRandom { p })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub mean_in: f64,
    pub mean_out: f64,
    /// `in_histogram[k]` counts nodes with in-degree `k`.
    pub in_histogram: Vec<usize>,
    pub out_histogram: Vec<usize>,
}

pub fn degree_statistics(net: &Network) -> DegreeStats {
    fn histogram(degrees: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut h = Vec::new();
        for d in degrees {
            if d >= h.len() {
                h.resize(d + 1, 0);
            }
            h[d] += 1;
        }
        h
    }
    let n = net.len().max(1) as f64;
    let mean = net.edge_count() as f64 / n;
    DegreeStats {
        mean_in: mean,
        mean_out: mean,
        in_histogram: histogram((0..net.len()).map(|i| net.in_degree(i))),
        out_histogram: histogram(net.out_degrees().into_iter()),
    }
}
