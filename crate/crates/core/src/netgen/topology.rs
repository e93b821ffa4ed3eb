use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GenError;
use crate::geometry;
use crate::model::{ChipletDef, Endpoint, Link, Placement, Point, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Mesh,
    Torus,
    FoldedTorus,
    FlattenedButterfly,
    Hypercube,
    Hexamesh,
    Shg,
}

impl TopologyKind {
    pub const GENERATED: [TopologyKind; 6] = [
        TopologyKind::Mesh,
        TopologyKind::Torus,
        TopologyKind::FoldedTorus,
        TopologyKind::FlattenedButterfly,
        TopologyKind::Hypercube,
        TopologyKind::Hexamesh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Mesh => "mesh",
            TopologyKind::Torus => "torus",
            TopologyKind::FoldedTorus => "folded_torus",
            TopologyKind::FlattenedButterfly => "flattened_butterfly",
            TopologyKind::Hypercube => "hypercube",
            TopologyKind::Hexamesh => "hexamesh",
            TopologyKind::Shg => "shg",
        }
    }

    /// Kinds laid out on the hexagonal brick placement.
    pub fn uses_hex_placement(self) -> bool {
        matches!(self, TopologyKind::Hexamesh)
    }
}

/// Undirected node-pair set over the row-major grid numbering, before PHYs
/// are bound. Pairs are stored as (low, high) in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkSet {
    pub node_count: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl LinkSet {
    fn new(node_count: usize) -> Self {
        LinkSet {
            node_count,
            pairs: BTreeSet::new(),
        }
    }

    fn add(&mut self, a: usize, b: usize) {
        if a != b {
            self.pairs.insert((a.min(b), a.max(b)));
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(a, b) in &self.pairs {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.pairs {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Ring ordering along one dimension: plain ring, or the interleaved folding
/// whose links span at most two positions.
fn ring_pairs(n: usize, folded: bool) -> Vec<(usize, usize)> {
    if n < 3 {
        return (1..n).map(|i| (i - 1, i)).collect();
    }
    if folded {
        let mut pairs: Vec<(usize, usize)> = (0..n - 2).map(|i| (i, i + 2)).collect();
        pairs.push((0, 1));
        pairs.push((n - 2, n - 1));
        pairs
    } else {
        let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        pairs.push((n - 1, 0));
        pairs
    }
}

fn add_line(set: &mut LinkSet, nodes: &[usize], all_to_all: bool) {
    if all_to_all {
        for (i, &a) in nodes.iter().enumerate() {
            for &b in &nodes[i + 1..] {
                set.add(a, b);
            }
        }
    } else {
        for w in nodes.windows(2) {
            set.add(w[0], w[1]);
        }
    }
}

fn row(r: usize, cols: usize) -> Vec<usize> {
    (0..cols).map(|c| r * cols + c).collect()
}

fn col(c: usize, rows: usize, cols: usize) -> Vec<usize> {
    (0..rows).map(|r| r * cols + c).collect()
}

pub fn generate_topology(kind: TopologyKind, rows: usize, cols: usize) -> Result<LinkSet, GenError> {
    if rows == 0 || cols == 0 {
        return Err(GenError::Unsupported(format!("{} needs a nonempty grid", kind.name())));
    }
    let n = rows * cols;
    let mut set = LinkSet::new(n);
    match kind {
        TopologyKind::Mesh => {
            for r in 0..rows {
                add_line(&mut set, &row(r, cols), false);
            }
            for c in 0..cols {
                add_line(&mut set, &col(c, rows, cols), false);
            }
        }
        TopologyKind::Torus | TopologyKind::FoldedTorus => {
            let folded = kind == TopologyKind::FoldedTorus;
            for r in 0..rows {
                for (a, b) in ring_pairs(cols, folded) {
                    set.add(r * cols + a, r * cols + b);
                }
            }
            for c in 0..cols {
                for (a, b) in ring_pairs(rows, folded) {
                    set.add(a * cols + c, b * cols + c);
                }
            }
        }
        TopologyKind::FlattenedButterfly => {
            for r in 0..rows {
                add_line(&mut set, &row(r, cols), true);
            }
            for c in 0..cols {
                add_line(&mut set, &col(c, rows, cols), true);
            }
        }
        TopologyKind::Hypercube => {
            if !n.is_power_of_two() || n < 2 {
                return Err(GenError::Unsupported(format!("hypercube needs a power-of-two node count, got {n}")));
            }
            let dims = n.trailing_zeros();
            for a in 0..n {
                for bit in 0..dims {
                    set.add(a, a ^ (1 << bit));
                }
            }
        }
        TopologyKind::Hexamesh => {
            for r in 0..rows {
                add_line(&mut set, &row(r, cols), false);
            }
            // Odd rows sit half a pitch to the right of even rows.
            for r in 0..rows.saturating_sub(1) {
                for c in 0..cols {
                    let a = r * cols + c;
                    let (left, right) = if r % 2 == 0 { (c.checked_sub(1), Some(c)) } else { (Some(c), (c + 1 < cols).then_some(c + 1)) };
                    for nc in [left, right].into_iter().flatten() {
                        set.add(a, (r + 1) * cols + nc);
                    }
                }
            }
        }
        TopologyKind::Shg => {
            return Err(GenError::Unsupported("shg topologies need upgrade bits; use generate_shg".into()));
        }
    }
    Ok(set)
}

/// Upgrade flags of an SHG topology: `rows − 2` interior-row flags followed
/// by `cols − 2` interior-column flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShgBits(pub Vec<bool>);

impl ShgBits {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ShgBits(vec![false; (rows + cols).saturating_sub(4)])
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        ShgBits(vec![true; (rows + cols).saturating_sub(4)])
    }

    /// Bit `i` of `value` becomes flag `i`.
    pub fn from_index(rows: usize, cols: usize, value: u64) -> Self {
        let len = (rows + cols).saturating_sub(4);
        ShgBits((0..len).map(|i| value >> i & 1 == 1).collect())
    }

    pub fn parse(s: &str) -> Result<Self, GenError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GenError::Unsupported(format!("invalid SHG bit {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ShgBits)
    }

    pub fn as_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Hybrid between mesh and flattened butterfly: a set flag turns an interior
/// row or column all-to-all; boundary rows and columns follow only when every
/// flag is set.
pub fn generate_shg(rows: usize, cols: usize, bits: &ShgBits) -> Result<LinkSet, GenError> {
    if rows < 3 || cols < 3 {
        return Err(GenError::Unsupported(format!("shg needs at least 3x3 chiplets, got {rows}x{cols}")));
    }
    if bits.0.len() != rows + cols - 4 {
        return Err(GenError::Unsupported(format!(
            "shg on {rows}x{cols} needs {} bits, got {}",
            rows + cols - 4,
            bits.0.len()
        )));
    }
    let all = bits.0.iter().all(|&b| b);
    let (row_bits, col_bits) = bits.0.split_at(rows - 2);
    let upgraded = |index: usize, len: usize, flags: &[bool]| {
        if index == 0 || index == len - 1 {
            all
        } else {
            flags[index - 1]
        }
    };
    let mut set = LinkSet::new(rows * cols);
    for r in 0..rows {
        add_line(&mut set, &row(r, cols), upgraded(r, rows, row_bits));
    }
    for c in 0..cols {
        add_line(&mut set, &col(c, rows, cols), upgraded(c, cols, col_bits));
    }
    Ok(set)
}

/// Binds each abstract link to a free PHY on both chiplets: each node gives
/// its links, in link order, the unused PHY closest to the peer's center.
pub fn bind_phys(
    links: &LinkSet,
    placement: &Placement,
    defs: &[&ChipletDef],
) -> Result<Topology, GenError> {
    let n = links.node_count;
    let centers: Vec<Point> = placement
        .chiplets
        .iter()
        .zip(defs)
        .map(|(inst, def)| {
            let r = geometry::footprint(def, inst);
            Point::new((r.min.x + r.max.x) / 2.0, (r.min.y + r.max.y) / 2.0)
        })
        .collect();
    let phy_points: Vec<Vec<Point>> = placement
        .chiplets
        .iter()
        .zip(defs)
        .map(|(inst, def)| {
            (0..def.phys.len())
                .map(|p| geometry::phy_position(def, inst, p).expect("phy index in range"))
                .collect()
        })
        .collect();
    let mut used = vec![Vec::new(); n];
    for (node, def) in defs.iter().enumerate() {
        used[node] = vec![false; def.phys.len()];
    }
    let mut pick = |node: usize, peer: usize| -> Result<usize, GenError> {
        let target = centers[peer];
        let mut best: Option<(f64, usize)> = None;
        for (p, pt) in phy_points[node].iter().enumerate() {
            if used[node][p] {
                continue;
            }
            let d = (pt.x - target.x).hypot(pt.y - target.y);
            if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
                best = Some((d, p));
            }
        }
        let (_, p) = best.ok_or_else(|| GenError::Unsupported(format!("chiplet {node} has fewer PHYs than links")))?;
        used[node][p] = true;
        Ok(p)
    };
    let mut out = Vec::with_capacity(links.len());
    for &(a, b) in &links.pairs {
        let pa = pick(a, b)?;
        let pb = pick(b, a)?;
        out.push(Link {
            a: Endpoint::Chiplet { index: a, phy: pa },
            b: Endpoint::Chiplet { index: b, phy: pb },
        });
    }
    Ok(Topology { links: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_counts() {
        assert_eq!(generate_topology(TopologyKind::Mesh, 3, 3).unwrap().len(), 12);
        assert_eq!(generate_topology(TopologyKind::Torus, 3, 3).unwrap().len(), 18);
        assert_eq!(generate_topology(TopologyKind::FoldedTorus, 4, 4).unwrap().len(), 32);
        let fb = generate_topology(TopologyKind::FlattenedButterfly, 10, 10).unwrap();
        assert_eq!(fb.len(), 900);
        assert!(fb.degrees().iter().all(|&d| d == 18));
        assert_eq!(generate_topology(TopologyKind::Hypercube, 4, 4).unwrap().len(), 32);
    }

    #[test]
    fn folded_links_span_two_steps_at_most() {
        let set = generate_topology(TopologyKind::FoldedTorus, 6, 6).unwrap();
        for &(a, b) in &set.pairs {
            let (ra, ca) = (a / 6, a % 6);
            let (rb, cb) = (b / 6, b % 6);
            assert!(ra.abs_diff(rb) + ca.abs_diff(cb) <= 2);
        }
        assert!(set.degrees().iter().all(|&d| d == 4));
    }

    #[test]
    fn unsupported_sizes() {
        assert!(generate_topology(TopologyKind::Hypercube, 3, 3).is_err());
        assert!(generate_topology(TopologyKind::Mesh, 0, 3).is_err());
        assert!(generate_shg(4, 4, &ShgBits(vec![true])).is_err());
        assert!(generate_shg(2, 4, &ShgBits::zeros(2, 4)).is_err());
    }

    #[test]
    fn hexamesh_interior_degree_is_six() {
        let set = generate_topology(TopologyKind::Hexamesh, 5, 5).unwrap();
        let deg = set.degrees();
        assert_eq!(deg[2 * 5 + 2], 6);
        assert!(set.is_connected());
    }

    #[test]
    fn shg_extremes_and_single_column() {
        for n in [4, 10] {
            let mesh = generate_topology(TopologyKind::Mesh, n, n).unwrap();
            let fb = generate_topology(TopologyKind::FlattenedButterfly, n, n).unwrap();
            assert_eq!(generate_shg(n, n, &ShgBits::zeros(n, n)).unwrap(), mesh);
            assert_eq!(generate_shg(n, n, &ShgBits::ones(n, n)).unwrap(), fb);
        }
        let mesh = generate_topology(TopologyKind::Mesh, 4, 4).unwrap();
        let one = generate_shg(4, 4, &ShgBits::parse("0001").unwrap()).unwrap();
        let extra: BTreeSet<_> = one.pairs.difference(&mesh.pairs).copied().collect();
        // column 2 holds nodes 2, 6, 10, 14
        assert_eq!(extra, BTreeSet::from([(2, 10), (2, 14), (6, 14)]));
        assert!(mesh.pairs.is_subset(&one.pairs));
    }

    #[test]
    fn shg_bits_are_monotone() {
        for value in 0..16u64 {
            let base = generate_shg(4, 4, &ShgBits::from_index(4, 4, value)).unwrap();
            for bit in 0..4 {
                let more = generate_shg(4, 4, &ShgBits::from_index(4, 4, value | 1 << bit)).unwrap();
                assert!(base.pairs.is_subset(&more.pairs));
            }
        }
    }

    #[test]
    fn all_generated_kinds_are_connected() {
        for kind in TopologyKind::GENERATED {
            for rows in 2..=8 {
                for cols in 2..=8 {
                    if let Ok(set) = generate_topology(kind, rows, cols) {
                        assert!(set.is_connected(), "{kind:?} {rows}x{cols}");
                    }
                }
            }
        }
    }
}
